"""Ergodic optimization toolkit.

Maximal/minimal Birkhoff averages and rotation sets of observables over
shift spaces, joint spectral radius and subradius brackets, Lyapunov and
Morse spectrum approximations for one-step matrix cocycles, and the dyadic
midpoint construction of adapted metrics that bring one-step singular data
into a neighborhood of the Morse spectrum.
"""

__version__ = "0.1.0"

from .budget import BudgetError, check_budget, current_budget
from .symdyn import (
    AdmissibilityError,
    CirclePoint,
    Necklace,
    SymbolicSystem,
    Word,
    count_words,
    enumerate_necklaces,
    is_sturmian,
    orbit_angles,
    sturmian_word,
    word_matrix,
    words_of_length,
)
from .matgeo import (
    ChamberVector,
    SingularMatrixError,
    SpdPoint,
    ThetaSet,
    act,
    cartan,
    geodesic,
    jordan,
    majorization_slack,
    majorizes,
    midpoint,
    opposition,
    theta_hull_support,
    theta_supports,
    vdist,
)
from .birkhoff import (
    BetaBracket,
    ContextError,
    Observable,
    SubactionDivergenceError,
    SubactionTable,
    beta_bracket,
    birkhoff_sum,
    envelope_upper,
    fit_subaction,
    maximizing_set,
    periodic_average,
    smooth,
    subaction_iterate,
)
from .rotation import (
    ConvexApprox,
    VectorObservable,
    fish_approx,
    fish_observable,
    homoclinic_sum,
    rotation_inner,
    rotation_outer,
    unit_directions,
)
from .cocycle import (
    CertificateError,
    DominationReport,
    JsrBracket,
    OneStepCocycle,
    ScaledMatrix,
    SpectrumApprox,
    SubradiusBracket,
    WindowedCocycle,
    conjugate,
    domination_report,
    extremal_defect,
    identity_cocycle,
    jsr_bracket,
    lyap_vector_periodic,
    periodic_product,
    product,
    sigma_n,
    spectrum_approx,
    subradius_bracket,
)
from .adapt import (
    AdaptedConjugation,
    ConditioningError,
    DegenerateSplittingError,
    MetricTable,
    adapted_metric,
    conjugated_cocycle,
    midpoint_recursion,
    midpoint_recursion_levels,
    one_step_domination_check,
    preliminary_orthogonalization,
    verify_inclusion,
    verify_oba,
)
