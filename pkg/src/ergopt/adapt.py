"""Adapted metrics by dyadic midpoint recursion.

Builds, level by level, a table of inner products over windows of symbols:
level 0 is the standard inner product, and each next level takes the SPD
geodesic midpoint of the previous table with its pullback under the
half-block product.  Conjugating the cocycle by the inverse square root of
the final table yields a windowed cocycle G whose one-step singular
spectra are majorized by the depth-N average spectra, hence enter any
neighborhood of the Morse spectrum for N large.  The module also checks
that certificate, the inclusion of the one-step spectra in sampled outer
hulls, and the resulting one-step visibility of singular-gap domination.

For two-dimensional cocycles with a dominated index, a preliminary
window-dependent change of basis can align the expanding/contracting
directions (located by power iteration on periodized windows) with the
coordinate axes before the recursion runs; degenerate cases fall back to
the plain recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .budget import check_budget
from .cocycle import (
    CertificateError,
    Cocycle,
    DominationReport,
    OneStepCocycle,
    SpectrumApprox,
    WindowedCocycle,
    conjugate,
    domination_report,
    product,
    _windowed_products,
)
from .matgeo import SpdPoint, ThetaSet, majorization_slack_rows, theta_supports
from .symdyn import SymbolicSystem, WordIndexer, count_words, word_matrix

OBA_TOL = 1e-8


class ConditioningError(RuntimeError):
    """The midpoint recursion produced a numerically indefinite table entry."""


class DegenerateSplittingError(RuntimeError):
    """The expanding and contracting directions could not be separated."""


# -- metric tables -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricTable:
    """One level of the recursion: an inner product per admissible window.

    Entries are carried in factored form (inner product = factor factor^T),
    which preserves the small eigenvalues of strongly anisotropic metrics;
    `entries_array` materializes the products.  Arrays are aligned with the
    lexicographic ranks of the admissible `window`-words; level 0 has
    window 0 and a single entry (the standard inner product).
    """

    level: int
    rounds: int
    window: int
    factor_array: np.ndarray
    base: SymbolicSystem
    logdet_array: np.ndarray | None = None

    def __post_init__(self):
        expected = count_words(self.base, self.window)
        arr = np.asarray(self.factor_array, dtype=float)
        if arr.shape[0] != expected:
            raise ValueError(f"table must have {expected} entries")
        if not np.all(np.isfinite(arr)):
            raise ConditioningError("metric factor has non-finite entries")
        sign, logdet = np.linalg.slogdet(arr)
        if np.any(sign == 0.0):
            raise ConditioningError("metric table entry is not positive-definite")
        object.__setattr__(self, "factor_array", arr)
        if self.logdet_array is None:
            object.__setattr__(self, "logdet_array", 2.0 * logdet)
        else:
            object.__setattr__(self, "logdet_array",
                               np.asarray(self.logdet_array, dtype=float))

    @classmethod
    def from_entries(cls, level: int, rounds: int, window: int,
                     entries_array: np.ndarray, base: SymbolicSystem
                     ) -> "MetricTable":
        factor = kernels.spd_power_batch(np.asarray(entries_array, float), 0.5)
        return cls(level, rounds, window, factor, base)

    @cached_property
    def entries_array(self) -> np.ndarray:
        return self.factor_array @ np.swapaxes(self.factor_array, 1, 2)

    @property
    def indexer(self) -> WordIndexer:
        return WordIndexer(self.base, self.window)

    def entry(self, word: Sequence[int]) -> SpdPoint:
        w = tuple(int(s) for s in word[: self.window])
        f = self.factor_array[self.indexer.rank(w)]
        return SpdPoint(f @ f.T)

    def factor(self, word: Sequence[int]) -> np.ndarray:
        w = tuple(int(s) for s in word[: self.window])
        return self.factor_array[self.indexer.rank(w)]

    @cached_property
    def entries(self) -> dict:
        """Mapping view word -> SpdPoint (materialized on first use)."""
        words = word_matrix(self.base, self.window)
        return {tuple(int(s) for s in row): SpdPoint(self.entries_array[i])
                for i, row in enumerate(words)}


def recursion_windows(k: int, generator_window: int) -> list[int]:
    """Window lengths of the recursion levels 0..k.

    For a one-step cocycle level j consumes 2^k - 2^(k-j) symbols; a
    generator window W > 1 widens every level past 0 by W - 1.
    """
    out = [0]
    for j in range(k):
        m = 1 << (k - j - 1)
        out.append(m + max(out[-1], generator_window - 1))
    return out


def _level_step(F: Cocycle, factor: np.ndarray, logdet: np.ndarray,
                windows: list[int], j: int, k: int
                ) -> tuple[np.ndarray, np.ndarray]:
    """Factor and logdet tables of level j+1 from those of level j.

    The pullback of the suffix entry under the m-step block has factor
    block^(-1) @ factor, and the geodesic midpoint of p = a a^T with
    q = v v^T has factor a @ sqrt_polar(a^(-1) v): all reductions happen on
    the relative matrix a^(-1) v, which stays well-scaled.  Log
    determinants follow the exact identity det(mid) = sqrt(det p det q).
    """
    base = F.base
    m = 1 << (k - j - 1)
    lj, lj1 = windows[j], windows[j + 1]
    words = word_matrix(base, lj1)
    # m-step block products, one per product context
    ctx = m + F.window - 1
    if isinstance(F, OneStepCocycle):
        trans = None if base.is_full_shift else base.transitions
        prods, scales, block_logdets = kernels.enum_products(F.matrices, trans, m)
    else:
        prods, scales, block_logdets = _windowed_products(F, m)
    ctx_rank = WordIndexer(base, ctx).rank_batch(words[:, :ctx])
    b = prods[ctx_rank]
    b_scale = scales[ctx_rank]
    idx_j = WordIndexer(base, lj)
    suffix = idx_j.rank_batch(words[:, m:m + lj])
    prefix = idx_j.rank_batch(words[:, :lj])
    pulled = np.linalg.solve(b, factor[suffix])
    pulled *= np.exp(-b_scale)[:, None, None]
    anchor = factor[prefix]
    try:
        rel = np.linalg.solve(anchor, pulled)
        new_factor = anchor @ kernels.sqrt_polar_batch(rel)
    except kernels.IndefiniteMatrixError as exc:
        raise ConditioningError(f"indefinite midpoint at level {j + 1}") from exc
    new_logdet = (0.5 * (logdet[suffix] + logdet[prefix])
                  - block_logdets[ctx_rank])
    return new_factor, new_logdet


def midpoint_recursion_levels(F: Cocycle, k: int) -> list[MetricTable]:
    """All recursion levels 0..k as metric tables."""
    if k < 0:
        raise ValueError("k must be >= 0")
    windows = recursion_windows(k, F.window)
    total = sum(count_words(F.base, w) for w in windows)
    check_budget(total, f"midpoint recursion tables to level {k}")
    d = F.dim
    factor = np.eye(d)[None, :, :]
    logdet = np.zeros(1)
    levels = [MetricTable(0, k, 0, factor, F.base, logdet)]
    for j in range(k):
        factor, logdet = _level_step(F, factor, logdet, windows, j, k)
        levels.append(MetricTable(j + 1, k, windows[j + 1], factor, F.base,
                                  logdet))
    return levels


def midpoint_recursion(F: Cocycle, k: int) -> MetricTable:
    """The level-k table of the dyadic midpoint recursion."""
    return midpoint_recursion_levels(F, k)[-1]


# -- conjugation by the adapted metric ----------------------------------------


@dataclass(frozen=True, eq=False)
class PreliminaryConjugation:
    """Window-dependent change of basis aligning a dominated splitting."""

    table: dict
    window: int
    index: int


@dataclass(frozen=True, eq=False)
class AdaptedConjugation:
    """The conjugated cocycle G with its one-step spectra and certificate.

    `cocycle` is the cocycle the recursion actually ran on (the input, or
    its preliminary orthogonalization); `sigma1_G` holds the Cartan vector
    of G on every admissible window, one row per lexicographic rank;
    `oba_slack` is the worst prefix-sum slack of the one-step majorization
    certificate over all windows.
    """

    phi: MetricTable
    N: int
    G: Cocycle
    sigma1_G: np.ndarray
    oba_slack: float
    k: int
    cocycle: Cocycle
    domination: DominationReport | None = None
    preconjugation: PreliminaryConjugation | None = None
    notes: tuple = ()

    def __post_init__(self):
        if self.oba_slack < -OBA_TOL:
            raise CertificateError(
                f"one-step majorization certificate failed: slack {self.oba_slack}")


def conjugated_cocycle(F: Cocycle, phi: MetricTable,
                       domination: DominationReport | None = None,
                       preconjugation: PreliminaryConjugation | None = None,
                       notes: tuple = ()) -> AdaptedConjugation:
    """Conjugate F by the inverse square root of the adapted metric.

    The generator of G at a window w is phi(shifted window)^(-1/2) times
    the generator of F times phi(window)^(1/2); the shifted lookup consumes
    one extra trailing symbol, so G reads windows of length table window
    + 1.  Returns G together with its one-step Cartan data and the worst
    majorization slack against the depth-N average spectra.
    """
    if phi.base != F.base:
        raise ValueError("metric table belongs to a different base system")
    base = F.base
    k = phi.rounds
    if phi.level != k:
        raise ValueError("conjugation requires the final recursion level")
    n_steps = 1 << k
    gwin = 1 + max(phi.window, F.window - 1)
    check_budget(count_words(base, gwin), "conjugated cocycle table")
    words = word_matrix(base, gwin)
    idx = phi.indexer
    left = idx.rank_batch(words[:, 1:1 + phi.window])
    right = idx.rank_batch(words[:, :phi.window])
    sqrt_phi, isqrt_phi = kernels.spd_halves_from_factor(phi.factor_array)
    if isinstance(F, OneStepCocycle):
        letters = words[:, 0].astype(np.intp)
        gen = F.matrices[letters]
        gen_logdet = np.linalg.slogdet(F.matrices)[1][letters]
    else:
        ranks = WordIndexer(base, F.window).rank_batch(words[:, :F.window])
        gen = F.table[ranks]
        gen_logdet = np.linalg.slogdet(F.table)[1][ranks]
    table = isqrt_phi[left] @ gen @ sqrt_phi[right]
    G = WindowedCocycle(table, base, gwin)
    # spectral data through the metric factors: same singular values as the
    # table (orthogonal change on both sides), accurate for stiff metrics
    rel = np.linalg.solve(phi.factor_array[left], gen @ phi.factor_array[right])
    rel_logdet = gen_logdet + 0.5 * (phi.logdet_array[right]
                                     - phi.logdet_array[left])
    sigma1 = kernels.cartan_batch(rel, rel_logdet)
    # certificate sides: 2 sigma(G) against (2/N) sigma(N-step products)
    if isinstance(F, OneStepCocycle):
        trans = None if base.is_full_shift else base.transitions
        avg = kernels.enum_product_cartan(F.matrices, trans, n_steps)
    else:
        prods, scales, logdets = _windowed_products(F, n_steps)
        avg = kernels.cartan_batch(prods, logdets, scales)
    slack = float(majorization_slack_rows(2.0 * avg / n_steps, 2.0 * sigma1).min())
    return AdaptedConjugation(phi, n_steps, G, sigma1, slack, k, F,
                              domination, preconjugation, notes)


# -- certificates ----------------------------------------------------------------


def oba_sides(F: Cocycle, phi: MetricTable, word) -> tuple[np.ndarray, np.ndarray]:
    """Literal sides of the one-step certificate at one sampled word.

    Left: vector distance from phi at the shifted window to the pushforward
    of phi under the generator.  Right: (1/N) times the vector distance
    from the standard inner product to its pushforward under the N-step
    product.  The certificate asserts left majorized by right.

    The left side is evaluated through the metric factors: the distance
    from p = a a^T to q = v v^T is twice the log singular spectrum of
    a^(-1) v, which agrees with the symmetric-root formula and keeps
    anisotropic metrics accurate.
    """
    w = tuple(int(s) for s in word)
    n_steps = 1 << phi.rounds
    need = n_steps + F.window - 1
    if len(w) < need:
        raise ValueError(f"sampled word must carry at least {need} symbols")
    gen = F.generator(w)
    idx = phi.indexer
    r_right = idx.rank(tuple(w[:phi.window]))
    r_left = idx.rank(tuple(w[1:1 + phi.window]))
    rel = np.linalg.solve(phi.factor_array[r_left], gen @ phi.factor_array[r_right])
    rel_logdet = (float(np.linalg.slogdet(gen)[1])
                  + 0.5 * (phi.logdet_array[r_right] - phi.logdet_array[r_left]))
    lhs = 2.0 * kernels.cartan_batch(rel[None], np.array([rel_logdet]))[0]
    block = product(F, w[:need])
    rhs = 2.0 * block.cartan().values / n_steps
    return lhs, rhs


def verify_oba(F: Cocycle, result: AdaptedConjugation, sample) -> float:
    """Worst majorization slack of the one-step certificate over sampled words.

    Each sampled word must carry enough symbols for the N-step product
    (N + generator window - 1).  Sides are evaluated literally (the left
    one through the SPD geometry, not through G), so this is an
    independent check of the stored `oba_slack`.
    """
    lhs_rows, rhs_rows = [], []
    for word in sample:
        lhs, rhs = oba_sides(F, result.phi, word)
        lhs_rows.append(lhs)
        rhs_rows.append(rhs)
    if not lhs_rows:
        raise ValueError("need at least one sampled word")
    slacks = majorization_slack_rows(np.array(rhs_rows), np.array(lhs_rows))
    worst = float(slacks.min())
    if worst < -OBA_TOL:
        raise CertificateError(f"one-step majorization certificate failed: {worst}")
    return worst


def level_contraction_slack(F: Cocycle, levels: Sequence[MetricTable],
                            j: int, word) -> float:
    """Slack of the halving inequality between recursion levels j and j+1.

    The distance from the level-(j+1) table at the m-shifted window to its
    pullback under the m-step block is majorized by half the same quantity
    one level down with a 2m-step block (m = 2^(k-j-1)).
    """
    k = levels[0].rounds
    m = 1 << (k - j - 1)
    w = tuple(int(s) for s in word)
    need = 2 * m + max(levels[j].window, F.window - 1)
    if len(w) < need:
        raise ValueError(f"need at least {need} symbols")

    def side(table: MetricTable, steps: int) -> np.ndarray:
        block = product(F, w[:steps + F.window - 1])
        idx = table.indexer
        r_right = idx.rank(tuple(w[:table.window]))
        r_left = idx.rank(tuple(w[steps:steps + table.window]))
        rel = np.linalg.solve(table.factor_array[r_left],
                              block.matrix @ table.factor_array[r_right])
        d = rel.shape[0]
        rel_logdet = ((block.log_abs_det - d * block.log_scale)
                      + 0.5 * (table.logdet_array[r_right]
                               - table.logdet_array[r_left]))
        logs = kernels.cartan_batch(rel[None], np.array([rel_logdet]))[0]
        return 2.0 * (logs + block.log_scale)

    lhs = side(levels[j + 1], m)
    rhs = side(levels[j], 2 * m)
    return float(majorization_slack_rows(0.5 * rhs[None], lhs[None])[0])


@dataclass(frozen=True)
class InclusionReport:
    """Directional comparison of one-step spectra against an outer hull."""

    epsilon: float
    achieved_epsilon: float
    passed: bool
    per_direction: dict

    @property
    def worst_direction(self):
        return max(self.per_direction, key=lambda c: self.per_direction[c])


def verify_inclusion(result: AdaptedConjugation, outer: SpectrumApprox,
                     epsilon: float) -> InclusionReport:
    """Check the one-step spectra against an inflated outer support.

    For every sampled direction the Theta-orbit support of each one-step
    Cartan vector must stay below the outer support plus epsilon.
    `achieved_epsilon` is the smallest inflation that would pass (negative
    when strictly inside).
    """
    theta = outer.theta
    if theta.dim != result.G.dim:
        raise ValueError("Theta dimension mismatch")
    if outer.depth != result.N:
        raise ValueError(f"outer envelope depth {outer.depth} differs from N={result.N}")
    rows = np.sort(result.sigma1_G, axis=1)[:, ::-1]
    per_direction = {}
    achieved = -math.inf
    for c, bound in outer.outer_support.items():
        excess = float(theta_supports(rows, theta, np.asarray(c)).max()) - bound
        per_direction[c] = excess - epsilon
        achieved = max(achieved, excess)
    passed = achieved <= epsilon + 1e-12
    return InclusionReport(epsilon, achieved, passed, per_direction)


def one_step_domination_check(result: AdaptedConjugation, index: int,
                              report: DominationReport | None = None
                              ) -> tuple[float, bool]:
    """Minimal one-step singular gap of G at a dominated index.

    Requires a domination report (attached to the result or passed
    explicitly) whose verdict at `index` is "dominated"; returns the
    minimum over windows of log s_index - log s_(index+1) of the
    conjugated generator and whether it is strictly positive.
    """
    d = result.G.dim
    if not 1 <= index <= d - 1:
        raise ValueError(f"index {index} outside 1..{d - 1}")
    rep = report if report is not None else result.domination
    if rep is None:
        raise ValueError("no domination report available for the precondition")
    if rep.verdict(index) != "dominated":
        raise ValueError(f"index {index} is not verdicted dominated "
                         f"({rep.verdict(index)})")
    gaps = result.sigma1_G[:, index - 1] - result.sigma1_G[:, index]
    gap = float(gaps.min())
    return gap, gap > 0.0


# -- preliminary orthogonalization ---------------------------------------------


def _power_direction(mat: np.ndarray, iters: int = 128) -> tuple[np.ndarray, float]:
    """Dominant direction of a 2x2 matrix by power iteration.

    Returns the direction and the final residual; a large residual means
    no real separated dominant direction (rotation-like or parabolic).
    """
    best_v, best_res = None, math.inf
    for start in (np.array([1.0, 1.0]), np.array([1.0, -1.0])):
        v = start / np.linalg.norm(start)
        for _ in range(iters):
            w = mat @ v
            nw = np.linalg.norm(w)
            if nw == 0.0 or not np.isfinite(nw):
                return v, math.inf
            v = w / nw
        lam = float(v @ (mat @ v))
        res = float(np.linalg.norm(mat @ v - lam * v) / max(np.abs(lam), 1e-30))
        if res < best_res:
            best_v, best_res = v, res
    if best_v[np.argmax(np.abs(best_v))] < 0:
        best_v = -best_v
    return best_v, best_res


def preliminary_orthogonalization(F: OneStepCocycle, window: int,
                                  residual_tol: float = 1e-9,
                                  angle_tol: float = 1e-3
                                  ) -> tuple[WindowedCocycle, PreliminaryConjugation]:
    """Align the expanding/contracting directions with the axes, per window.

    Only for d = 2.  Each admissible window is read as a periodic word; the
    expanding direction is obtained by power iteration of its block
    product, the contracting one by iterating the inverse.  Windows whose
    directions fail to separate (residual above `residual_tol` or angle
    below `angle_tol`) raise DegenerateSplittingError.
    """
    if F.dim != 2:
        raise DegenerateSplittingError(
            "preliminary orthogonalization is implemented for dimension 2 only")
    if window < 1:
        raise ValueError("window must be >= 1")
    table = {}
    for row in word_matrix(F.base, window):
        w = tuple(int(s) for s in row)
        block = product(F, w).matrix  # scale does not affect directions
        expanding, res_v = _power_direction(block)
        contracting, res_w = _power_direction(np.linalg.inv(block))
        if max(res_v, res_w) > residual_tol:
            raise DegenerateSplittingError(
                f"power iteration did not separate directions on window {w}")
        h = np.column_stack([expanding, contracting])
        if abs(np.linalg.det(h)) < angle_tol:
            raise DegenerateSplittingError(
                f"expanding and contracting directions nearly coincide on {w}")
        table[w] = h
    return (conjugate(F, table, window),
            PreliminaryConjugation(table, window, 1))


# -- pipeline --------------------------------------------------------------------


def spectrum_for_inclusion(F: Cocycle, max_period: int, depth: int,
                           theta, directions=64
                           ) -> tuple[SpectrumApprox, bool]:
    """Outer spectrum for an inclusion check, widening Theta if needed.

    At finite depth the Theta-hull of the average spectra can clip attained
    Lyapunov vectors when Theta is small (the plain chamber hull converges
    only like 1/depth in ascending directions).  When that happens the
    symmetrized hull (Theta full) is used instead and the downgrade is
    reported.
    """
    from .cocycle import spectrum_approx as _sa

    try:
        return _sa(F, max_period, depth, theta, directions), False
    except CertificateError:
        full = ThetaSet.full(F.dim)
        return _sa(F, max_period, depth, full, directions), True


def favored_measure_diagnostic(F: Cocycle, phi: MetricTable, necklace) -> dict:
    """Mean certificate bound along one periodic orbit, against its Lyapunov data.

    Averages the right-hand side of the one-step certificate over the orbit
    of the necklace and reports its l1 distance to (twice) the orbit's
    Lyapunov vector.  A small distance indicates the expansion rates seen
    by the adapted metric in one step are close to the Lyapunov exponents
    of that measure; this is a diagnostic, not a certified bound.
    """
    from .cocycle import lyap_vector_periodic

    n_steps = 1 << phi.rounds
    need = n_steps + F.window - 1
    ext = necklace.repeat(need + necklace.period)
    rows = []
    for j in range(necklace.period):
        block = product(F, ext[j:j + need])
        rows.append(2.0 * block.cartan().values / n_steps)
    mean_rhs = np.mean(rows, axis=0)
    lam = 2.0 * lyap_vector_periodic(F, necklace).values
    return {
        "necklace": str(necklace),
        "mean_bound": [float(x) for x in mean_rhs],
        "lyapunov_doubled": [float(x) for x in lam],
        "l1_distance": float(np.abs(mean_rhs - lam).sum()),
    }


def default_domination_depths(system: SymbolicSystem,
                              cap: int = 1 << 14) -> tuple[int, int]:
    """Two test depths whose word counts stay below `cap`."""
    n = 2
    while n < 16 and count_words(system, n + 1) <= cap:
        n += 1
    return (max(2, n // 2), n)


def adapted_metric(F: OneStepCocycle, k: int, *, preconjugate="auto",
                   precon_window: int = 4, report: DominationReport | None = None,
                   depths: Sequence[int] | None = None,
                   kappa: float = 1.05) -> AdaptedConjugation:
    """Full pipeline: domination report, optional orthogonalization, recursion.

    With preconjugate="auto" the preliminary change of basis is attempted
    for two-dimensional cocycles with a dominated index and silently
    dropped when the splitting degenerates; True forces it (raising on
    degeneracy) and False skips it.
    """
    if report is None:
        report = domination_report(F, depths or default_domination_depths(F.base),
                                   kappa)
    notes: list[str] = []
    run: Cocycle = F
    precon = None
    wants = preconjugate is True or (
        preconjugate == "auto" and F.dim == 2 and report.verdict(1) == "dominated")
    if wants:
        try:
            run, precon = preliminary_orthogonalization(F, precon_window)
            notes.append(f"preconjugated on window {precon_window}")
        except DegenerateSplittingError as exc:
            if preconjugate is True:
                raise
            notes.append(f"preconjugation degenerate, plain recursion ({exc})")
    phi = midpoint_recursion(run, k)
    return conjugated_cocycle(run, phi, domination=report,
                              preconjugation=precon, notes=tuple(notes))
