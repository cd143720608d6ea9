"""One-step and windowed linear cocycles over shift spaces.

Scaled matrix products along words, the per-depth sets of singular
spectra, Lyapunov vectors of periodic orbits, joint spectral radius and
subradius brackets, singular-gap domination detection, inner/outer support
approximations of the Lyapunov and Morse spectra, cocycle conjugation, and
extremal-norm defect evaluation.

All long products are renormalized to unit max-norm with an accumulated
log scale, so enumerations to depth ~20 stay inside double range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .budget import check_budget
from .matgeo import ChamberVector, SpdPoint, ThetaSet, theta_supports
from .rotation import unit_directions
from .symdyn import (
    Necklace,
    SymbolicSystem,
    Word,
    WordIndexer,
    count_words,
    enumerate_necklaces,
    word_matrix,
)

DET_TOL = 1e-12


class CertificateError(RuntimeError):
    """A mathematically guaranteed inequality failed at the stated tolerance."""


# -- scaled matrices ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScaledMatrix:
    """A matrix held as exp(log_scale) * m with m of unit max-norm.

    Keeps products over hundreds of factors inside double range; all
    logarithmic readings fold the scale back in.  The log determinant of
    the represented matrix is accumulated exactly across products (one
    summand per factor), which keeps the smallest singular value accurate
    for very ill-conditioned products.
    """

    matrix: np.ndarray
    log_scale: float
    log_abs_det: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        top = float(np.abs(m).max())
        if not 0.5 <= top <= 2.0:
            raise ValueError(f"max-norm {top} outside [1/2, 2]; use ScaledMatrix.wrap")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def wrap(cls, m, log_scale: float = 0.0) -> "ScaledMatrix":
        m = np.asarray(m, dtype=float)
        top = float(np.abs(m).max())
        if top == 0.0 or not np.isfinite(top):
            raise ValueError("cannot scale a zero or non-finite matrix")
        logdet = float(np.linalg.slogdet(m)[1]) + m.shape[0] * log_scale
        return cls(m / top, log_scale + math.log(top), logdet)

    @classmethod
    def identity(cls, d: int) -> "ScaledMatrix":
        return cls(np.eye(d), 0.0, 0.0)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "ScaledMatrix") -> "ScaledMatrix":
        m = self.matrix @ other.matrix
        top = float(np.abs(m).max())
        return ScaledMatrix(m / top,
                            self.log_scale + other.log_scale + math.log(top),
                            self.log_abs_det + other.log_abs_det)

    def cartan(self) -> ChamberVector:
        logs = kernels.cartan_batch(self.matrix[None],
                                    np.array([self.log_abs_det]),
                                    np.array([self.log_scale]))[0]
        return ChamberVector.from_array(logs)

    def jordan(self) -> ChamberVector:
        mods = np.sort(np.abs(np.linalg.eigvals(self.matrix)))[::-1]
        logs = np.log(np.maximum(mods, 1e-300)) + self.log_scale
        # the smallest modulus from the exact determinant (moduli multiply
        # to |det|), guarded to keep the ordering
        corrected = self.log_abs_det - logs[:-1].sum()
        logs[-1] = min(logs[-2], corrected) if len(logs) > 1 else self.log_abs_det
        return ChamberVector.from_array(logs)

    def toarray(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.matrix


# -- cocycle types ------------------------------------------------------------


def _check_invertible(mats: np.ndarray) -> None:
    dets = np.linalg.det(mats)
    if np.any(np.abs(dets) <= DET_TOL):
        raise ValueError(f"matrices must be invertible (|det| > {DET_TOL})")


@dataclass(frozen=True, eq=False)
class OneStepCocycle:
    """A matrix per symbol: the generator at x is the matrix of its zeroth symbol."""

    matrices: np.ndarray
    base: SymbolicSystem

    def __post_init__(self):
        mats = np.ascontiguousarray(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("matrices must have shape (k, d, d)")
        if mats.shape[0] != self.base.alphabet_size:
            raise ValueError("one matrix per alphabet symbol required")
        _check_invertible(mats)
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @classmethod
    def from_json(cls, source) -> "OneStepCocycle":
        """Load {"dim": d, "matrices": [[...]], "forbidden": [[i, j], ...]}."""
        if isinstance(source, dict):
            doc = source
        else:
            text = str(source)
            if text.lstrip().startswith("{"):
                doc = json.loads(text)
            else:
                with open(text, "r", encoding="utf-8") as fh:
                    doc = json.load(fh)
        mats = np.asarray(doc["matrices"], dtype=float)
        d = int(doc.get("dim", mats.shape[-1]))
        mats = mats.reshape(len(mats), d, d)
        base = SymbolicSystem.from_forbidden(len(mats), doc.get("forbidden", ()))
        return cls(mats, base)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def window(self) -> int:
        return 1

    def generator(self, context: Sequence[int]) -> np.ndarray:
        return self.matrices[context[0]]

    def context_count(self, n: int) -> int:
        return count_words(self.base, n)


@dataclass(frozen=True, eq=False)
class WindowedCocycle:
    """A cocycle whose generator depends on a fixed window of leading symbols.

    The table holds one matrix per admissible window, in lexicographic
    rank order; conjugating a one-step cocycle by a windowed change of
    basis produces exactly this shape.
    """

    table: np.ndarray
    base: SymbolicSystem
    window: int

    def __post_init__(self):
        table = np.ascontiguousarray(self.table, dtype=float)
        expected = count_words(self.base, self.window)
        if table.shape[0] != expected:
            raise ValueError(f"table must have {expected} entries")
        _check_invertible(table)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_mapping(cls, mapping: Mapping, base: SymbolicSystem,
                     window: int) -> "WindowedCocycle":
        words = word_matrix(base, window)
        rows = []
        for row in words:
            key = tuple(int(s) for s in row)
            if key not in mapping:
                raise ValueError(f"mapping misses admissible window {key}")
            rows.append(np.asarray(mapping[key], dtype=float))
        return cls(np.array(rows), base, window)

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    @property
    def indexer(self) -> WordIndexer:
        return WordIndexer(self.base, self.window)

    def generator(self, context: Sequence[int]) -> np.ndarray:
        w = tuple(int(s) for s in context[: self.window])
        return self.table[self.indexer.rank(w)]

    def context_count(self, n: int) -> int:
        return count_words(self.base, n + self.window - 1)


Cocycle = OneStepCocycle | WindowedCocycle


def identity_cocycle(k: int, d: int) -> OneStepCocycle:
    return OneStepCocycle(np.array([np.eye(d)] * k), SymbolicSystem.full_shift(k))


# -- products -----------------------------------------------------------------


def product(F: Cocycle, w: Sequence[int]) -> ScaledMatrix:
    """Product of generators along a word, latest step leftmost.

    For a one-step cocycle this is A[w[n-1]] @ ... @ A[w[0]]; the empty
    word gives the identity.  A windowed cocycle consumes len(w) - window
    + 1 steps, each step reading its window of symbols.
    """
    w = tuple(int(s) for s in w)
    F.base.require_admissible(w)
    d = F.dim
    if isinstance(F, OneStepCocycle):
        steps = len(w)
    else:
        if len(w) < F.window:
            raise ValueError("word shorter than the cocycle window")
        steps = len(w) - F.window + 1
    acc = ScaledMatrix.identity(d)
    for i in range(steps):
        acc = ScaledMatrix.wrap(F.generator(w[i:])) @ acc
    return acc


def periodic_product(F: Cocycle, w: Necklace) -> ScaledMatrix:
    """Product over one period of the periodic point of a necklace."""
    q = w.period
    ext = w.repeat(q + F.window - 1)
    if not F.base.is_admissible(ext) or not F.base.allowed(w.symbols[-1], w.symbols[0]):
        raise ValueError(f"necklace {w} is not cyclically admissible")
    d = F.dim
    acc = ScaledMatrix.identity(d)
    for i in range(q):
        acc = ScaledMatrix.wrap(F.generator(ext[i:])) @ acc
    return acc


def _trans_or_none(system: SymbolicSystem):
    return None if system.is_full_shift else system.transitions


def _windowed_products(F: WindowedCocycle, n: int
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scaled products of n generators over all (n + window - 1)-words.

    Returns (products, log_scales, log_abs_dets) as in
    `kernels.enum_products`.
    """
    L = n + F.window - 1
    check_budget(count_words(F.base, L), "windowed product enumeration")
    words = word_matrix(F.base, L)
    indexer = F.indexer
    table_logdets = np.linalg.slogdet(F.table)[1]
    ranks = indexer.rank_batch(words[:, :F.window])
    cur = F.table[ranks].copy()
    norms = np.abs(cur).max(axis=(1, 2))
    cur /= norms[:, None, None]
    scales = np.log(norms)
    logdets = table_logdets[ranks].copy()
    for i in range(1, n):
        ranks = indexer.rank_batch(words[:, i:i + F.window])
        cur = F.table[ranks] @ cur
        norms = np.abs(cur).max(axis=(1, 2))
        cur /= norms[:, None, None]
        scales += np.log(norms)
        logdets += table_logdets[ranks]
    return cur, scales, logdets


def sigma_n(F: Cocycle, n: int) -> np.ndarray:
    """Cartan vectors of all n-step products, one row per admissible cylinder.

    For a one-step cocycle the n-step product is constant on n-cylinders,
    so the rows are exactly the singular spectra reachable in n steps.
    Rows are in lexicographic word order; shape (count, d).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    check_budget(F.context_count(n), "product enumeration")
    if isinstance(F, OneStepCocycle):
        return kernels.enum_product_cartan(F.matrices,
                                           _trans_or_none(F.base), n)
    prods, scales, logdets = _windowed_products(F, n)
    return kernels.cartan_batch(prods, logdets, scales)


def lyap_vector_periodic(F: Cocycle, w: Necklace) -> ChamberVector:
    """Lyapunov vector of the periodic empirical measure of a necklace.

    Computed as (1/q) times the Jordan projection of the period product;
    for a periodic point this equals the limit of (1/n) times the Cartan
    projection of the n-step products.
    """
    q = w.period
    return ChamberVector.from_array(periodic_product(F, w).jordan().values / q)


# -- spectral radius brackets --------------------------------------------------


class JsrBracket(NamedTuple):
    lower: float
    upper: float
    witness: Necklace


class SubradiusBracket(NamedTuple):
    lower: float
    upper: float
    witness: Necklace
    one_sided_reliable: bool


def _necklace_rate_extreme(F: Cocycle, depth: int, maximize: bool,
                           tie_tol: float = 1e-12):
    # ties within tie_tol keep the earlier (smaller period, then lex) witness
    best = -math.inf if maximize else math.inf
    witness = None
    for neck in enumerate_necklaces(F.base, depth):
        rate = periodic_product(F, neck).jordan().entries[0] / neck.period
        if (rate > best + tie_tol) if maximize else (rate < best - tie_tol):
            best, witness = rate, neck
        elif (rate > best) if maximize else (rate < best):
            best = rate
    if witness is None:
        raise ValueError("no cyclically admissible necklace within depth")
    return best, witness


def _norm_scan(F: Cocycle, depth: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(F, OneStepCocycle):
        check_budget(count_words(F.base, depth), "norm scan")
        return kernels.scan_norm_extremes(F.matrices, _trans_or_none(F.base), depth)
    max_top = np.empty(depth)
    min_bot = np.empty(depth)
    for m in range(1, depth + 1):
        logs = sigma_n(F, m)
        max_top[m - 1] = logs[:, 0].max()
        min_bot[m - 1] = logs[:, -1].min()
    return max_top, min_bot


def jsr_bracket(F: Cocycle, depth: int) -> JsrBracket:
    """Bracket the joint spectral radius.

    Lower bound: best spectral radius rate over necklaces of period <=
    depth (attained, witnessed).  Upper bound: min over m <= depth of the
    max operator 2-norm of m-step products, to the power 1/m.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    log_lower, witness = _necklace_rate_extreme(F, depth, maximize=True)
    max_top, _ = _norm_scan(F, depth)
    log_upper = float((max_top / np.arange(1, depth + 1)).min())
    if log_lower > log_upper + 1e-9:
        raise CertificateError("spectral radius exceeded a product norm bound")
    return JsrBracket(math.exp(log_lower), math.exp(log_upper), witness)


def subradius_bracket(F: Cocycle, depth: int) -> SubradiusBracket:
    """Bracket the joint spectral subradius.

    Upper bound: smallest spectral radius rate over necklaces (valid but
    possibly not converging: the minimum need not be attained by any
    measure, hence the one-sided reliability flag).  Lower bound: max over
    m of the min smallest-singular-value rate, valid by supermultiplicativity
    of the bottom singular value.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    log_upper, witness = _necklace_rate_extreme(F, depth, maximize=False)
    _, min_bot = _norm_scan(F, depth)
    log_lower = float((min_bot / np.arange(1, depth + 1)).max())
    if log_lower > log_upper + 1e-9:
        raise CertificateError("subradius bracket inverted")
    return SubradiusBracket(math.exp(log_lower), math.exp(log_upper),
                            witness, True)


# -- domination ----------------------------------------------------------------


@dataclass(frozen=True)
class DominationReport:
    """Observed singular-gap rates and per-index domination verdicts.

    rates[j, i] is the worst (minimum over cylinders) gap rate
    (log s_{i+1} - log s_{i+2})/n at depth depths[j] and 1-based index
    i+1.  A "dominated" verdict requires the rate to clear log(kappa) at
    the two largest tested depths; a vanishing gap at the largest depth
    gives "undominated"; anything else is "inconclusive".
    """

    depths: tuple
    kappa: float
    rates: np.ndarray
    verdicts: tuple
    dim: int

    def rate(self, index: int, depth: int) -> float:
        return float(self.rates[self.depths.index(depth), index - 1])

    def verdict(self, index: int) -> str:
        return self.verdicts[index - 1]

    @property
    def theta(self) -> ThetaSet:
        """Indices without a domination verdict (the non-dominated set)."""
        return ThetaSet.of(
            (i + 1 for i, v in enumerate(self.verdicts) if v != "dominated"),
            self.dim)


def domination_report(F: Cocycle, depths: Sequence[int],
                      kappa: float = 1.05) -> DominationReport:
    """Detect singular-value-gap domination at finite depths.

    An index is verdicted dominated when the worst gap rate exceeds
    log(kappa) at the two largest depths; the verdict is a finite-depth
    heuristic for the asymptotic exponential-gap criterion, so an honest
    "inconclusive" is possible.
    """
    depths = tuple(sorted(int(n) for n in depths))
    if not depths or depths[0] < 1:
        raise ValueError("depths must be nonempty with positive entries")
    if kappa <= 1.0:
        raise ValueError("kappa must exceed 1")
    d = F.dim
    rates = np.empty((len(depths), d - 1))
    for j, n in enumerate(depths):
        logs = sigma_n(F, n)
        rates[j] = (logs[:, :-1] - logs[:, 1:]).min(axis=0) / n
    log_kappa = math.log(kappa)
    verdicts = []
    for i in range(d - 1):
        tail = rates[-2:, i] if len(depths) >= 2 else rates[-1:, i]
        if np.all(tail >= log_kappa):
            verdicts.append("dominated")
        elif rates[-1, i] <= 1e-12:
            verdicts.append("undominated")
        else:
            verdicts.append("inconclusive")
    return DominationReport(depths, kappa, rates, tuple(verdicts), d)


# -- spectrum approximation ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectrumApprox:
    """Support-sampled inner/outer approximation of the Morse spectrum.

    `inner_support` is the Theta-hull support of the periodic Lyapunov
    vectors, `outer_support` the Theta-hull support of the depth-step
    singular spectra divided by the depth.  The plain convex variant of
    the inner data (`iplus_support`, Theta empty) and the fully
    symmetrized one (`osym_support`, Theta full) are also sampled.
    Inner never exceeds outer by more than 1e-6 in any sampled direction.
    """

    lplus_samples: tuple
    theta: ThetaSet
    inner_support: dict
    outer_support: dict
    iplus_support: dict
    osym_support: dict
    depth: int
    max_period: int

    def __post_init__(self):
        worst = max(self.inner_support[c] - self.outer_support[c]
                    for c in self.outer_support)
        if worst > 1e-6:
            raise CertificateError(
                f"periodic Lyapunov vectors exceed the outer envelope by {worst:.3g}; "
                "the supplied Theta is too small for this cocycle at this depth")

    @property
    def gap(self) -> float:
        return max(self.outer_support[c] - self.inner_support[c]
                   for c in self.outer_support)


def spectrum_approx(F: Cocycle, max_period: int, depth: int, theta,
                    directions=64) -> SpectrumApprox:
    """Sample inner and outer supports of the Theta-convex spectrum hulls.

    theta may be a ThetaSet, an iterable of 1-based gap indices, or a
    DominationReport (its non-dominated set is used).
    """
    if isinstance(theta, DominationReport):
        theta = theta.theta
    elif not isinstance(theta, ThetaSet):
        theta = ThetaSet.of(theta, F.dim)
    if theta.dim != F.dim:
        raise ValueError("Theta dimension does not match the cocycle")
    d = F.dim
    lplus = [(lyap_vector_periodic(F, w), w)
             for w in enumerate_necklaces(F.base, max_period)]
    pts = np.array([v.values for v, _ in lplus])
    sig = sigma_n(F, depth) / depth
    sig = np.sort(sig, axis=1)[:, ::-1]  # guard rounding at the chamber wall
    dirs = directions if not isinstance(directions, (int, np.integer)) \
        else unit_directions(d, int(directions))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    inner, outer, iplus, osym = {}, {}, {}, {}
    empty, full = ThetaSet.empty(d), ThetaSet.full(d)
    for c in dirs:
        key = tuple(float(x) for x in c)
        inner[key] = float(theta_supports(pts, theta, c).max())
        outer[key] = float(theta_supports(sig, theta, c).max())
        iplus[key] = float(theta_supports(pts, empty, c).max())
        osym[key] = float(theta_supports(pts, full, c).max())
    return SpectrumApprox(tuple(lplus), theta, inner, outer, iplus, osym,
                          depth, max_period)


# -- conjugation ----------------------------------------------------------------


def conjugate(F: OneStepCocycle, H: Mapping, window: int) -> WindowedCocycle:
    """Conjugate a one-step cocycle by a window-dependent change of basis.

    H maps every admissible `window`-word to an invertible matrix; the
    result reads window + 1 leading symbols: the generator at x is
    H(Tx)^(-1) A(x_0) H(x).  Spectral data of periodic products and the
    radius brackets are unchanged (numerically) by this operation.
    """
    if window < 0:
        raise ValueError("window must be >= 0")
    base = F.base
    hwords = word_matrix(base, window)
    hmats = []
    for row in hwords:
        key = tuple(int(s) for s in row)
        if key not in H:
            raise ValueError(f"H misses admissible window {key}")
        hmats.append(np.asarray(H[key], dtype=float))
    hmats = np.array(hmats)
    _check_invertible(hmats)
    hinv = np.linalg.inv(hmats)
    indexer = WordIndexer(base, window)
    gwin = window + 1
    gwords = word_matrix(base, gwin)
    left = indexer.rank_batch(gwords[:, 1:])
    right = indexer.rank_batch(gwords[:, :window])
    table = hinv[left] @ F.matrices[gwords[:, 0].astype(np.intp)] @ hmats[right]
    return WindowedCocycle(table, base, gwin)


# -- extremal norms --------------------------------------------------------------


def _metric_entries(metric) -> tuple[Mapping, int]:
    if hasattr(metric, "entries") and hasattr(metric, "window"):
        return metric.entries, metric.window
    lengths = {len(k) for k in metric}
    if len(lengths) != 1:
        raise ValueError("metric keys must all have the same length")
    return metric, lengths.pop()


def extremal_defect(F: OneStepCocycle, metric, beta_est: float) -> float:
    """Worst one-step expansion of F in a windowed Riemannian metric.

    For every admissible window the generator is measured as an operator
    from the inner product at the window to the one at the shifted window,
    and the maximum log norm minus beta_est is returned.  A nonpositive
    defect certifies an extremal norm for the estimate.
    """
    entries, window = _metric_entries(metric)
    base = F.base
    words = word_matrix(base, window + 1)
    if words.shape[0] == 0:
        raise ValueError("no admissible windows")
    worst = -math.inf
    cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

    def halves(key: tuple) -> tuple[np.ndarray, np.ndarray]:
        if key not in cache:
            p = entries[key]
            point = p if isinstance(p, SpdPoint) else SpdPoint(np.asarray(p, float))
            cache[key] = (point.sqrt().matrix, point.inv_sqrt().matrix)
        return cache[key]

    for row in words:
        v = tuple(int(s) for s in row)
        sqrt_src, _ = halves(v[:window])
        _, isqrt_dst = halves(v[1:])
        op = isqrt_dst @ F.matrices[v[0]] @ sqrt_src
        worst = max(worst, float(np.log(np.linalg.svd(op, compute_uv=False)[0])))
    return worst - beta_est
