"""Scalar ergodic optimization.

Birkhoff sums and periodic averages of an observable, the two-sided
bracket for the maximal ergodic average (periodic lower bound against the
finite-depth envelope upper bound), cohomologous smoothing, the max-plus
subaction iteration with its defect certificate, and maximizing sets.

Two kinds of observables are supported: locally constant functions on a
shift space (exact envelope bounds via max-plus dynamic programming) and
Lipschitz functions of the angle under the doubling map (dyadic evaluation
grids with an explicit Lipschitz correction, so all reported upper bounds
remain valid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .budget import check_budget
from .symdyn import (
    CirclePoint,
    Necklace,
    SymbolicSystem,
    Word,
    WordIndexer,
    count_words,
    enumerate_necklaces,
    orbit_angles,
    word_matrix,
)

GRID_GUARD_BITS = 4  # dyadic grid refinement beyond the Birkhoff depth


class ContextError(ValueError):
    """A word does not carry enough symbols for the requested iteration."""


class SubactionDivergenceError(RuntimeError):
    """The subaction iteration drifts upward: beta_est is below the true maximum."""


@dataclass(frozen=True, eq=False)
class Observable:
    """A real observable over a shift space or over the doubling map.

    Symbolic observables are locally constant: `fn` receives a word and may
    only read its first `window` symbols.  Circle observables take an angle
    in [0, 1) (scalar or numpy array) and carry a Lipschitz bound with
    respect to the angle coordinate.
    """

    fn: Callable
    kind: str
    window: int | None = None
    lipschitz: float | None = None
    system: SymbolicSystem | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("symbolic", "circle"):
            raise ValueError("kind must be 'symbolic' or 'circle'")
        if self.kind == "symbolic":
            if self.window is None or self.window < 0:
                raise ValueError("symbolic observables need a window >= 0")
            if self.system is None:
                raise ValueError("symbolic observables need a base system")
        else:
            if self.lipschitz is None or self.lipschitz < 0:
                raise ValueError("circle observables need a lipschitz bound >= 0")

    # -- constructors --------------------------------------------------

    @classmethod
    def locally_constant(cls, fn, window: int, system: SymbolicSystem,
                         name: str = "") -> "Observable":
        return cls(fn=fn, kind="symbolic", window=window, system=system, name=name)

    @classmethod
    def circle(cls, fn, lipschitz: float, name: str = "") -> "Observable":
        return cls(fn=fn, kind="circle", lipschitz=lipschitz, name=name)

    @classmethod
    def constant(cls, value: float, system: SymbolicSystem | None = None) -> "Observable":
        if system is None:
            return cls.circle(lambda t: np.full_like(np.asarray(t, float), value)
                              if np.ndim(t) else float(value),
                              lipschitz=0.0, name=f"const({value})")
        return cls.locally_constant(lambda w: value, 0, system, name=f"const({value})")

    @classmethod
    def from_table(cls, table: Mapping, system: SymbolicSystem | None = None,
                   name: str = "table") -> "Observable":
        """Observable from a map word -> value (all keys of one length).

        Keys may be tuples or digit strings.  Without an explicit system the
        full shift on the smallest sufficient alphabet is assumed.
        """
        norm = {}
        for key, val in table.items():
            w = tuple(int(ch) for ch in key) if isinstance(key, str) else tuple(key)
            norm[w] = float(val)
        lengths = {len(w) for w in norm}
        if len(lengths) != 1:
            raise ValueError("table keys must all have the same length")
        window = lengths.pop()
        if system is None:
            k = 1 + max((max(w) for w in norm if w), default=0)
            system = SymbolicSystem.full_shift(max(k, 2))
        for w in word_matrix(system, window):
            if tuple(int(s) for s in w) not in norm:
                raise ValueError(f"table misses admissible window {tuple(w)}")
        return cls.locally_constant(lambda w, _t=norm: _t[tuple(w[:window])],
                                    window, system, name=name)

    @classmethod
    def builtin(cls, name: str, system: SymbolicSystem | None = None) -> "Observable":
        if name == "cos_angle":
            return cls.circle(lambda t: np.cos(2.0 * np.pi * np.asarray(t, float)),
                              lipschitz=2.0 * np.pi, name=name)
        if name == "sin_angle":
            return cls.circle(lambda t: np.sin(2.0 * np.pi * np.asarray(t, float)),
                              lipschitz=2.0 * np.pi, name=name)
        if name == "digit":
            return cls.locally_constant(lambda w: float(w[0]), 1,
                                        system or SymbolicSystem.full_shift(2), name=name)
        if name == "digit_product":
            return cls.locally_constant(lambda w: float(w[0] * w[1]), 2,
                                        system or SymbolicSystem.full_shift(2), name=name)
        raise ValueError(f"unknown builtin observable {name!r}")

    def __call__(self, x):
        if self.kind == "circle":
            t = x.double if isinstance(x, CirclePoint) else x
            return self.fn(t)
        return self.fn(tuple(x))

    def __neg__(self) -> "Observable":
        fn = self.fn
        if self.kind == "circle":
            return Observable.circle(lambda t: -np.asarray(fn(t)) if np.ndim(fn(t)) else -fn(t),
                                     self.lipschitz, name=f"-{self.name}")
        return Observable.locally_constant(lambda w: -fn(w), self.window,
                                           self.system, name=f"-{self.name}")

    def table_by_rank(self) -> np.ndarray:
        """Values on all admissible windows, indexed by lexicographic rank."""
        if self.kind != "symbolic":
            raise TypeError("only symbolic observables have window tables")
        words = word_matrix(self.system, self.window)
        return np.array([float(self.fn(tuple(int(s) for s in row)))
                         for row in words])


def as_observable(spec, system: SymbolicSystem | None = None) -> Observable:
    """Coerce a name, a table mapping, or an Observable into an Observable."""
    if isinstance(spec, Observable):
        return spec
    if isinstance(spec, str):
        return Observable.builtin(spec, system)
    if isinstance(spec, Mapping):
        return Observable.from_table(spec, system)
    raise TypeError(f"cannot interpret {type(spec).__name__} as an observable")


# -- Birkhoff sums -----------------------------------------------------------


def birkhoff_sum(f: Observable, x, n: int) -> float:
    """Sum of f along the first n iterates of x.

    `x` is a word (symbolic observables; must carry n + window - 1 symbols)
    or a CirclePoint (circle observables; iterated by exact doubling).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if isinstance(x, CirclePoint) or isinstance(x, (int, float)):
        if f.kind != "circle":
            raise TypeError("symbolic observable evaluated at a circle point")
        point = x if isinstance(x, CirclePoint) else CirclePoint(x)
        t = point.t
        total = 0.0
        for _ in range(n):
            total += float(f.fn(float(t)))
            t = (2 * t) % 1
        return total
    if f.kind != "symbolic":
        raise TypeError("circle observable evaluated at a word")
    w = tuple(x)
    needed = n + f.window - 1 if f.window >= 1 else 0
    if len(w) < needed:
        raise ContextError(f"word of length {len(w)} cannot support {n} steps "
                           f"of a window-{f.window} observable")
    return float(sum(f.fn(w[i:]) for i in range(n)))


def periodic_average(f: Observable, w: Necklace) -> float:
    """Average of f over the periodic orbit of a necklace.

    Equals the integral of f against the uniform empirical measure of the
    orbit.
    """
    q = w.period
    if f.kind == "circle":
        return float(sum(float(f.fn(p.double)) for p in orbit_angles(w))) / q
    reps = w.symbols * (1 + -(-(max(f.window, 1) + q) // q))
    return float(sum(f.fn(reps[i:]) for i in range(q))) / q


# -- envelope upper bounds ----------------------------------------------------


def locally_constant_sup(system: SymbolicSystem, values_by_rank: np.ndarray,
                         window: int, depth: int) -> float:
    """Exact sup over the shift of the depth-step Birkhoff sum.

    `values_by_rank` holds the observable on admissible `window`-words in
    lexicographic rank order.  Computed by max-plus dynamic programming
    over (window-1)-gram states, cost O(depth * #windows).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if window == 0:
        return depth * float(values_by_rank[0])
    if window == 1:
        vals = np.asarray(values_by_rank, dtype=float)
        k = system.alphabet_size
        cur = vals.copy()
        trans = system.transitions
        for _ in range(depth - 1):
            nxt = np.full(k, -np.inf)
            for b in range(k):
                allowed = np.flatnonzero(trans[b])
                np.maximum.at(nxt, allowed, cur[b] + vals[allowed])
            cur = nxt
        return float(cur.max())
    r = window - 1
    check_budget(count_words(system, window), "envelope state space")
    states = word_matrix(system, r)
    indexer = WordIndexer(system, r)
    widx = WordIndexer(system, window)
    edges_src, edges_dst, edges_w = [], [], []
    k = system.alphabet_size
    for s, row in enumerate(states):
        u = tuple(int(x) for x in row)
        for a in range(k):
            if not system.transitions[u[-1], a]:
                continue
            word = u + (a,)
            edges_src.append(s)
            edges_dst.append(indexer.rank(word[1:]))
            edges_w.append(values_by_rank[widx.rank(word)])
    src = np.array(edges_src)
    dst = np.array(edges_dst)
    wgt = np.array(edges_w, dtype=float)
    val = np.zeros(states.shape[0])
    for _ in range(depth):
        nxt = np.full(states.shape[0], -np.inf)
        np.maximum.at(nxt, dst, val[src] + wgt)
        val = nxt
    return float(val.max())


def dyadic_birkhoff_grid(fns: Sequence[Callable], depth: int,
                         guard_bits: int = GRID_GUARD_BITS) -> np.ndarray:
    """Depth-step Birkhoff sums of circle functions on the dyadic grid.

    Evaluates each function along doubling orbits of all angles j / 2^(depth
    + guard_bits); the grid is forward-invariant, so sums are exact on it.
    Returns an array (grid_size, len(fns)).
    """
    m = 1 << (depth + guard_bits)
    check_budget(m, "dyadic evaluation grid")
    idx = np.arange(m, dtype=np.int64)
    totals = np.zeros((m, len(fns)))
    cur = idx.copy()
    for _ in range(depth):
        ts = cur / m
        for j, fn in enumerate(fns):
            totals[:, j] += np.asarray(fn(ts), dtype=float)
        cur = (cur << 1) % m
    return totals


def circle_sup_bound(f: Observable, depth: int,
                     guard_bits: int = GRID_GUARD_BITS) -> float:
    """Valid upper bound for sup of the depth-step Birkhoff sum of f.

    Grid maximum plus the Lipschitz correction lipschitz * (2^depth - 1) /
    grid_size, which dominates the variation of the sum inside one grid
    cell (step i moves a cell by 2^i of its width).
    """
    totals = dyadic_birkhoff_grid([f.fn], depth, guard_bits)
    corr = f.lipschitz * ((1 << depth) - 1) / (1 << (depth + guard_bits))
    return float(totals[:, 0].max()) + corr


# -- the beta bracket ---------------------------------------------------------


@dataclass(frozen=True)
class BetaBracket:
    """Two-sided enclosure of the maximal ergodic average.

    `lower` is the best periodic average found (attained, with witness);
    `upper` is the depth-step envelope value, a true upper bound (exact for
    locally constant data, Lipschitz-corrected on the circle).
    """

    lower: float
    lower_witness: Necklace | None
    upper: float
    upper_depth: int

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise ValueError(f"bracket inverted: {self.lower} > {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _base_system(f: Observable) -> SymbolicSystem:
    if f.kind == "symbolic":
        return f.system
    return SymbolicSystem.full_shift(2)


def best_periodic(f: Observable, max_period: int,
                  tie_tol: float = 1e-12) -> tuple[float, Necklace]:
    """Best periodic average up to max_period; ties prefer small period, then lex."""
    best, witness = -math.inf, None
    for neck in enumerate_necklaces(_base_system(f), max_period):
        avg = periodic_average(f, neck)
        if avg > best + tie_tol:
            best, witness = avg, neck
        elif avg > best:
            best = avg
    if witness is None:
        raise ValueError("no cyclically admissible necklace within max_period")
    return best, witness


def envelope_upper(f: Observable, depth: int,
                   guard_bits: int = GRID_GUARD_BITS) -> float:
    """Upper envelope value (1/depth) sup of the depth-step Birkhoff sum."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if f.kind == "symbolic":
        return locally_constant_sup(f.system, f.table_by_rank(),
                                    f.window, depth) / depth
    return circle_sup_bound(f, depth, guard_bits) / depth


def beta_bracket(f: Observable, max_period: int, depth: int) -> BetaBracket:
    """Bracket the maximal ergodic average of f.

    Lower bound: maximum of the periodic averages over all necklaces of
    period <= max_period.  Upper bound: envelope value at the given depth.
    The minimal ergodic average is -beta of -f.
    """
    if max_period < 1 or depth < 1:
        raise ValueError("max_period and depth must be >= 1")
    lower, witness = best_periodic(f, max_period)
    upper = envelope_upper(f, depth)
    return BetaBracket(lower, witness, upper, depth)


def smooth(f: Observable, n: int) -> Observable:
    """The n-step time average of f, cohomologous to f.

    The result has the same maximal ergodic average and its sup already
    bounds it at depth one; the window grows by n - 1 (symbolic) or the
    Lipschitz constant becomes lipschitz * (2^n - 1) / n (circle).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return f
    if f.kind == "symbolic":
        fn = f.fn
        return Observable.locally_constant(
            lambda w: sum(fn(w[i:]) for i in range(n)) / n,
            f.window + n - 1, f.system, name=f"avg{n}({f.name})")
    fn = f.fn

    def smoothed(t):
        tt = np.asarray(t, dtype=float)
        total = np.zeros_like(tt)
        for _ in range(n):
            total = total + np.asarray(fn(tt), dtype=float)
            tt = (2.0 * tt) % 1.0
        return total / n

    return Observable.circle(smoothed, f.lipschitz * ((1 << n) - 1) / n,
                             name=f"avg{n}({f.name})")


# -- subactions ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubactionTable:
    """A candidate subaction h on fixed-length windows with its defect.

    The defect is sup over cylinders of (f + h o T - h) - beta_est.  A
    defect <= tol certifies that the maximal ergodic average is at most
    beta_est + tol.  Whenever beta_est does not overshoot the true maximum
    by more than tol, the defect is automatically >= -tol.
    """

    values: dict
    window: int
    defect: float
    beta_est: float
    system: SymbolicSystem = field(repr=False, default=None)

    def certificate_upper_bound(self) -> float:
        return self.beta_est + max(self.defect, 0.0)


def _subaction_edges(f: Observable, window: int):
    """Forward sweep data: states, per-state values of f, and shift edges.

    An edge goes from the window w to each admissible continuation window
    (w shifted by one symbol); the sweep value at w is f(w) plus the best
    table value over its continuations.
    """
    system = f.system
    k = system.alphabet_size
    states = word_matrix(system, window)
    indexer = WordIndexer(system, window)
    fvals = np.array([float(f.fn(tuple(int(x) for x in row))) for row in states])
    srcs, dsts = [], []
    for s, row in enumerate(states):
        w = tuple(int(x) for x in row)
        for a in range(k):
            if not system.transitions[w[-1], a]:
                continue
            srcs.append(s)
            dsts.append(indexer.rank(w[1:] + (a,)))
    return states, fvals, np.array(srcs), np.array(dsts)


def _subaction_defect(f: Observable, h: np.ndarray, window: int,
                      beta_est: float) -> float:
    system = f.system
    check_budget(count_words(system, window + 1), "subaction defect scan")
    words = word_matrix(system, window + 1)
    indexer = WordIndexer(system, window)
    left = indexer.rank_batch(words[:, 1:])
    right = indexer.rank_batch(words[:, :window])
    fvals = np.array([float(f.fn(tuple(int(x) for x in row))) for row in words])
    return float((fvals + h[left] - h[right]).max()) - beta_est


def subaction_iterate(f: Observable, beta_est: float, window: int,
                      iters: int, divergence_tol: float = 1e-9) -> SubactionTable:
    """Iterate the one-step max-plus sweep toward a subaction.

    Each sweep applies (Lh)(x) = f(x) + max over one-symbol continuations
    of h(Tx) - beta_est, keeps the pointwise maximum with the previous
    table (the monotone variant, which settles exactly once every cycle
    weight is nonpositive instead of oscillating around the critical
    cycle), and renormalizes to min h = 0.  A settled table satisfies
    f + h o T - h <= beta_est on every cylinder, so its defect certifies
    the upper bound; when beta_est is below the maximal average the table
    drifts upward at a positive rate, reported as divergence.
    """
    if f.kind != "symbolic":
        raise TypeError("subactions require a locally constant observable")
    if f.window > window:
        raise ValueError("window must be at least the observable window")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    check_budget(count_words(f.system, window + 1), "subaction table")
    states, fvals, src, dst = _subaction_edges(f, window)
    h = np.zeros(states.shape[0])
    shift = 0.0
    half = max(iters // 2, 1)
    top_half = 0.0
    for sweep in range(iters):
        best_next = np.full(states.shape[0], -np.inf)
        np.maximum.at(best_next, src, h[dst])
        nxt = np.maximum(h, fvals + best_next - beta_est)
        offset = float(nxt.min())
        shift += offset
        h = nxt - offset
        if sweep + 1 == half:
            top_half = float(h.max()) + shift
    defect = _subaction_defect(f, h, window, beta_est)
    # a settled table is constant over the back half of the sweeps; growth
    # there means every cycle correction is exhausted by upward drift
    drift = (float(h.max()) + shift - top_half) / max(iters - half, 1)
    if drift > divergence_tol and defect > divergence_tol:
        raise SubactionDivergenceError(
            f"table drifts by {drift:.3g} per sweep with defect {defect:.3g}: "
            f"beta_est={beta_est} is below the maximal average "
            "(or iters is too small to settle)")
    values = {tuple(int(x) for x in row): float(h[i])
              for i, row in enumerate(states)}
    return SubactionTable(values, window, defect, beta_est, f.system)


def fit_subaction(f: Observable, window: int, *, max_period: int = 8,
                  depth: int = 12, iters: int | None = None, rounds: int = 40,
                  tol: float = 1e-10) -> SubactionTable:
    """Bracket the maximal average, then bisect beta_est on the defect sign.

    Starts from the midpoint of the periodic/envelope bracket and returns
    the table of the smallest beta_est whose defect stayed below `tol`.
    """
    if iters is None:
        iters = 2 * count_words(f.system, window) + 16
    bracket = beta_bracket(f, max_period, depth)
    lo, hi = bracket.lower, bracket.upper
    best = subaction_iterate(f, hi, window, iters)
    for _ in range(rounds):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        try:
            table = subaction_iterate(f, mid, window, iters)
        except SubactionDivergenceError:
            lo = mid
            continue
        if table.defect > tol:
            lo = mid
        else:
            hi = mid
            best = table
    return best


def maximizing_set(f: Observable, h: SubactionTable, tol: float) -> set:
    """Cylinders on which the subaction inequality is tight.

    Returns the (window+1)-words where f + h o T - h >= beta_est - tol.
    Every necklace attaining the periodic lower bound has all its windows
    inside the returned cylinder set.
    """
    if h.defect > tol:
        raise ValueError(f"subaction defect {h.defect} exceeds tolerance {tol}")
    system = f.system
    window = h.window
    words = word_matrix(system, window + 1)
    out = set()
    for row in words:
        v = tuple(int(x) for x in row)
        val = float(f.fn(v)) + h.values[v[1:]] - h.values[v[:window]]
        if val >= h.beta_est - tol:
            out.add(v)
    return out
