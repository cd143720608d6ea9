"""Vector-valued Birkhoff optimization.

Rotation sets are approximated from two sides: an inner polytope spanned by
periodic-orbit averages (each vertex keeps its witness necklace) and an
outer envelope stored as a sampled support function, never as an explicit
half-space intersection.  The module also builds the classical rotation set
of the circle inclusion under the doubling map ("the fish", extreme points
carried by Sturmian orbits) and evaluates the homoclinic partial sum whose
nonvanishing obstructs realizing that set by a cohomologous function.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
import numpy as np

from .birkhoff import (
    GRID_GUARD_BITS,
    Observable,
    dyadic_birkhoff_grid,
    locally_constant_sup,
    periodic_average,
)
from .symdyn import Necklace, SymbolicSystem, enumerate_necklaces, is_sturmian, word_matrix

INNER_OUTER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class VectorObservable:
    """A tuple of scalar observables sharing one base system."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("need at least one component")
        kinds = {c.kind for c in comps}
        if len(kinds) != 1:
            raise ValueError("components must share a base (all symbolic or all circle)")
        if comps[0].kind == "symbolic":
            base = comps[0].system
            if any(c.system != base for c in comps):
                raise ValueError("components must share the base system")
        object.__setattr__(self, "components", comps)

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def kind(self) -> str:
        return self.components[0].kind

    @property
    def system(self) -> SymbolicSystem | None:
        return self.components[0].system

    def periodic_average(self, w: Necklace) -> np.ndarray:
        return np.array([periodic_average(c, w) for c in self.components])


def fish_observable() -> VectorObservable:
    """The circle inclusion t -> (cos 2 pi t, sin 2 pi t) under doubling."""
    return VectorObservable((Observable.builtin("cos_angle"),
                             Observable.builtin("sin_angle")))


# -- direction sampling -------------------------------------------------------


def unit_directions(dim: int, count: int) -> np.ndarray:
    """Deterministic unit direction samples: uniform circle / Fibonacci sphere."""
    if count < 4:
        raise ValueError("need at least 4 directions")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        i = np.arange(count)
        z = 1.0 - (2.0 * i + 1.0) / count
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = i * math.pi * (3.0 - math.sqrt(5.0))
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    raise ValueError("automatic direction sampling supports dim <= 3; "
                     "pass explicit unit vectors instead")


def _as_directions(directions, dim: int) -> np.ndarray:
    if isinstance(directions, (int, np.integer)):
        return unit_directions(dim, int(directions))
    arr = np.atleast_2d(np.asarray(directions, dtype=float))
    if arr.shape[1] != dim:
        raise ValueError("direction dimension mismatch")
    return arr


# -- inner approximation ------------------------------------------------------


def _hull_extreme_2d(points: np.ndarray, order: np.ndarray) -> list[int]:
    """Indices of extreme points of the 2D hull (collinear points dropped).

    `order` breaks coordinate ties deterministically (smaller wins).
    """
    idx = sorted(range(len(points)),
                 key=lambda i: (points[i][0], points[i][1], order[i]))
    kept = []
    seen = set()
    for i in idx:
        key = (points[i][0], points[i][1])
        if key in seen:
            continue
        seen.add(key)
        kept.append(i)
    if len(kept) <= 2:
        return kept
    scale = max(1.0, float(np.abs(points).max())) ** 2
    tol = 1e-12 * scale

    def chain(seq):
        out = []
        for i in seq:
            while len(out) >= 2:
                o, a = points[out[-2]], points[out[-1]]
                cross = ((a[0] - o[0]) * (points[i][1] - o[1])
                         - (a[1] - o[1]) * (points[i][0] - o[0]))
                if cross <= tol:  # clockwise or collinear: middle not extreme
                    out.pop()
                else:
                    break
            out.append(i)
        return out

    lower = chain(kept)
    upper = chain(list(reversed(kept)))
    return lower[:-1] + upper[:-1]


def rotation_inner(f: VectorObservable, max_period: int) -> list:
    """Extreme periodic averages with witnesses.

    Computes the vector average of every necklace of period <= max_period
    and keeps the extreme points of their convex hull (exact in dimension
    <= 2, support-sampled reduction above).  Returns [(vector, necklace)].
    """
    system = f.system if f.kind == "symbolic" else SymbolicSystem.full_shift(2)
    necks = enumerate_necklaces(system, max_period)
    points = np.array([f.periodic_average(w) for w in necks])
    d = f.dimension
    if d == 1:
        lo = int(np.argmin(points[:, 0]))
        hi = int(np.argmax(points[:, 0]))
        keep = [hi] if lo == hi else sorted({lo, hi})
    elif d == 2:
        keep = sorted(_hull_extreme_2d(points, np.arange(len(necks))))
    else:
        keep_set = []
        for c in unit_directions(d, max(64, 8 * d)):
            vals = points @ c
            j = int(np.argmax(vals))
            if j not in keep_set:
                keep_set.append(j)
        keep = sorted(keep_set)
    return [(points[i], necks[i]) for i in keep]


# -- outer envelope -----------------------------------------------------------


def rotation_outer(f: VectorObservable, depth: int, directions) -> dict:
    """Sampled support-function upper bounds for the rotation set.

    For each unit direction c the value is (1/depth) sup of the depth-step
    Birkhoff sum of <c, f>: exact via max-plus DP for locally constant
    components, dyadic grid plus Lipschitz correction on the circle.
    Returns {direction tuple: bound}.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    dirs = _as_directions(directions, f.dimension)
    out: dict[tuple, float] = {}
    if f.kind == "symbolic":
        system = f.system
        window = max(max(c.window for c in f.components), 0)
        words = word_matrix(system, window)
        table = np.column_stack([
            [float(c.fn(tuple(int(s) for s in row))) for row in words]
            for c in f.components])
        for c in dirs:
            vals = table @ c
            bound = locally_constant_sup(system, vals, window, depth) / depth
            out[tuple(float(x) for x in c)] = bound
        return out
    totals = dyadic_birkhoff_grid([comp.fn for comp in f.components], depth)
    grid = 1 << (depth + GRID_GUARD_BITS)
    lips = np.array([comp.lipschitz for comp in f.components])
    for c in dirs:
        lip_c = float(np.abs(c) @ lips)
        corr = lip_c * ((1 << depth) - 1) / grid
        bound = (float((totals @ c).max()) + corr) / depth
        out[tuple(float(x) for x in c)] = bound
    return out


# -- two-sided approximation --------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConvexApprox:
    """Inner vertex list and outer sampled support of a convex set.

    Invariant: every inner vertex satisfies every sampled support
    inequality within 1e-9; `hausdorff_gap` is the worst directional gap
    between the two bounds.
    """

    inner_vertices: tuple
    outer_support: dict
    depth: int
    hausdorff_gap: float
    sturmian: tuple | None = None

    def __post_init__(self):
        pts = np.array([v for v, _ in self.inner_vertices])
        for c, bound in self.outer_support.items():
            inner_val = float((pts @ np.asarray(c)).max())
            if inner_val > bound + INNER_OUTER_TOL:
                raise ValueError(
                    f"inner vertex exceeds outer support in direction {c}: "
                    f"{inner_val} > {bound}")

    @classmethod
    def build(cls, inner, outer, depth, sturmian=None) -> "ConvexApprox":
        pts = np.array([v for v, _ in inner])
        gap = max(bound - float((pts @ np.asarray(c)).max())
                  for c, bound in outer.items())
        return cls(tuple((np.asarray(v), w) for v, w in inner), dict(outer),
                   depth, float(gap),
                   tuple(sturmian) if sturmian is not None else None)


def fish_approx(max_period: int, depth: int, directions=64) -> ConvexApprox:
    """Two-sided approximation of the doubling-map rotation set of the circle
    inclusion, with a Sturmian flag for every inner extreme point."""
    if max_period < 1 or depth < 1:
        raise ValueError("arguments must be >= 1")
    f = fish_observable()
    inner = rotation_inner(f, max_period)
    outer = rotation_outer(f, depth, directions)
    flags = [is_sturmian(w) for _, w in inner]
    return ConvexApprox.build(inner, outer, depth, sturmian=flags)


# -- the homoclinic obstruction ----------------------------------------------


@dataclass(frozen=True)
class HomoclinicSum:
    """Partial sum over the homoclinic orbit of the fixed point with tail bound.

    The summands are e^(2 pi i / 2^n) - 1 for n = 1..n_max; the remaining
    tail is at most 2 pi 2^(-n_max) in modulus.  A strictly positive margin
    of Im(partial_sum) over the tail bound certifies that the full series
    is nonzero.
    """

    partial_sum: complex
    tail_bound: float
    n_max: int

    @property
    def nonzero(self) -> bool:
        return self.partial_sum.imag > self.tail_bound


def homoclinic_sum(n_max: int) -> HomoclinicSum:
    """Sum of e^(2 pi i / 2^n) - 1 for n = 1..n_max with its tail bound."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    total = 0j
    for n in range(1, n_max + 1):
        total += cmath.exp(2j * cmath.pi / (1 << n)) - 1.0
    return HomoclinicSum(total, 2.0 * math.pi / (1 << n_max), n_max)


# -- CSV output ---------------------------------------------------------------


def write_vertices_csv(approx: ConvexApprox, path: str) -> None:
    """One row per inner vertex: coordinates, period, word, sturmian flag."""
    dim = len(approx.inner_vertices[0][0]) if approx.inner_vertices else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(dim)]
                        + ["period", "word", "sturmian"])
        for i, (v, w) in enumerate(approx.inner_vertices):
            flag = "" if approx.sturmian is None else str(approx.sturmian[i]).lower()
            writer.writerow([format(float(x), ".17g") for x in v]
                            + [w.period, str(w), flag])


def write_support_csv(approx: ConvexApprox, path: str) -> None:
    """One row per sampled direction: direction components, support bound."""
    dim = len(next(iter(approx.outer_support))) if approx.outer_support else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"c{i + 1}" for i in range(dim)] + ["bound"])
        for c, bound in approx.outer_support.items():
            writer.writerow([format(float(x), ".17g") for x in c]
                            + [format(float(bound), ".17g")])
