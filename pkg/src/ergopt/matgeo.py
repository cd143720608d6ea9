"""Matrix geometry.

Cartan and Jordan projections into the chamber of weakly decreasing
vectors, the majorization order, Weyl-subgroup hulls over a chamber set,
and the manifold of positive-definite symmetric matrices with its group
action, vector-valued distance, geodesics and midpoints.

Conventions: chamber vectors are logarithmic (log singular values, log
eigenvalue moduli); domination/Theta indices are 1-based, index i naming
the gap between coordinates i and i+1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .kernels import IndefiniteMatrixError, spd_power_batch

MAJORIZATION_TOL = 1e-9


class SingularMatrixError(ValueError):
    """Input matrix is singular or non-finite where invertibility is required."""


# -- chamber vectors ---------------------------------------------------------


@dataclass(frozen=True, order=True)
class ChamberVector:
    """A weakly decreasing real vector (a point of the positive chamber).

    Construction tolerates disorder up to 1e-12 and then sorts exactly, so
    stored entries are canonically non-increasing.
    """

    entries: tuple

    def __post_init__(self):
        e = tuple(float(x) for x in self.entries)
        if len(e) == 0:
            raise ValueError("chamber vector must have dimension >= 1")
        if not all(np.isfinite(e)):
            raise ValueError("chamber vector entries must be finite")
        for a, b in zip(e, e[1:]):
            if b > a + 1e-12:
                raise ValueError(f"entries {e} are not weakly decreasing")
        object.__setattr__(self, "entries", tuple(sorted(e, reverse=True)))

    @classmethod
    def from_array(cls, arr) -> "ChamberVector":
        return cls(tuple(np.asarray(arr, dtype=float).ravel()))

    @property
    def values(self) -> np.ndarray:
        return np.array(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def total(self) -> float:
        return float(sum(self.entries))


def opposition(xi: ChamberVector | Sequence[float]) -> ChamberVector:
    """The opposition involution (x_1..x_d) -> (-x_d..-x_1)."""
    e = tuple(xi.entries if isinstance(xi, ChamberVector) else xi)
    return ChamberVector(tuple(-x for x in reversed(e)))


def _as_rows(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        arr = np.atleast_2d(np.asarray(points, dtype=float))
    else:
        rows = [p.values if isinstance(p, ChamberVector) else np.asarray(p, float)
                for p in points]
        arr = np.atleast_2d(np.array(rows, dtype=float))
    return arr


# -- projections -------------------------------------------------------------


def _check_invertible_input(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(g)):
        raise SingularMatrixError("matrix has non-finite entries")
    return g


def _sym_moduli(g: np.ndarray) -> np.ndarray:
    """Descending eigenvalue moduli of a symmetric matrix, det-corrected.

    Positive-definite input goes through its Cholesky factor (squared
    singular values), which keeps small eigenvalues accurate at the square
    root of the condition number.
    """
    try:
        chol = np.linalg.cholesky(g)
        sv = np.linalg.svd(chol, compute_uv=False)
        mods = sv * sv
    except np.linalg.LinAlgError:
        mods = np.sort(np.abs(np.linalg.eigvalsh(g)))[::-1]
    return mods


def cartan(g) -> ChamberVector:
    """Log singular values of an invertible matrix, descending.

    For symmetric input the singular values are eigenvalue moduli and are
    computed by the symmetric path, which is more accurate for
    ill-conditioned positive matrices.
    """
    g = _check_invertible_input(g)
    scale = max(1.0, float(np.abs(g).max()))
    if np.abs(g - g.T).max() <= 1e-12 * scale:
        sv = _sym_moduli(0.5 * (g + g.T))
        if sv[-1] <= 1e-300 or sv[0] <= 0.0:
            raise SingularMatrixError("matrix is singular within tolerance")
        logs = np.log(sv)
        if len(logs) > 1:
            corrected = float(np.linalg.slogdet(g)[1]) - logs[:-1].sum()
            logs[-1] = min(logs[-2], corrected)
        return ChamberVector.from_array(logs)
    sv = np.linalg.svd(g, compute_uv=False)
    if sv[-1] <= 1e-300:
        raise SingularMatrixError("matrix is singular within tolerance")
    return ChamberVector.from_array(np.log(sv))


def jordan(g) -> ChamberVector:
    """Log moduli of the eigenvalues of an invertible matrix, descending.

    Symmetric input is routed through the symmetric eigensolver, and the
    smallest modulus is recovered from the determinant (the moduli multiply
    to |det|), which keeps it accurate for ill-conditioned matrices.
    """
    g = _check_invertible_input(g)
    scale = max(1.0, float(np.abs(g).max()))
    if np.abs(g - g.T).max() <= 1e-12 * scale:
        mods = _sym_moduli(0.5 * (g + g.T))
    else:
        mods = np.sort(np.abs(np.linalg.eigvals(g)))[::-1]
    if mods[-1] <= 1e-300 or mods[0] <= 0.0:
        raise SingularMatrixError("matrix is singular within tolerance")
    logs = np.log(mods)
    if len(logs) > 1:
        corrected = float(np.linalg.slogdet(g)[1]) - logs[:-1].sum()
        logs[-1] = min(logs[-2], corrected)
    return ChamberVector.from_array(logs)


# -- majorization ------------------------------------------------------------


def majorization_slack(eta, xi) -> float:
    """Worst slack of the prefix-sum inequalities certifying xi majorized by eta.

    The value is the minimum of the prefix-sum slacks
    (eta_1+..+eta_i) - (xi_1+..+xi_i), i < d, and of -(total mismatch);
    the total-sum term keeps it <= 0, and the majorization holds within
    `tol` exactly when the slack is >= -tol.
    """
    a = np.sort(_as_rows([xi])[0])[::-1]
    b = np.sort(_as_rows([eta])[0])[::-1]
    if a.shape != b.shape:
        raise ValueError("dimension mismatch in majorization test")
    ca, cb = np.cumsum(a), np.cumsum(b)
    total = -abs(cb[-1] - ca[-1])
    if len(a) == 1:
        return float(total)
    return float(min((cb[:-1] - ca[:-1]).min(), total))


def majorizes(eta, xi, tol: float = MAJORIZATION_TOL) -> bool:
    """True when xi is majorized by eta (prefix sums within `tol`)."""
    return majorization_slack(eta, xi) >= -tol


def majorization_slack_rows(eta_rows: np.ndarray, xi_rows: np.ndarray) -> np.ndarray:
    """Row-wise majorization slacks for two stacks of chamber vectors.

    Rows must already be weakly decreasing; returns one slack per row pair
    (same semantics as `majorization_slack`).
    """
    a = np.cumsum(np.asarray(xi_rows, dtype=float), axis=1)
    b = np.cumsum(np.asarray(eta_rows, dtype=float), axis=1)
    if a.shape != b.shape:
        raise ValueError("shape mismatch in majorization test")
    total = -np.abs(b[:, -1] - a[:, -1])
    if a.shape[1] == 1:
        return total
    return np.minimum((b[:, :-1] - a[:, :-1]).min(axis=1), total)


# -- Theta sets and Weyl-subgroup hulls ---------------------------------------


@dataclass(frozen=True)
class ThetaSet:
    """A set of gap indices in {1, .., d-1}.

    In spectrum computations Theta collects the indices *without* a
    domination verdict; the Weyl subgroup W_Theta is generated by the
    adjacent transpositions at the listed indices.
    """

    indices: frozenset
    dim: int

    def __post_init__(self):
        idx = frozenset(int(i) for i in self.indices)
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        for i in idx:
            if not 1 <= i <= self.dim - 1:
                raise ValueError(f"index {i} outside 1..{self.dim - 1}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def empty(cls, dim: int) -> "ThetaSet":
        return cls(frozenset(), dim)

    @classmethod
    def full(cls, dim: int) -> "ThetaSet":
        return cls(frozenset(range(1, dim)), dim)

    @classmethod
    def of(cls, indices: Iterable[int], dim: int) -> "ThetaSet":
        return cls(frozenset(indices), dim)

    def blocks(self) -> list[slice]:
        """Consecutive coordinate blocks permuted freely by W_Theta (0-based)."""
        out, start = [], 0
        for i in range(1, self.dim):
            if i not in self.indices:
                out.append(slice(start, i))
                start = i
        out.append(slice(start, self.dim))
        return out

    def sorted_indices(self) -> list[int]:
        return sorted(self.indices)


def theta_supports(points, theta: ThetaSet, direction) -> np.ndarray:
    """Per-point support values sup over W_Theta-orbit of <c, w.point>.

    Points must lie in the chamber (weakly decreasing within 1e-9).  Within
    each block of consecutive coordinates joined by Theta the maximum over
    permutations pairs coordinates in decreasing order.
    """
    arr = _as_rows(points)
    if arr.shape[1] != theta.dim:
        raise ValueError("dimension mismatch between points and Theta")
    if np.any(arr[:, 1:] > arr[:, :-1] + 1e-9):
        raise ValueError("point outside the chamber")
    c = np.asarray(direction, dtype=float).ravel()
    if c.shape[0] != theta.dim:
        raise ValueError("direction dimension mismatch")
    out = np.zeros(arr.shape[0])
    for blk in theta.blocks():
        cb = np.sort(c[blk])[::-1]
        out += arr[:, blk] @ cb
    return out


def theta_hull_support(points, theta: ThetaSet, direction) -> float:
    """Support function of the W_Theta-orbit hull of a chamber set.

    Computes sup <c, .> over co(W_Theta . points).  With Theta empty this
    is the plain support of the points; with Theta full it is the support
    of the symmetrized (permutohedron) hull.
    """
    return float(theta_supports(points, theta, direction).max())


# -- the positive-definite manifold -------------------------------------------


@dataclass(frozen=True, eq=False)
class SpdPoint:
    """A positive-definite symmetric matrix standing for an inner product.

    A point may carry a factor with matrix = factor @ factor.T (e.g. the
    group element that produced it); geometric operations then work on the
    factor, which keeps strongly anisotropic inner products accurate.
    Points built from a bare matrix get an eigendecomposition-based factor
    on first use.
    """

    matrix: np.ndarray
    factor: np.ndarray | None = None

    def __post_init__(self):
        if self.factor is not None:
            f = np.asarray(self.factor, dtype=float)
            if f.ndim != 2 or f.shape[0] != f.shape[1]:
                raise ValueError("factor must be square")
            if not np.all(np.isfinite(f)) or np.linalg.det(f) == 0.0:
                raise IndefiniteMatrixError("factor must be invertible")
            f.setflags(write=False)
            m = f @ f.T
            m = 0.5 * (m + m.T)
            m.setflags(write=False)
            object.__setattr__(self, "factor", f)
            object.__setattr__(self, "matrix", m)
            return
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("expected a square matrix")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ValueError("matrix is not symmetric within tolerance")
        m = 0.5 * (m + m.T)
        if np.linalg.eigvalsh(m)[0] <= 0.0:
            raise IndefiniteMatrixError("matrix is not positive-definite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, d: int) -> "SpdPoint":
        return cls(np.eye(d), np.eye(d))

    @classmethod
    def from_factor(cls, factor) -> "SpdPoint":
        factor = np.asarray(factor, dtype=float)
        return cls(factor @ factor.T, factor)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _factor(self) -> np.ndarray:
        if self.factor is not None:
            return self.factor
        f = spd_power_batch(self.matrix[None], 0.5)[0]
        object.__setattr__(self, "factor", f)
        return f

    def power(self, s: float) -> "SpdPoint":
        u, sv, _ = np.linalg.svd(self._factor())
        return SpdPoint.from_factor(u * np.exp(s * np.log(sv)))

    def sqrt(self) -> "SpdPoint":
        u, sv, _ = np.linalg.svd(self._factor())
        half = np.einsum("ij,j,kj->ik", u, sv, u)
        return SpdPoint(0.5 * (half + half.T), u * sv)

    def inv_sqrt(self) -> "SpdPoint":
        u, sv, _ = np.linalg.svd(self._factor())
        half = np.einsum("ij,j,kj->ik", u, 1.0 / sv, u)
        return SpdPoint(0.5 * (half + half.T), u / sv)


def act(g, p: SpdPoint | np.ndarray) -> SpdPoint:
    """Group action g * p = g p g^T on inner products."""
    g = np.asarray(g, dtype=float)
    if isinstance(p, SpdPoint):
        return SpdPoint.from_factor(g @ p._factor())
    out = g @ np.asarray(p, dtype=float) @ g.T
    return SpdPoint(0.5 * (out + out.T))


def vdist(p: SpdPoint, q: SpdPoint) -> ChamberVector:
    """Vector-valued distance 2 sigma(p^(-1/2) q^(1/2)) on the SPD manifold.

    Its euclidean norm is the usual affine-invariant distance; the vector
    itself is a complete congruence invariant of the ordered pair.
    Evaluated through the factors of p and q (twice the log singular values
    of factor(p)^(-1) factor(q), an orthogonal-invariant rewriting of the
    defining formula).
    """
    rel = np.linalg.solve(p._factor(), q._factor())
    sv = np.linalg.svd(rel, compute_uv=False)
    if sv[-1] <= 0.0 or not np.all(np.isfinite(sv)):
        raise SingularMatrixError("indefinite input to the vector distance")
    return ChamberVector.from_array(2.0 * np.log(sv))


def geodesic(p: SpdPoint, q: SpdPoint, s: float) -> SpdPoint:
    """Point at parameter s on the geodesic from p to q.

    Equivariant extension of s -> q^s from the base point; satisfies
    vdist(f(t), f(s)) = (s - t) vdist(p, q) for t <= s.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("geodesic parameter must lie in [0, 1]")
    pf = p._factor()
    rel = np.linalg.solve(pf, q._factor())
    u, sv, _ = np.linalg.svd(rel)
    return SpdPoint.from_factor(pf @ (u * np.exp(s * np.log(sv))))


def midpoint(p: SpdPoint, q: SpdPoint) -> SpdPoint:
    """Geodesic midpoint of p and q (the geometric mean)."""
    return geodesic(p, q, 0.5)
