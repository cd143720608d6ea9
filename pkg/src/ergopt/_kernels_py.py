"""Pure-python (vectorized numpy) implementations of the hot kernels.

Same contracts as the compiled extension `ergopt._kernels`; which backend is
used is decided at import time in `ergopt.kernels`.  All word enumerations
are in lexicographic order with products renormalized to unit max-norm at
every step.  Log-determinants are accumulated exactly (one term per factor)
so that the smallest singular value of a long product keeps full relative
accuracy even when the naive determinant of the formed matrix would cancel
catastrophically.
"""

from __future__ import annotations

import numpy as np


class IndefiniteMatrixError(ValueError):
    """A matrix required to be positive-definite is not."""


def _eigh_batch(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched symmetric eigendecomposition, closed form for 2x2."""
    if mats.shape[-1] == 2:
        a = mats[..., 0, 0]
        b = 0.5 * (mats[..., 0, 1] + mats[..., 1, 0])
        c = mats[..., 1, 1]
        half_tr = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        lo = half_tr - rad
        hi = half_tr + rad
        theta = 0.5 * np.arctan2(2.0 * b, a - c)
        cs, sn = np.cos(theta), np.sin(theta)
        vals = np.stack([lo, hi], axis=-1)
        vecs = np.empty(mats.shape, dtype=np.float64)
        # column 0 -> lo, column 1 -> hi
        vecs[..., 0, 0] = -sn
        vecs[..., 1, 0] = cs
        vecs[..., 0, 1] = cs
        vecs[..., 1, 1] = sn
        return vals, vecs
    return np.linalg.eigh(mats)


def spd_power_batch(mats: np.ndarray, s: float) -> np.ndarray:
    """Elementwise matrix power p^s of a batch of SPD matrices.

    Eigenvalues are clamped at 1e-300 before taking logs; genuinely
    nonpositive spectra raise IndefiniteMatrixError.
    """
    mats = np.asarray(mats, dtype=np.float64)
    vals, vecs = _eigh_batch(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    if np.any(vals <= 0.0):
        raise IndefiniteMatrixError("matrix power of a non positive-definite matrix")
    powed = np.exp(s * np.log(np.maximum(vals, 1e-300)))
    out = np.einsum("...ij,...j,...kj->...ik", vecs, powed, vecs)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def midpoint_batch(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Geodesic midpoints p^(1/2) (p^(-1/2) q p^(-1/2))^(1/2) p^(1/2), batched."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    sp = spd_power_batch(p, 0.5)
    isp = spd_power_batch(p, -0.5)
    inner = isp @ q @ isp
    root = spd_power_batch(inner, 0.5)
    out = sp @ root @ sp
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def sqrt_polar_batch(m: np.ndarray) -> np.ndarray:
    """A factor a with a a^T = (m m^T)^(1/2), batched.

    Computed as u diag(sqrt(s)) from the SVD of m, which keeps relative
    accuracy of the small singular values at sqrt of the condition number
    (eigendecomposing m m^T directly would square it).
    """
    m = np.asarray(m, dtype=np.float64)
    u, s, _ = np.linalg.svd(m)
    if np.any(s <= 0.0) or not np.all(np.isfinite(s)):
        raise IndefiniteMatrixError("singular factor in polar square root")
    return u * np.sqrt(s)[..., None, :]


def spd_halves_from_factor(factor: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root of p = factor factor^T.

    Both halves are assembled from the SVD of the factor, so their singular
    values stay relatively accurate up to the factor's condition number.
    """
    factor = np.asarray(factor, dtype=np.float64)
    u, s, _ = np.linalg.svd(factor)
    if np.any(s <= 0.0) or not np.all(np.isfinite(s)):
        raise IndefiniteMatrixError("singular metric factor")
    sqrt = np.einsum("...ij,...j,...kj->...ik", u, s, u)
    isqrt = np.einsum("...ij,...j,...kj->...ik", u, 1.0 / s, u)
    return (0.5 * (sqrt + np.swapaxes(sqrt, -1, -2)),
            0.5 * (isqrt + np.swapaxes(isqrt, -1, -2)))


# -- singular spectra ----------------------------------------------------------


def cartan_batch(mats: np.ndarray, log_abs_det: np.ndarray | None = None,
                 log_scale: np.ndarray | None = None) -> np.ndarray:
    """Log singular values (descending) of each matrix in a batch.

    The represented matrix is exp(log_scale) * m; `log_abs_det` is the log
    absolute determinant of the represented matrix.  When given, the
    smallest singular value is recovered from the determinant identity
    (sum of log singular values = log |det|), keeping it accurate for very
    ill-conditioned products; 2x2 batches then use the stable closed form
    for the top value and never call LAPACK.
    """
    mats = np.asarray(mats, dtype=np.float64)
    d = mats.shape[-1]
    if mats.shape[-1] == 2:
        a, b = mats[..., 0, 0], mats[..., 0, 1]
        c, e = mats[..., 1, 0], mats[..., 1, 1]
        s1 = 0.5 * (np.hypot(a + e, b - c) + np.hypot(a - e, b + c))
        if np.any(s1 <= 0.0) or not np.all(np.isfinite(s1)):
            raise np.linalg.LinAlgError("singular or non-finite matrix in batch")
        top = np.log(s1)
        if log_abs_det is None:
            det = np.abs(a * e - b * c)
            if np.any(det <= 0.0):
                raise np.linalg.LinAlgError("singular matrix in batch")
            logdet = np.log(det)
        else:
            logdet = np.asarray(log_abs_det, dtype=np.float64)
            if log_scale is not None:
                logdet = logdet - 2.0 * np.asarray(log_scale)
        out = np.stack([top, logdet - top], axis=-1)
    else:
        sv = np.linalg.svd(mats, compute_uv=False)
        if np.any(sv <= 0.0) or not np.all(np.isfinite(sv)):
            raise np.linalg.LinAlgError("singular or non-finite matrix in batch")
        out = np.log(sv)
        if log_abs_det is not None:
            logdet = np.asarray(log_abs_det, dtype=np.float64)
            if log_scale is not None:
                logdet = logdet - d * np.asarray(log_scale)
            corrected = logdet - out[..., :-1].sum(axis=-1)
            out[..., -1] = np.minimum(out[..., -2], corrected)
    if log_scale is not None:
        out = out + np.asarray(log_scale)[..., None]
    return out


def _logdets(mats: np.ndarray) -> np.ndarray:
    return np.linalg.slogdet(mats)[1]


def _extend(products, scales, logdets, last, mats, mat_logdets, trans):
    """One enumeration level: append every allowed letter to every word."""
    k = mats.shape[0]
    if trans is None:
        n = products.shape[0]
        parent = np.repeat(np.arange(n), k)
        letter = np.tile(np.arange(k), n)
    else:
        mask = trans[last]                       # (n, k) allowed next letters
        parent = np.repeat(np.arange(products.shape[0]), mask.sum(axis=1))
        letter = np.broadcast_to(np.arange(k), mask.shape)[mask]
    new = mats[letter] @ products[parent]
    norms = np.abs(new).max(axis=(1, 2))
    new /= norms[:, None, None]
    return (new, scales[parent] + np.log(norms),
            logdets[parent] + mat_logdets[letter], letter)


def enum_products(mats: np.ndarray, trans, n: int):
    """Scaled products over all admissible n-words, in lexicographic order.

    Returns (products, log_scales, log_abs_dets): the product over a word w
    is exp(log_scale) * matrix = A[w[n-1]] @ ... @ A[w[0]], each matrix has
    unit max-norm, and log_abs_dets accumulates the factor determinants
    exactly (one summand per step).
    """
    mats = np.asarray(mats, dtype=np.float64)
    k, d = mats.shape[0], mats.shape[1]
    if n == 0:
        return np.eye(d)[None, :, :], np.zeros(1), np.zeros(1)
    mat_logdets = _logdets(mats)
    products = mats.copy()
    norms = np.abs(products).max(axis=(1, 2))
    products /= norms[:, None, None]
    scales = np.log(norms)
    logdets = mat_logdets.copy()
    last = np.arange(k)
    for _ in range(n - 1):
        products, scales, logdets, last = _extend(
            products, scales, logdets, last, mats, mat_logdets, trans)
    return products, scales, logdets


def enum_product_cartan(mats: np.ndarray, trans, n: int) -> np.ndarray:
    """Cartan vectors of the products over all admissible n-words.

    Returns an array (count, d) of log singular values in lexicographic
    word order; `trans` is a (k, k) boolean transition matrix or None for
    the full shift.
    """
    products, scales, logdets = enum_products(mats, trans, n)
    return cartan_batch(products, logdets, scales)


def scan_norm_extremes(mats: np.ndarray, trans, depth: int):
    """Per-length extremes of the singular spectrum over all words.

    For each m = 1..depth returns max over admissible m-words of
    log s_1(product) and min over m-words of log s_d(product), as two
    arrays of length `depth`.
    """
    mats = np.asarray(mats, dtype=np.float64)
    k, d = mats.shape[0], mats.shape[1]
    mat_logdets = _logdets(mats)
    products = mats.copy()
    norms = np.abs(products).max(axis=(1, 2))
    products /= norms[:, None, None]
    scales = np.log(norms)
    logdets = mat_logdets.copy()
    last = np.arange(k)
    max_top = np.empty(depth)
    min_bot = np.empty(depth)
    for m in range(depth):
        if m > 0:
            products, scales, logdets, last = _extend(
                products, scales, logdets, last, mats, mat_logdets, trans)
        logs = cartan_batch(products, logdets, scales)
        max_top[m] = logs[:, 0].max()
        min_bot[m] = logs[:, -1].min()
    return max_top, min_bot
