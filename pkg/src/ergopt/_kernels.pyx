# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Same contracts as `ergopt._kernels_py`: lexicographic word enumeration with
unit max-norm renormalization and exact log-determinant accumulation, plus
batched SPD geodesic midpoints.  Word products run as a depth-first scan
with a stack of partial products, so no intermediate level is materialized.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log, sqrt, hypot, exp
from libc.stdlib cimport free, malloc
from scipy.linalg.cython_lapack cimport dgesvd, dsyev

from ._kernels_py import IndefiniteMatrixError

cnp.import_array()


cdef struct Scratch:
    double *a        # d*d LAPACK buffer
    double *s        # d singular/eigen values
    double *work
    int lwork
    int d


cdef int _scratch_init(Scratch *sc, int d) except -1:
    cdef double query
    cdef int info = 0
    cdef int lwork = -1
    sc.d = d
    sc.a = <double *> malloc(d * d * sizeof(double))
    sc.s = <double *> malloc(d * sizeof(double))
    sc.work = NULL
    if sc.a == NULL or sc.s == NULL:
        raise MemoryError()
    # unreferenced u/vt arguments still get valid pointers
    dgesvd(b"N", b"N", &d, &d, sc.a, &d, sc.s, sc.a, &d, sc.a, &d,
           &query, &lwork, &info)
    sc.lwork = <int> query
    if sc.lwork < 5 * d * d + 10 * d:
        sc.lwork = 5 * d * d + 10 * d
    sc.work = <double *> malloc(sc.lwork * sizeof(double))
    if sc.a == NULL or sc.s == NULL or sc.work == NULL:
        raise MemoryError()
    return 0


cdef void _scratch_free(Scratch *sc) noexcept:
    free(sc.a)
    free(sc.s)
    free(sc.work)


cdef int _singular_values(Scratch *sc, const double *m) except -1:
    """Descending singular values of a d x d row-major matrix into sc.s."""
    cdef int d = sc.d
    cdef int info = 0
    cdef int i
    # singular values are transpose-invariant, so the row-major buffer can
    # be handed to LAPACK as the column-major transpose
    for i in range(d * d):
        sc.a[i] = m[i]
    dgesvd(b"N", b"N", &d, &d, sc.a, &d, sc.s, sc.a, &d, sc.a, &d,
           sc.work, &sc.lwork, &info)
    if info != 0:
        raise np.linalg.LinAlgError("dgesvd failed to converge")
    return 0


cdef inline void _cartan_into(Scratch *sc, const double *m, double scale,
                              double logdet, double *out) except *:
    """Log singular values of exp(scale) * m with determinant correction."""
    cdef int d = sc.d
    cdef double a, b, c, e, s1
    cdef double acc
    cdef int i
    if d == 2:
        a = m[0]; b = m[1]; c = m[2]; e = m[3]
        s1 = 0.5 * (hypot(a + e, b - c) + hypot(a - e, b + c))
        if s1 <= 0.0:
            raise np.linalg.LinAlgError("singular matrix in enumeration")
        out[0] = log(s1) + scale
        out[1] = logdet - out[0]
        return
    _singular_values(sc, m)
    if sc.s[d - 1] <= 0.0:
        raise np.linalg.LinAlgError("singular matrix in enumeration")
    acc = 0.0
    for i in range(d):
        out[i] = log(sc.s[i]) + scale
        if i < d - 1:
            acc += out[i]
    acc = logdet - acc
    if acc < out[d - 2]:
        out[d - 1] = acc
    else:
        out[d - 1] = out[d - 2]


cdef inline void _matmul(int d, const double *a, const double *b,
                         double *out) noexcept:
    cdef int i, j, l
    cdef double acc
    for i in range(d):
        for l in range(d):
            acc = 0.0
            for j in range(d):
                acc += a[i * d + j] * b[j * d + l]
            out[i * d + l] = acc


cdef inline double _renorm(int d, double *m) noexcept:
    cdef double top = 0.0
    cdef int i
    for i in range(d * d):
        if fabs(m[i]) > top:
            top = fabs(m[i])
    for i in range(d * d):
        m[i] /= top
    return log(top)


cdef long _count_words(cnp.uint8_t[:, :] trans, int k, int n):
    cdef long total = 0
    cdef int i, j
    vec = [1] * k
    for _ in range(n - 1):
        vec = [sum(vec[j] if trans[i, j] else 0 for j in range(k))
               for i in range(k)]
    return sum(vec)


def enum_product_cartan(cnp.ndarray[double, ndim=3] mats, trans, int n):
    """Cartan vectors of products over all admissible n-words (lex order)."""
    cdef int k = mats.shape[0]
    cdef int d = mats.shape[1]
    cdef cnp.uint8_t[:, :] tr
    if trans is None:
        tr = np.ones((k, k), dtype=np.uint8)
    else:
        tr = np.ascontiguousarray(trans, dtype=np.uint8)
    if n == 0:
        return np.zeros((1, d))
    cdef long count = _count_words(tr, k, n)
    out_arr = np.empty((count, d))
    cdef double[:, :] out = out_arr
    cdef double[:, :, :] a = np.ascontiguousarray(mats)
    cdef cnp.ndarray[double, ndim=1] mat_logdets = \
        np.linalg.slogdet(np.asarray(mats))[1]
    cdef double[:] mld = mat_logdets

    cdef Scratch sc
    _scratch_init(&sc, d)
    # stack of partial products: level i holds the product of i letters
    cdef double *stack = <double *> malloc((n + 1) * d * d * sizeof(double))
    cdef double *scales = <double *> malloc((n + 1) * sizeof(double))
    cdef double *logdets = <double *> malloc((n + 1) * sizeof(double))
    cdef int *letters = <int *> malloc(n * sizeof(int))
    if stack == NULL or scales == NULL or logdets == NULL or letters == NULL:
        raise MemoryError()
    cdef int i, level, letter, prev
    cdef long row = 0
    try:
        for i in range(d * d):
            stack[i] = 0.0
        for i in range(d):
            stack[i * d + i] = 1.0
        scales[0] = 0.0
        logdets[0] = 0.0
        level = 0
        letters[0] = -1
        while level >= 0:
            letter = letters[level] + 1
            prev = letters[level - 1] if level > 0 else -1
            while letter < k and level > 0 and not tr[prev, letter]:
                letter += 1
            if letter >= k:
                level -= 1
                continue
            letters[level] = letter
            # extend: new product = A[letter] @ current
            _matmul(d, &a[letter, 0, 0], stack + level * d * d,
                    stack + (level + 1) * d * d)
            scales[level + 1] = scales[level] + \
                _renorm(d, stack + (level + 1) * d * d)
            logdets[level + 1] = logdets[level] + mld[letter]
            if level + 1 == n:
                _cartan_into(&sc, stack + n * d * d, scales[n], logdets[n],
                             &out[row, 0])
                row += 1
            else:
                level += 1
                letters[level] = -1
    finally:
        free(stack)
        free(scales)
        free(logdets)
        free(letters)
        _scratch_free(&sc)
    return out_arr


def scan_norm_extremes(cnp.ndarray[double, ndim=3] mats, trans, int depth):
    """(max log s_1, min log s_d) over all admissible m-words, m = 1..depth."""
    cdef int k = mats.shape[0]
    cdef int d = mats.shape[1]
    cdef cnp.uint8_t[:, :] tr
    if trans is None:
        tr = np.ones((k, k), dtype=np.uint8)
    else:
        tr = np.ascontiguousarray(trans, dtype=np.uint8)
    max_top_arr = np.full(depth, -np.inf)
    min_bot_arr = np.full(depth, np.inf)
    cdef double[:] max_top = max_top_arr
    cdef double[:] min_bot = min_bot_arr
    cdef double[:, :, :] a = np.ascontiguousarray(mats)
    cdef cnp.ndarray[double, ndim=1] mat_logdets = \
        np.linalg.slogdet(np.asarray(mats))[1]
    cdef double[:] mld = mat_logdets

    cdef Scratch sc
    _scratch_init(&sc, d)
    cdef double *stack = <double *> malloc((depth + 1) * d * d * sizeof(double))
    cdef double *scales = <double *> malloc((depth + 1) * sizeof(double))
    cdef double *logdets = <double *> malloc((depth + 1) * sizeof(double))
    cdef int *letters = <int *> malloc(depth * sizeof(int))
    cdef double *logs = <double *> malloc(d * sizeof(double))
    if (stack == NULL or scales == NULL or logdets == NULL
            or letters == NULL or logs == NULL):
        raise MemoryError()
    cdef int i, level, letter, prev
    try:
        for i in range(d * d):
            stack[i] = 0.0
        for i in range(d):
            stack[i * d + i] = 1.0
        scales[0] = 0.0
        logdets[0] = 0.0
        level = 0
        letters[0] = -1
        while level >= 0:
            letter = letters[level] + 1
            prev = letters[level - 1] if level > 0 else -1
            while letter < k and level > 0 and not tr[prev, letter]:
                letter += 1
            if letter >= k:
                level -= 1
                continue
            letters[level] = letter
            _matmul(d, &a[letter, 0, 0], stack + level * d * d,
                    stack + (level + 1) * d * d)
            scales[level + 1] = scales[level] + \
                _renorm(d, stack + (level + 1) * d * d)
            logdets[level + 1] = logdets[level] + mld[letter]
            _cartan_into(&sc, stack + (level + 1) * d * d, scales[level + 1],
                         logdets[level + 1], logs)
            if logs[0] > max_top[level]:
                max_top[level] = logs[0]
            if logs[d - 1] < min_bot[level]:
                min_bot[level] = logs[d - 1]
            if level + 1 < depth:
                level += 1
                letters[level] = -1
    finally:
        free(stack)
        free(scales)
        free(logdets)
        free(letters)
        free(logs)
        _scratch_free(&sc)
    return max_top_arr, min_bot_arr


cdef int _sym_eig(int d, const double *m, double *vals, double *vecs,
                  double *work, int lwork) except -1:
    """Ascending eigendecomposition of a symmetric row-major matrix.

    vecs row j (C order) holds the eigenvector of vals[j].
    """
    cdef int info = 0
    cdef int i, j
    cdef double a, b, c, half_tr, rad, theta_c, theta_s, hyp
    if d == 2:
        a = m[0]
        b = 0.5 * (m[1] + m[2])
        c = m[3]
        half_tr = 0.5 * (a + c)
        rad = hypot(0.5 * (a - c), b)
        vals[0] = half_tr - rad
        vals[1] = half_tr + rad
        # rotation angle 0.5 atan2(2b, a-c), without trig calls
        hyp = hypot(2.0 * b, a - c)
        if hyp == 0.0:
            theta_c = 1.0
            theta_s = 0.0
        else:
            theta_c = sqrt(0.5 * (1.0 + (a - c) / hyp))
            theta_s = 0.5 * (2.0 * b / hyp) / theta_c if theta_c > 0.0 \
                else (1.0 if b >= 0.0 else -1.0)
        vecs[0] = -theta_s
        vecs[1] = theta_c
        vecs[2] = theta_c
        vecs[3] = theta_s
        return 0
    for i in range(d):
        for j in range(d):
            vecs[i * d + j] = 0.5 * (m[i * d + j] + m[j * d + i])
    dsyev(b"V", b"U", &d, vecs, &d, vals, work, &lwork, &info)
    if info != 0:
        raise np.linalg.LinAlgError("dsyev failed to converge")
    return 0


cdef void _assemble(int d, const double *vals_fn, const double *vecs,
                    double *out) noexcept:
    """out = sum_j vals_fn[j] * v_j v_j^T with v_j = vecs row j."""
    cdef int i, j, l
    cdef double acc
    for i in range(d):
        for l in range(i, d):
            acc = 0.0
            for j in range(d):
                acc += vals_fn[j] * vecs[j * d + i] * vecs[j * d + l]
            out[i * d + l] = acc
            out[l * d + i] = acc


def midpoint_batch(cnp.ndarray[double, ndim=3] p, cnp.ndarray[double, ndim=3] q):
    """Geodesic midpoints p^(1/2) (p^(-1/2) q p^(-1/2))^(1/2) p^(1/2), batched."""
    cdef int m = p.shape[0]
    cdef int d = p.shape[1]
    if q.shape[0] != m or q.shape[1] != d:
        raise ValueError("shape mismatch")
    out_arr = np.empty((m, d, d))
    cdef double[:, :, :] pv = np.ascontiguousarray(p)
    cdef double[:, :, :] qv = np.ascontiguousarray(q)
    cdef double[:, :, :] out = out_arr
    cdef int lwork = 34 * d
    cdef double *vals = <double *> malloc(d * sizeof(double))
    cdef double *fn = <double *> malloc(d * sizeof(double))
    cdef double *vecs = <double *> malloc(d * d * sizeof(double))
    cdef double *work = <double *> malloc(lwork * sizeof(double))
    cdef double *sp = <double *> malloc(d * d * sizeof(double))
    cdef double *isp = <double *> malloc(d * d * sizeof(double))
    cdef double *tmp = <double *> malloc(d * d * sizeof(double))
    cdef double *inner = <double *> malloc(d * d * sizeof(double))
    if (vals == NULL or fn == NULL or vecs == NULL or work == NULL
            or sp == NULL or isp == NULL or tmp == NULL or inner == NULL):
        raise MemoryError()
    cdef int r, i, r2
    try:
        for r in range(m):
            _sym_eig(d, &pv[r, 0, 0], vals, vecs, work, lwork)
            if vals[0] <= 0.0:
                raise IndefiniteMatrixError(
                    "matrix power of a non positive-definite matrix")
            for i in range(d):
                fn[i] = sqrt(vals[i])
            _assemble(d, fn, vecs, sp)
            for i in range(d):
                fn[i] = 1.0 / fn[i]
            _assemble(d, fn, vecs, isp)
            _matmul(d, isp, &qv[r, 0, 0], tmp)
            _matmul(d, tmp, isp, inner)
            _sym_eig(d, inner, vals, vecs, work, lwork)
            if vals[0] <= 0.0:
                raise IndefiniteMatrixError(
                    "matrix power of a non positive-definite matrix")
            for i in range(d):
                fn[i] = sqrt(vals[i])
            _assemble(d, fn, vecs, inner)
            _matmul(d, sp, inner, tmp)
            _matmul(d, tmp, sp, inner)
            for i in range(d):
                for r2 in range(d):
                    out[r, i, r2] = 0.5 * (inner[i * d + r2] + inner[r2 * d + i])
    finally:
        free(vals)
        free(fn)
        free(vecs)
        free(work)
        free(sp)
        free(isp)
        free(tmp)
        free(inner)
    return out_arr
