"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

The compiled module `ergopt._kernels` accelerates the three kernels that
dominate runtime (word-product enumeration with singular values, the
norm-extreme scan, and batched SPD midpoints).  Everything else always runs
on the numpy backend.  Set ERGOPT_PURE=1 to force the pure-python backend,
e.g. to compare results or benchmark.
"""

from __future__ import annotations

import os

from . import _kernels_py as _py
from ._kernels_py import (  # noqa: F401  (re-exported, numpy-only kernels)
    IndefiniteMatrixError,
    cartan_batch,
    enum_products,
    spd_halves_from_factor,
    spd_power_batch,
    sqrt_polar_batch,
)

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_PURE = os.environ.get("ERGOPT_PURE", "") not in ("", "0")
_ACCEL = _compiled if (_compiled is not None and not _PURE) else None


def backend_name() -> str:
    return "compiled" if _ACCEL is not None else "python"


def _select(name: str):
    if _ACCEL is not None and hasattr(_ACCEL, name):
        return getattr(_ACCEL, name)
    return getattr(_py, name)


_enum_product_cartan = _select("enum_product_cartan")
_scan_norm_extremes = _select("scan_norm_extremes")
_midpoint_batch = _select("midpoint_batch")


def _writable(arr):
    import numpy as np

    out = np.ascontiguousarray(arr, dtype=np.float64)
    if not out.flags.writeable:
        out = out.copy()
    return out


def _prep(mats, trans):
    import numpy as np

    mats = _writable(mats)
    if trans is not None:
        trans = np.ascontiguousarray(trans, dtype=bool)
        if trans.all():
            trans = None
    return mats, trans


def enum_product_cartan(mats, trans, n: int):
    """Cartan vectors of products over all admissible n-words (lex order)."""
    mats, trans = _prep(mats, trans)
    return _enum_product_cartan(mats, trans, n)


def scan_norm_extremes(mats, trans, depth: int):
    """(max log s_1, min log s_d) over all admissible m-words, m = 1..depth."""
    mats, trans = _prep(mats, trans)
    return _scan_norm_extremes(mats, trans, depth)


def midpoint_batch(p, q):
    """Batched SPD geodesic midpoints."""
    return _midpoint_batch(_writable(p), _writable(q))
