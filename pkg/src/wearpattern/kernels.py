"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``WEARPATTERN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("WEARPATTERN_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

# Above this many pairs the numpy version's per-shift matrix products
# (BLAS) beat the compiled loop; see benchmarks/bench_kernels.py.
SBD_COMPILED_MAX_PAIRS = 1500


def sbd_matrix(A, B):
    if _impl is not _pykernels and len(A) * len(B) <= SBD_COMPILED_MAX_PAIRS:
        return _impl.sbd_matrix(A, B)
    return _pykernels.sbd_matrix(A, B)


som_train = _impl.som_train
optics_order = _impl.optics_order


def backends():
    """Map of every importable backend name to its module."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
