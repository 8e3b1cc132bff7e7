"""Backend selection for the time-tag kernels.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``LNSPDC_PURE_PYTHON`` is set to a non-empty value, the
numpy implementation is used. Both produce identical results.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("LNSPDC_PURE_PYTHON"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py

pair_histogram = _impl.pair_histogram
window_hits = _impl.window_hits


def available_backends() -> dict:
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
