"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
versions are used.  Set ``ESRQC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("ESRQC_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

rotate_pairs = _impl.rotate_pairs
pair_overlap = _impl.pair_overlap

__all__ = ["BACKEND", "rotate_pairs", "pair_overlap"]
