"""Kernel backend selection.

The compiled extension is used when it was built; set ``BRIL_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("BRIL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

dbscan_labels = _impl.dbscan_labels
jacobi_eigh = _impl.jacobi_eigh

__all__ = ["BACKEND", "dbscan_labels", "jacobi_eigh"]
