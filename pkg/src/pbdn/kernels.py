"""Backend selection for the count kernels.

The compiled extension is used when it imports; set ``PBDN_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("PBDN_PURE_PYTHON", "") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_c as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

crt_counts = _impl.crt_counts
ztp_inversion = _impl.ztp_inversion
partition_counts = _impl.partition_counts

__all__ = ["BACKEND", "crt_counts", "ztp_inversion", "partition_counts"]
