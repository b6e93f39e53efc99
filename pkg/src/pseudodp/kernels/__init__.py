"""Hot numeric kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is imported.  Set ``PSEUDODP_PURE_PYTHON=1`` to force the fallback.
``BACKEND`` names the implementation in use.  ``cluster_stats`` always uses
numpy, whose BLAS-backed cross products beat the compiled loop.
"""
import os

from . import _fallback

if os.environ.get("PSEUDODP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _fallback

BACKEND = "cython" if _impl is not _fallback else "python"

colmax_abs = _impl.colmax_abs
sample_labels = _impl.sample_labels
# the numpy version wins here: per-cluster X'WX is a BLAS gemm
cluster_stats = _fallback.cluster_stats
cluster_wrss = _impl.cluster_wrss
mixture_logdens = _impl.mixture_logdens

__all__ = [
    "BACKEND",
    "colmax_abs",
    "sample_labels",
    "cluster_stats",
    "cluster_wrss",
    "mixture_logdens",
]
