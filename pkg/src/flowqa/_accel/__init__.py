"""Kernel backend selection.

The patch-based flow kernels exist twice: numba-jitted and pure numpy.
Set ``FLOWQA_BACKEND=numpy`` to force the fallback, ``numba`` to require
the jitted path; by default numba is used when importable
(``benchmarks/bench_backends.py`` measures a 10-20x win for the flow
search). Convolution and pooling always use the im2col/BLAS path from
``kernels_numpy`` — it beats the direct-loop numba kernel on every shape
benchmarked; the loop version remains the cross-validation reference.
"""

import os

from flowqa._accel import kernels_numpy as _conv_impl

_CHOICES = ("numba", "numpy")


def _select():
    requested = os.environ.get("FLOWQA_BACKEND", "").strip().lower()
    if requested and requested not in _CHOICES:
        raise ValueError(
            f"FLOWQA_BACKEND must be one of {_CHOICES}, got {requested!r}")
    if requested == "numpy":
        from flowqa._accel import kernels_numpy
        return kernels_numpy, "numpy"
    try:
        from flowqa._accel import kernels_numba
        return kernels_numba, "numba"
    except ImportError:
        if requested == "numba":
            raise
        from flowqa._accel import kernels_numpy
        return kernels_numpy, "numpy"


_impl, BACKEND = _select()

conv2d_nchw = _conv_impl.conv2d_nchw
maxpool2d = _conv_impl.maxpool2d
inverse_search = _impl.inverse_search
densify = _impl.densify
smooth_flow = _impl.smooth_flow

__all__ = [
    "BACKEND",
    "conv2d_nchw",
    "maxpool2d",
    "inverse_search",
    "densify",
    "smooth_flow",
]
