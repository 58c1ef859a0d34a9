"""Backend selection for the scoring kernel.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy version in ``_kernels_py``. Set ``GRDSIM_PURE_PYTHON=1`` to force
the fallback. Both return identical integers.

``pair_counts(t, members)`` takes a flattened sample of ``n`` cells and an
``(m, n)`` stack of flattened members, and returns an ``(m, 7)`` int64
array with the columns below.
"""
import os

import numpy as np

from . import _kernels_py

INTER = 0  # cells nonzero in both
UNION = 1  # cells nonzero in either
ABSDIFF = 2  # sum |t - m|
TOTAL = 3  # sum (t + m)
SIGNED = 4  # sum (t - m)
DOT = 5  # sum t * m
SUMSQ_M = 6  # sum m * m

if os.environ.get("GRDSIM_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"


def pair_counts(t, members, impl=None) -> np.ndarray:
    impl = impl or _impl
    t = np.ascontiguousarray(t, dtype=np.int64).ravel()
    members = np.ascontiguousarray(members, dtype=np.int64)
    if members.ndim == 3:
        members = members.reshape(members.shape[0], -1)
    return impl.pair_counts(t, members)


def available_backends() -> dict:
    backends = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        backends["cython"] = _kernels
    return backends
