"""Hot per-pixel kernels with a compiled core and a pure-numpy fallback.

The compiled Cython extension and the numpy implementation are required to
produce byte-identical output; both use the same arithmetic expressions and
half-up rounding. Backend selection happens once at import time and can be
forced with the environment variable ``SCALESTAIN_BACKEND=numpy|cython``.
"""

import os

from . import _numpy as _np_backend

_forced = os.environ.get("SCALESTAIN_BACKEND", "").lower()

_impl = None
if _forced != "numpy":
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = None
        if _forced == "cython":
            raise ImportError(
                "SCALESTAIN_BACKEND=cython but the compiled extension is not built"
            )
if _impl is None:
    _impl = _np_backend

BACKEND = "cython" if _impl is not _np_backend else "numpy"

avg_pool2 = _impl.avg_pool2
max_pool2 = _impl.max_pool2
density_u8 = _impl.density_u8
blend_u8 = _impl.blend_u8

numpy_backend = _np_backend


def get_backend(name):
    """Return the kernel module for an explicit backend name (for benchmarks)."""
    if name == "numpy":
        return _np_backend
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
