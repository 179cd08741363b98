"""Conv kernel backend selection.

The compiled extension is used when it built successfully; otherwise the
numpy im2col backend takes over.  ``BAGSELECT_KERNELS=numpy|cython`` forces
a choice (the cython value errors out if the extension is missing).
"""

import os

from . import numpy_backend

_forced = os.environ.get("BAGSELECT_KERNELS", "").lower()

if _forced == "numpy":
    _impl, BACKEND = numpy_backend, "numpy"
else:
    try:
        from . import _convext as _impl
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl, BACKEND = numpy_backend, "numpy"


def conv2d_forward(x, w):
    return _impl.conv2d_forward(x, w)


def conv2d_backward(x, w, gout):
    return _impl.conv2d_backward(x, w, gout)


def get_backend(name):
    """Return a backend module by name, for benchmarks and equivalence tests."""
    if name == "numpy":
        return numpy_backend
    if name == "cython":
        from . import _convext
        return _convext
    raise ValueError(f"unknown kernel backend {name!r}")
