"""Kernel backend chosen at import time.

The compiled extension is preferred; set ``BREATHGA_BACKEND=python`` to force
the numpy fallback (also used automatically when the extension is missing).
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("BREATHGA_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        _impl = _ckernels
        BACKEND = "cython"

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
same_padding = _pykernels.same_padding


def backends():
    """Return every importable kernel module keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        return found
    found["cython"] = _ckernels
    return found
