"""Select the compiled kernels when importable, else the numpy fallback.

Set ``EDGEHEALTH_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("EDGEHEALTH_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _fallback
        BACKEND = "python"


def available_backends():
    """Mapping of backend name to kernel module for every importable backend."""
    out = {"python": _fallback}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
