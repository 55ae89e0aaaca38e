"""Select the kernel backend once, at import.

The compiled extension is used when it was built; ``POLARFOG_PURE=1`` forces
the NumPy fallback (useful for benchmarking and for checking both paths).
"""
import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("POLARFOG_PURE", "") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"

__all__ = ["BACKEND", "kernels"]
