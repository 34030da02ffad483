"""Backend selection for the numeric kernels.

Set ``PICRASP_BACKEND=numpy`` (or ``PICRASP_DISABLE_NUMBA=1``) before import to
force the pure-numpy path. Numba is used whenever it imports cleanly otherwise.
"""
import os

_requested = os.environ.get("PICRASP_BACKEND", "").strip().lower()
_disabled = os.environ.get("PICRASP_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _requested == "numpy" or _disabled:
        raise ImportError("numba disabled by environment")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


BACKEND = "numba" if HAS_NUMBA else "numpy"
