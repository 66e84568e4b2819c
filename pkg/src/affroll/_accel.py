"""JIT switch for the numeric kernels.

Kernels are written once as plain numpy/python functions.  When numba is
importable and ``AFFROLL_DISABLE_JIT`` is unset (or "0"), they are compiled
with ``numba.njit``; otherwise the same source runs interpreted.
"""
import os

_flag = os.environ.get("AFFROLL_DISABLE_JIT", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    JIT_ENABLED = True
except ImportError:
    numba = None
    JIT_ENABLED = False


def maybe_njit(fn=None, cache=True):
    """Compile ``fn`` in nopython mode when the JIT is enabled.

    Functions that take other compiled functions as arguments must pass
    ``cache=False``: numba's on-disk index cannot pickle dispatcher types
    from earlier processes.
    """
    if fn is None:
        return lambda f: maybe_njit(f, cache)
    if JIT_ENABLED:
        return numba.njit(cache=cache, fastmath=False)(fn)
    return fn


def backend_name():
    return "numba" if JIT_ENABLED else "numpy"
