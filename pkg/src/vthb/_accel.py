"""Switch between numba-compiled kernels and their pure-numpy twins.

Set ``VTHB_NUMBA=0`` in the environment before importing :mod:`vthb` to run
every hot loop through the numpy fallback.  Both paths produce the same
results; the fallback exists for debugging, coverage and platforms where
numba is unavailable.
"""

import os

_FLAG = os.environ.get("VTHB_NUMBA", "1").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator.

    Kernels are compiled with ``cache=True`` so repeated test sessions do not
    pay the compilation cost again.
    """
    if _numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)
