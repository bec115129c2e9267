"""Optional numba acceleration.

Hot kernels are written once in a numba-compatible subset of Python and
numpy. When numba is importable and ``NMLCLUST_DISABLE_NUMBA`` is unset (or
``0``), ``njit`` compiles them; otherwise it is the identity decorator and the
callers dispatch to their pure-numpy twins instead.
"""

import os

_disabled = os.environ.get("NMLCLUST_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

HAVE_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, else a no-op decorator.

    The undecorated function stays reachable as ``fn.py_func`` in both cases so
    tests and benchmarks can run the interpreted path explicitly.
    """
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)

    def wrap(fn):
        fn.py_func = fn
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return wrap(args[0])
    return wrap


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
