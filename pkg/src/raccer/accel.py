"""JIT toggle for the hot kernels.

All numeric inner loops live in :mod:`raccer.kernels` and are written in
plain nopython-compatible Python. When numba is installed and the
``RACCER_NUMBA`` environment variable is not set to ``0``/``false``/``off``,
they are compiled with ``numba.njit``; otherwise the exact same functions run
interpreted. Both paths produce bit-identical results (the kernels only use
wrap-free int64 and IEEE float64 arithmetic), so the flag trades speed for
an importable-anywhere fallback.

Set ``RACCER_NUMBA=0`` before importing the package to force the fallback.
"""

import os

_FLAG = os.environ.get("RACCER_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "off", "no")

if _WANT_NUMBA:
    try:
        import numba as _numba

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def njit(func):
    """Compile ``func`` with numba when enabled, otherwise return it as-is.

    The undecorated function stays reachable as ``.py_func`` in both modes so
    tests can compare the compiled and interpreted paths directly.
    """
    if NUMBA_ENABLED:
        return _numba.njit(cache=True)(func)
    func.py_func = func
    return func
