"""Numba switch for the hot kernels.

Every kernel in this package has a numba-compiled loop version and a pure
numpy version. Set ``DISCRETE_BETA_NO_NUMBA=1`` (or leave numba
uninstalled) to force the numpy path.
"""

import os
from typing import Any, Callable

_DISABLED = os.environ.get("DISCRETE_BETA_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by DISCRETE_BETA_NO_NUMBA")
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:
    _numba_njit = None
    HAVE_NUMBA = False


def njit(*args: Any, **kwargs: Any) -> Callable:
    """``numba.njit`` when available, identity decorator otherwise."""
    if _numba_njit is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba_njit(*args, **kwargs)


def use_numba() -> bool:
    return HAVE_NUMBA
