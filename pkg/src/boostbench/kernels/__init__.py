"""Hot-loop kernels with two interchangeable backends.

``numba_backend`` carries @njit-compiled per-tree kernels; ``numpy_backend``
is a pure-numpy fallback with identical semantics.  Selection order:

1. the BOOSTBENCH_BACKEND environment variable ("numba" or "numpy");
2. numba if importable, else numpy.

Both backends accumulate floating-point sums in the same (input-row) order,
so the exact and histogram split paths agree bitwise within a backend.
"""

from __future__ import annotations

import os

from ..errors import ParameterError

_ENV_VAR = "BOOSTBENCH_BACKEND"
_active = None
_active_name = None


def _load(name: str):
    if name == "numpy":
        from . import numpy_backend

        return numpy_backend
    if name == "numba":
        from . import numba_backend

        return numba_backend
    raise ParameterError(f"unknown backend {name!r}; use 'numba' or 'numpy'")


def _initial_choice() -> str:
    env = os.environ.get(_ENV_VAR, "").strip().lower()
    if env in ("numba", "numpy"):
        return env
    if env:
        raise ParameterError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {env!r}")
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


def active():
    """The currently selected backend module."""
    global _active, _active_name
    if _active is None:
        name = _initial_choice()
        _active = _load(name)
        _active_name = name
    return _active


def backend_name() -> str:
    active()
    return _active_name


def set_backend(name: str):
    """Force a backend (mainly for tests and benchmarks)."""
    global _active, _active_name
    _active = _load(name)
    _active_name = name
    return _active


def get_backend(name: str):
    """Load a backend module by name without changing the active one."""
    return _load(name)
