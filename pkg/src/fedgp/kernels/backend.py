"""Backend selection for the loop-heavy kernel builders.

Two interchangeable implementations exist: a numba-compiled one (default when
numba imports cleanly) and a pure-numpy one. The environment variable
``FEDGP_BACKEND`` forces the choice: ``numba`` or ``numpy``. It is read at
call time, so tests and benchmarks can flip it without re-importing.

The ARC_COSINE family always runs on a shared numpy path (see _arccos).
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import _numpy_impl

ENV_VAR = "FEDGP_BACKEND"

_IMPLS = {"numpy": _numpy_impl}
_NUMBA_IMPORT_ERROR: str | None = None

try:
    from . import _numba_impl

    _IMPLS["numba"] = _numba_impl
except Exception as _e:  # pragma: no cover - depends on environment
    _NUMBA_IMPORT_ERROR = f"{type(_e).__name__}: {_e}"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPLS))


def numba_import_error() -> str | None:
    """Why the numba backend is unavailable, or None if it loaded."""
    return _NUMBA_IMPORT_ERROR


def active_backend() -> str:
    """Resolve the backend name from the environment (default: numba if present)."""
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice == "":
        return "numba" if "numba" in _IMPLS else "numpy"
    if choice not in ("numba", "numpy"):
        raise ConfigError(f"{ENV_VAR}={choice!r} is not a backend; use 'numba' or 'numpy'")
    if choice == "numba" and "numba" not in _IMPLS:
        raise ConfigError(f"{ENV_VAR}=numba but numba failed to import ({_NUMBA_IMPORT_ERROR})")
    return choice


def impl():
    """The active implementation module."""
    return _IMPLS[active_backend()]
