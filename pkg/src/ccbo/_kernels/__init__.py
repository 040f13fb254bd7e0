"""Backend dispatch for the hot numeric kernels.

Two interchangeable implementations exist: a numba ``@njit`` version and a
pure-numpy fallback.  Selection is controlled by the ``CCBO_BACKEND``
environment variable:

* ``CCBO_BACKEND=numba``  force the compiled kernels (error if numba is missing)
* ``CCBO_BACKEND=numpy``  force the pure-numpy path
* unset / ``auto``        use numba when importable, else numpy

Both backends consume identical pre-generated random streams, so results
agree to floating-point reduction order; within one backend runs are
bit-reproducible.  The compiled kernels only cover objectives with a
registered kernel id; anything else silently uses the numpy path.
"""
from __future__ import annotations

import os

_FORCED: str | None = None
_RESOLVED: str | None = None

FAMILY_CODES = {"monomial": 0, "legendre": 1}

VARIANT_STANDARD = 0
VARIANT_CONTROLLED = 1
VARIANT_CONTROLLED_UNGATED = 2


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def backend_name() -> str:
    """Resolve the active backend once per process (override with set_backend)."""
    global _RESOLVED
    if _FORCED is not None:
        return _FORCED
    if _RESOLVED is None:
        choice = os.environ.get("CCBO_BACKEND", "auto").strip().lower()
        if choice in ("numba", "numpy"):
            if choice == "numba" and not _numba_available():
                raise RuntimeError("CCBO_BACKEND=numba but numba is not importable")
            _RESOLVED = choice
        elif choice in ("", "auto"):
            _RESOLVED = "numba" if _numba_available() else "numpy"
        else:
            raise RuntimeError(f"CCBO_BACKEND={choice!r} not understood (numba|numpy|auto)")
    return _RESOLVED


def set_backend(name: str | None) -> None:
    """Force a backend programmatically (None restores env-based resolution)."""
    global _FORCED, _RESOLVED
    if name is not None and name not in ("numba", "numpy"):
        raise ValueError("backend must be 'numba' or 'numpy'")
    _FORCED = name
    _RESOLVED = None


def active():
    """Return the active kernel implementation module."""
    if backend_name() == "numba":
        from ccbo._kernels import numba_impl
        return numba_impl
    from ccbo._kernels import numpy_impl
    return numpy_impl
