"""Selects the compiled or the pure-Python kernel implementation.

The compiled extension is used whenever it imports. Setting the environment
variable ``APPROXGPDM_BACKEND=python`` forces the fallback, and
:func:`set_backend` switches at runtime (used by the benchmark).
"""
import os

from . import _kernels_py

try:
    from . import _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None

_IMPLS = {"python": _kernels_py}
if _kernels_ext is not None:
    _IMPLS["compiled"] = _kernels_ext


def available_backends():
    return sorted(_IMPLS)


def _default():
    forced = os.environ.get("APPROXGPDM_BACKEND", "").strip().lower()
    if forced:
        if forced not in _IMPLS:
            raise ImportError(
                f"APPROXGPDM_BACKEND={forced!r} requested but only "
                f"{available_backends()} are available"
            )
        return forced
    return "compiled" if "compiled" in _IMPLS else "python"


BACKEND = _default()
impl = _IMPLS[BACKEND]


def set_backend(name):
    """Switch the active kernel implementation; returns the previous name."""
    global BACKEND, impl
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    previous = BACKEND
    BACKEND = name
    impl = _IMPLS[name]
    return previous
