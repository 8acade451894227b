"""Kernel backend selection.

The compiled extension is used when it imports; setting ``DELTAQ_BACKEND``
to ``python`` forces the numpy fallback.
"""

import contextlib
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_AVAILABLE = {"python": _pykernels}
if _ckernels is not None:
    _AVAILABLE["cython"] = _ckernels


def _initial():
    wanted = os.environ.get("DELTAQ_BACKEND", "").strip().lower()
    if wanted:
        if wanted not in _AVAILABLE:
            raise ImportError(f"DELTAQ_BACKEND={wanted!r} is not available; "
                              f"have {sorted(_AVAILABLE)}")
        return _AVAILABLE[wanted]
    return _ckernels if _ckernels is not None else _pykernels


kernels = _initial()


def available() -> list[str]:
    return sorted(_AVAILABLE)


def current() -> str:
    return kernels.NAME


def set_backend(name: str) -> None:
    global kernels
    try:
        kernels = _AVAILABLE[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}") from None


@contextlib.contextmanager
def using(name: str):
    """Temporarily switch backends (tests and benchmarks)."""
    previous = kernels.NAME
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
