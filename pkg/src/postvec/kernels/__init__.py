"""Kernel backend selection.

The hot loops of training (the per-timestep GRU recurrence and its
backward pass) exist twice: a compiled Cython extension
(``postvec.kernels._gru``) and a pure-NumPy fallback with identical
semantics. The compiled backend is preferred when the extension was
built; set ``POSTVEC_KERNELS=numpy`` or ``POSTVEC_KERNELS=cython`` to
force one. ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import numpy_backend

try:
    from . import _gru as _cython_backend
except ImportError:
    _cython_backend = None

_BACKENDS = {"numpy": numpy_backend}
if _cython_backend is not None:
    _BACKENDS["cython"] = _cython_backend


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def _resolve(name: str):
    if name == "auto":
        name = "cython" if "cython" in _BACKENDS else "numpy"
    if name not in _BACKENDS:
        raise ConfigError(
            f"kernel backend {name!r} not available (have: {', '.join(available_backends())})"
        )
    return name


_active = _resolve(os.environ.get("POSTVEC_KERNELS", "auto"))


def active_backend() -> str:
    return _active


def set_backend(name: str) -> str:
    """Select the kernel backend for subsequent calls; returns the old name."""
    global _active
    previous = _active
    _active = _resolve(name)
    return previous


def get_backend(name: str | None = None):
    return _BACKENDS[_resolve(name) if name else _active]


def gru_forward(xp, u_r, u_z, u_h, mask):
    return _BACKENDS[_active].gru_forward(xp, u_r, u_z, u_h, mask)


def gru_backward(d_final, h, r, z, c, u_r, u_z, u_h, mask):
    return _BACKENDS[_active].gru_backward(d_final, h, r, z, c, u_r, u_z, u_h, mask)
