"""Dense linear-algebra substrate for the model.

Matrices are 2-D, C-contiguous ``float64`` NumPy arrays; vectors are 1-D.
All training-time math runs in 64-bit so that finite-difference gradient
checks are meaningful (checkpoints downcast to 32-bit on disk, nothing
else does). Arrays are treated as immutable once handed to another
component; the only sanctioned mutation is the optimizer's in-place
parameter update on tensors it owns.

Randomness comes exclusively from :class:`SeededRng`, a thin wrapper over
NumPy's PCG64 generator. PCG64 has a stable cross-platform stream for a
given seed, so the algorithm id recorded in checkpoints ("pcg64") plus the
seed fully determine every draw.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = [
    "SeededRng",
    "matmul",
    "elementwise",
    "add",
    "sub",
    "hadamard",
    "sigmoid",
    "tanh",
    "gaussian_init",
]


class SeededRng:
    """Deterministic random source (NumPy PCG64 under a fixed 64-bit seed)."""

    ALGORITHM = "pcg64"

    def __init__(self, seed: int):
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, shape, sigma: float = 1.0) -> np.ndarray:
        return self._gen.standard_normal(shape) * sigma

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return np.ascontiguousarray(a)


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}: inner dimensions differ")
    return a @ b


def _check_same_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} requires identical shapes, got {a.shape} and {b.shape}")


def add(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "add")
    return a + b


def sub(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "sub")
    return a - b


def hadamard(a, b) -> np.ndarray:
    """Entrywise product."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "hadamard")
    return a * b


def sigmoid(x) -> np.ndarray:
    """Numerically stable logistic function, sigma(x) = 1 / (1 + exp(-x))."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


_BINARY = {"add": add, "sub": sub, "hadamard": hadamard}
_UNARY = {"sigmoid": sigmoid, "tanh": tanh}


def elementwise(op: str, a, b=None) -> np.ndarray:
    """Dispatch {add, sub, hadamard, sigmoid, tanh} by tag."""
    if op in _BINARY:
        if b is None:
            raise ValueError(f"{op} needs two operands")
        return _BINARY[op](a, b)
    if op in _UNARY:
        if b is not None:
            raise ValueError(f"{op} takes a single operand")
        return _UNARY[op](a)
    raise ValueError(f"unknown elementwise op {op!r}")


def gaussian_init(rows: int, cols: int, sigma: float, rng: SeededRng) -> np.ndarray:
    """Matrix of i.i.d. Normal(0, sigma^2) entries from the seeded stream."""
    if rows < 1 or cols < 1:
        raise ShapeError(f"matrix dimensions must be positive, got {rows}x{cols}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return rng.normal((rows, cols), sigma)
