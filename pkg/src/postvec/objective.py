"""Softmax posterior over labels and the regularized cross-entropy loss.

The classifier head is a linear layer to L logits followed by a softmax.
Targets are multi-hot rows (one row per example, a 1 at every gold
label, never renormalized), so the loss sums the negative log posterior
over every gold label:

    J = (1/B) * sum_i sum_j -t[i,j] * log p[i,j]  +  lam * ||Theta||^2

where ||Theta||^2 is the sum of squared entries of every learnable
tensor, biases included.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import NumericError, ShapeError
from .tensor import SeededRng, gaussian_init

LOG_CLAMP = 1e-30


@dataclass
class SoftmaxParams:
    w: np.ndarray   # (L, input dim)
    b: np.ndarray   # (L,)

    @property
    def n_labels(self) -> int:
        return self.w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w.shape[1]

    def validate(self) -> None:
        if self.n_labels < 2:
            raise ShapeError("softmax needs at least two labels")
        if self.b.shape != (self.n_labels,):
            raise ShapeError(f"bias must be {(self.n_labels,)}, got {self.b.shape}")


def init_softmax_params(n_labels: int, input_dim: int, sigma: float,
                        rng: SeededRng) -> SoftmaxParams:
    sp = SoftmaxParams(w=gaussian_init(n_labels, input_dim, sigma, rng),
                       b=np.zeros(n_labels))
    sp.validate()
    return sp


def logits(sp: SoftmaxParams, e: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    if e.ndim != 2 or e.shape[1] != sp.input_dim:
        raise ShapeError(f"embeddings must be (B, {sp.input_dim}), got {e.shape}")
    return e @ sp.w.T + sp.b


def posteriors(sp: SoftmaxParams, e: np.ndarray) -> np.ndarray:
    """Row-normalized label probabilities, computed with max subtraction."""
    a = logits(sp, e)
    if not np.isfinite(a).all():
        raise NumericError("non-finite logits in softmax")
    a = a - a.max(axis=1, keepdims=True)
    ex = np.exp(a)
    return ex / ex.sum(axis=1, keepdims=True)


def check_targets(t: np.ndarray, n_labels: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != n_labels:
        raise ShapeError(f"targets must be (B, {n_labels}), got {t.shape}")
    if not np.isin(t, (0.0, 1.0)).all():
        raise ValueError("targets must be binary")
    if (t.sum(axis=1) < 1).any():
        raise ValueError("every target row needs at least one gold label")
    return t


class LossValue(NamedTuple):
    value: float
    clamped: int    # gold positions with posterior below the log clamp


def loss(p: np.ndarray, t: np.ndarray, theta: Iterable[np.ndarray],
         lam: float) -> LossValue:
    """Mean multi-hot cross-entropy plus lam * ||Theta||^2.

    A posterior of zero at a gold position is clamped to ``LOG_CLAMP``
    inside the log and counted, since it signals saturated gates rather
    than a healthy model.
    """
    p = np.asarray(p, dtype=np.float64)
    t = check_targets(t, p.shape[1])
    if p.shape != t.shape:
        raise ShapeError(f"posterior shape {p.shape} != target shape {t.shape}")
    batch = p.shape[0]
    clamped = int(((p <= LOG_CLAMP) & (t > 0)).sum())
    ce = -(t * np.log(np.maximum(p, LOG_CLAMP))).sum() / batch
    reg = lam * sum(float((a * a).sum()) for a in theta)
    return LossValue(value=float(ce + reg), clamped=clamped)


def loss_grad(sp: SoftmaxParams, e: np.ndarray, p: np.ndarray, t: np.ndarray,
              lam: float):
    """Analytic gradients of the loss w.r.t. logits, softmax parameters,
    and the input embeddings.

    For the multi-hot objective the logit gradient is
    (1/B) * (rowsum(t) * p - t); with single-label rows this reduces to
    the familiar (p - t)/B. The regularization contribution 2*lam*theta
    is included for the softmax parameters only; other tensors add their
    own term where their gradients are assembled.
    """
    batch = p.shape[0]
    row_gold = t.sum(axis=1, keepdims=True)
    dlogits = (row_gold * p - t) / batch
    dw = dlogits.T @ e + 2.0 * lam * sp.w
    db = dlogits.sum(axis=0) + 2.0 * lam * sp.b
    de = dlogits @ sp.w
    return dlogits, dw, db, de
