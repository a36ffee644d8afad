"""Full model bundle: encoder plus classifier head plus its tables.

``named_tensors`` fixes the canonical parameter order used everywhere a
flat view is needed (optimizer state, regularization, checkpoint
payload):

    embedding,
    fwd.{w_r,w_z,w_h,u_r,u_z,u_h,b_r,b_z,b_h},
    bwd.{same nine},
    combine.{w_fwd,w_bwd,b},
    softmax.{w,b}
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import layers, objective
from .errors import ConfigError
from .layers import Alphabet, EncoderParams, GruParams, WordVocab
from .objective import SoftmaxParams
from .tensor import SeededRng

MODEL_KINDS = ("char", "word")

_GRU_FIELDS = ("w_r", "w_z", "w_h", "u_r", "u_z", "u_h", "b_r", "b_z", "b_h")


@dataclass
class Model:
    kind: str                       # "char" or "word"
    table: Alphabet | WordVocab
    label_names: list[str]
    encoder: EncoderParams
    softmax: SoftmaxParams

    @property
    def n_labels(self) -> int:
        return self.softmax.n_labels

    def encode_text(self, text: str) -> np.ndarray:
        return self.table.encode(text)

    def validate(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        self.encoder.validate()
        self.softmax.validate()
        if self.encoder.table_size != self.table.size:
            raise ConfigError(
                f"embedding has {self.encoder.table_size} rows but the symbol "
                f"table holds {self.table.size}"
            )
        if len(self.label_names) != self.n_labels:
            raise ConfigError(
                f"softmax has {self.n_labels} labels but {len(self.label_names)} names"
            )


def init_model(kind: str, table, label_names: Sequence[str], embed_dim: int,
               hidden_dim: int, sigma: float, rng: SeededRng) -> Model:
    encoder = layers.init_encoder_params(table.size, embed_dim, hidden_dim, sigma, rng)
    softmax = objective.init_softmax_params(len(label_names), hidden_dim, sigma, rng)
    model = Model(kind=kind, table=table, label_names=list(label_names),
                  encoder=encoder, softmax=softmax)
    model.validate()
    return model


def _named_gru(prefix: str, gp: GruParams):
    for field in _GRU_FIELDS:
        yield f"{prefix}.{field}", getattr(gp, field)


def named_encoder_tensors(p: EncoderParams):
    yield "embedding", p.embedding
    yield from _named_gru("fwd", p.fwd)
    yield from _named_gru("bwd", p.bwd)
    yield "combine.w_fwd", p.w_fwd
    yield "combine.w_bwd", p.w_bwd
    yield "combine.b", p.b_comb


def named_tensors(model: Model):
    """(name, array) pairs in the canonical order."""
    yield from named_encoder_tensors(model.encoder)
    yield "softmax.w", model.softmax.w
    yield "softmax.b", model.softmax.b


def param_count(model: Model) -> int:
    return sum(arr.size for _, arr in named_tensors(model))


def copy_params(model: Model) -> Model:
    """New Model with copied tensors, sharing tables and label names."""
    enc = model.encoder
    gp = lambda g: GruParams(**{f: getattr(g, f).copy() for f in _GRU_FIELDS})
    return Model(
        kind=model.kind,
        table=model.table,
        label_names=model.label_names,
        encoder=EncoderParams(
            embedding=enc.embedding.copy(), fwd=gp(enc.fwd), bwd=gp(enc.bwd),
            w_fwd=enc.w_fwd.copy(), w_bwd=enc.w_bwd.copy(), b_comb=enc.b_comb.copy(),
        ),
        softmax=SoftmaxParams(w=model.softmax.w.copy(), b=model.softmax.b.copy()),
    )


@dataclass
class ForwardResult:
    value: float
    clamped: int
    probs: np.ndarray
    embeddings: np.ndarray
    cache: layers.EncodeCache


def forward_batch(model: Model, seqs: Sequence[np.ndarray], targets: np.ndarray,
                  lam: float) -> ForwardResult:
    e, cache = layers.encode_batch(model.encoder, seqs)
    p = objective.posteriors(model.softmax, e)
    out = objective.loss(p, targets, (a for _, a in named_tensors(model)), lam)
    return ForwardResult(value=out.value, clamped=out.clamped, probs=p,
                         embeddings=e, cache=cache)


def gradients(model: Model, fw: ForwardResult, targets: np.ndarray,
              lam: float) -> dict[str, np.ndarray]:
    """Gradient of the batch loss for every named tensor."""
    _, dw_out, db_out, d_e = objective.loss_grad(
        model.softmax, fw.embeddings, fw.probs, targets, lam)
    enc_grads = layers.encoder_backward(model.encoder, fw.cache, d_e)
    grads = dict(named_encoder_tensors(enc_grads))
    if lam:
        for name, arr in named_encoder_tensors(model.encoder):
            grads[name] = grads[name] + 2.0 * lam * arr
    grads["softmax.w"] = dw_out
    grads["softmax.b"] = db_out
    return grads


def count_params(table_rows: int, embed_dim: int, hidden_dim: int, out_dim: int,
                 n_labels: int) -> int:
    """Closed-form scalar count for the full model.

    embedding + two GRUs (three input matrices, three recurrent matrices,
    three biases each) + combine layer + classifier head.
    """
    gru = 3 * (hidden_dim * embed_dim + hidden_dim * hidden_dim + hidden_dim)
    combine = 2 * out_dim * hidden_dim + out_dim
    head = n_labels * out_dim + n_labels
    return table_rows * embed_dim + 2 * gru + combine + head


def embedding_rows(kind: str, n_symbols: int, mode: str = "actual") -> int:
    """Embedding row count for ``count_params``.

    ``actual`` counts the PAD and UNK rows this implementation allocates.
    ``raw`` is the conventional budget quoted for such models: character
    tables count only the distinct training characters, word tables count
    the V most frequent words plus one UNK row.
    """
    if mode == "actual":
        return n_symbols + layers.N_RESERVED
    if mode == "raw":
        return n_symbols if kind == "char" else n_symbols + 1
    raise ConfigError(f"unknown count mode {mode!r} (expected 'raw' or 'actual')")
