"""Symbol tables, the GRU cell, and the bidirectional sequence encoder.

A post is encoded as a sequence of symbol indices (characters or
whitespace tokens, depending on the front-end), looked up in an
embedding table, and run through a forward GRU and a backward GRU. The
two final states are combined by a fully-connected layer into one fixed
width vector:

    e = W_f @ h_final_forward + W_b @ h_final_backward + b

Index 0 is padding and index 1 the unknown symbol in every table; both
are real embedding rows so table size is the number of distinct symbols
plus two.

Encoded sequences are plain 1-D int64 arrays. Batched encoding pads on
the right and masks padded steps so that batch results match per-example
results; the per-step math lives in :mod:`postvec.kernels`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels, tensor
from .errors import ShapeError
from .tensor import SeededRng

PAD_INDEX = 0
UNK_INDEX = 1
N_RESERVED = 2


class Alphabet:
    """Bidirectional character/index map with reserved PAD and UNK slots."""

    def __init__(self, chars: Sequence[str]):
        if len(set(chars)) != len(chars):
            raise ValueError("duplicate characters in alphabet")
        self.chars = list(chars)
        self._index = {ch: i + N_RESERVED for i, ch in enumerate(self.chars)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Alphabet":
        """Collect distinct characters in first-occurrence order."""
        seen: dict[str, None] = {}
        for text in texts:
            for ch in text:
                seen.setdefault(ch, None)
        return cls(list(seen))

    @property
    def size(self) -> int:
        return len(self.chars) + N_RESERVED

    def index_of(self, ch: str) -> int:
        return self._index.get(ch, UNK_INDEX)

    def encode(self, text: str) -> np.ndarray:
        return np.fromiter((self._index.get(ch, UNK_INDEX) for ch in text),
                           dtype=np.int64, count=len(text))

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.chars == other.chars

    def __repr__(self):
        return f"Alphabet(size={self.size})"


class WordVocab:
    """Top-V whitespace-token vocabulary; everything else maps to UNK."""

    def __init__(self, words: Sequence[str]):
        if len(set(words)) != len(words):
            raise ValueError("duplicate words in vocabulary")
        self.words = list(words)
        self._index = {w: i + N_RESERVED for i, w in enumerate(self.words)}

    @classmethod
    def from_texts(cls, texts: Iterable[str], max_size: int = 20000) -> "WordVocab":
        """Keep the max_size most frequent tokens, ties broken lexicographically."""
        counts = Counter()
        for text in texts:
            counts.update(text.split())
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([w for w, _ in ranked[:max_size]])

    @property
    def size(self) -> int:
        return len(self.words) + N_RESERVED

    def index_of(self, word: str) -> int:
        return self._index.get(word, UNK_INDEX)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def encode(self, text: str) -> np.ndarray:
        toks = text.split()
        return np.fromiter((self._index.get(w, UNK_INDEX) for w in toks),
                           dtype=np.int64, count=len(toks))

    def __eq__(self, other):
        return isinstance(other, WordVocab) and self.words == other.words

    def __repr__(self):
        return f"WordVocab(size={self.size})"


@dataclass
class GruParams:
    """One direction's parameters: W_* project the input, U_* the state."""

    w_r: np.ndarray
    w_z: np.ndarray
    w_h: np.ndarray
    u_r: np.ndarray
    u_z: np.ndarray
    u_h: np.ndarray
    b_r: np.ndarray
    b_z: np.ndarray
    b_h: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.w_r.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_r.shape[1]

    def validate(self) -> None:
        h, d = self.hidden_dim, self.input_dim
        for name in ("w_r", "w_z", "w_h"):
            if getattr(self, name).shape != (h, d):
                raise ShapeError(f"{name} must be {(h, d)}, got {getattr(self, name).shape}")
        for name in ("u_r", "u_z", "u_h"):
            if getattr(self, name).shape != (h, h):
                raise ShapeError(f"{name} must be {(h, h)}, got {getattr(self, name).shape}")
        for name in ("b_r", "b_z", "b_h"):
            if getattr(self, name).shape != (h,):
                raise ShapeError(f"{name} must be {(h,)}, got {getattr(self, name).shape}")


@dataclass
class EncoderParams:
    """Embedding table, both GRU directions, and the combining layer."""

    embedding: np.ndarray   # (table size, embed dim)
    fwd: GruParams
    bwd: GruParams
    w_fwd: np.ndarray       # (out dim, hidden dim)
    w_bwd: np.ndarray
    b_comb: np.ndarray      # (out dim,)

    @property
    def table_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.fwd.hidden_dim

    @property
    def out_dim(self) -> int:
        return self.w_fwd.shape[0]

    def validate(self) -> None:
        self.fwd.validate()
        self.bwd.validate()
        h = self.hidden_dim
        if self.bwd.hidden_dim != h or self.fwd.input_dim != self.embed_dim \
                or self.bwd.input_dim != self.embed_dim:
            raise ShapeError("forward/backward GRU shapes disagree with the embedding")
        if self.out_dim != h:
            raise ShapeError(
                f"output dim {self.out_dim} must equal hidden dim {h}"
            )
        if self.w_fwd.shape != (self.out_dim, h) or self.w_bwd.shape != (self.out_dim, h):
            raise ShapeError("combine layer shapes inconsistent")
        if self.b_comb.shape != (self.out_dim,):
            raise ShapeError("combine bias shape inconsistent")


def init_gru_params(input_dim: int, hidden_dim: int, sigma: float, rng: SeededRng) -> GruParams:
    """Gaussian weights, zero biases."""
    g = lambda r, c: tensor.gaussian_init(r, c, sigma, rng)
    return GruParams(
        w_r=g(hidden_dim, input_dim), w_z=g(hidden_dim, input_dim), w_h=g(hidden_dim, input_dim),
        u_r=g(hidden_dim, hidden_dim), u_z=g(hidden_dim, hidden_dim), u_h=g(hidden_dim, hidden_dim),
        b_r=np.zeros(hidden_dim), b_z=np.zeros(hidden_dim), b_h=np.zeros(hidden_dim),
    )


def init_encoder_params(table_size: int, embed_dim: int, hidden_dim: int,
                        sigma: float, rng: SeededRng) -> EncoderParams:
    params = EncoderParams(
        embedding=tensor.gaussian_init(table_size, embed_dim, sigma, rng),
        fwd=init_gru_params(embed_dim, hidden_dim, sigma, rng),
        bwd=init_gru_params(embed_dim, hidden_dim, sigma, rng),
        w_fwd=tensor.gaussian_init(hidden_dim, hidden_dim, sigma, rng),
        w_bwd=tensor.gaussian_init(hidden_dim, hidden_dim, sigma, rng),
        b_comb=np.zeros(hidden_dim),
    )
    params.validate()
    return params


def lookup(embedding: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Embedding rows for a sequence of symbol indices."""
    indices = np.asarray(indices)
    bad = np.nonzero((indices < 0) | (indices >= embedding.shape[0]))[0]
    if bad.size:
        pos = int(bad[0])
        raise IndexError(
            f"symbol index {int(indices[pos])} at position {pos} is outside the "
            f"table of {embedding.shape[0]} rows"
        )
    return embedding[indices]


def gru_step(p: GruParams, x_t: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """One recurrence step on single vectors (the batched path is in kernels)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x_t.shape != (p.input_dim,) or h_prev.shape != (p.hidden_dim,):
        raise ShapeError(
            f"expected input {(p.input_dim,)} and state {(p.hidden_dim,)}, "
            f"got {x_t.shape} and {h_prev.shape}"
        )
    r = tensor.sigmoid(p.w_r @ x_t + p.u_r @ h_prev + p.b_r)
    z = tensor.sigmoid(p.w_z @ x_t + p.u_z @ h_prev + p.b_z)
    c = tensor.tanh(p.w_h @ x_t + p.u_h @ (r * h_prev) + p.b_h)
    return (1.0 - z) * h_prev + z * c


def encode(p: EncoderParams, indices: np.ndarray) -> np.ndarray:
    """Encode one sequence by direct unrolling (initial states are zero)."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1 or indices.size == 0:
        raise ShapeError("sequence must be a nonempty 1-D index array")
    xs = lookup(p.embedding, indices)
    h_f = np.zeros(p.hidden_dim)
    for t in range(len(indices)):
        h_f = gru_step(p.fwd, xs[t], h_f)
    h_b = np.zeros(p.hidden_dim)
    for t in range(len(indices) - 1, -1, -1):
        h_b = gru_step(p.bwd, xs[t], h_b)
    return p.w_fwd @ h_f + p.w_bwd @ h_b + p.b_comb


@dataclass
class DirectionCache:
    indices: np.ndarray     # (B, T) padded symbol indices this direction saw
    h: np.ndarray
    r: np.ndarray
    z: np.ndarray
    c: np.ndarray
    final: np.ndarray       # (B, H)


@dataclass
class EncodeCache:
    """Everything the backward pass needs from one batched forward pass."""

    mask: np.ndarray
    fwd: DirectionCache
    bwd: DirectionCache


def pad_batch(seqs: Sequence[np.ndarray]):
    """Right-pad to the batch maximum; also build the reversed view.

    Returns (indices, reversed indices, mask), each (B, T). Reversal flips
    each sequence's real prefix and keeps padding on the right, so one
    mask serves both directions.
    """
    if len(seqs) == 0:
        raise ShapeError("batch must be nonempty")
    lengths = [len(s) for s in seqs]
    if min(lengths) == 0:
        raise ShapeError("batch contains an empty sequence")
    batch, steps = len(seqs), max(lengths)
    idx = np.full((batch, steps), PAD_INDEX, dtype=np.int64)
    idx_rev = np.full((batch, steps), PAD_INDEX, dtype=np.int64)
    mask = np.zeros((batch, steps))
    for i, s in enumerate(seqs):
        m = lengths[i]
        idx[i, :m] = s
        idx_rev[i, :m] = s[::-1]
        mask[i, :m] = 1.0
    return idx, idx_rev, mask


def _input_projections(gp: GruParams, x: np.ndarray) -> np.ndarray:
    batch, steps, dim = x.shape
    w_all = np.vstack([gp.w_r, gp.w_z, gp.w_h])
    b_all = np.concatenate([gp.b_r, gp.b_z, gp.b_h])
    xp = x.reshape(batch * steps, dim) @ w_all.T + b_all
    return np.ascontiguousarray(xp.reshape(batch, steps, 3 * gp.hidden_dim))


def _run_direction(gp: GruParams, embedding: np.ndarray, idx: np.ndarray,
                   mask: np.ndarray) -> DirectionCache:
    x = lookup(embedding, idx.ravel()).reshape(idx.shape[0], idx.shape[1], -1)
    xp = _input_projections(gp, x)
    h, r, z, c = kernels.gru_forward(xp, gp.u_r, gp.u_z, gp.u_h, mask)
    return DirectionCache(indices=idx, h=h, r=r, z=z, c=c,
                          final=np.ascontiguousarray(h[:, -1, :]))


def encode_batch(p: EncoderParams, seqs: Sequence[np.ndarray]):
    """Encode a batch of sequences; returns (embeddings, cache).

    Row i of the result equals ``encode(p, seqs[i])`` up to floating-point
    noise from the batched evaluation order; padding never changes it.
    """
    idx, idx_rev, mask = pad_batch(seqs)
    fwd = _run_direction(p.fwd, p.embedding, idx, mask)
    bwd = _run_direction(p.bwd, p.embedding, idx_rev, mask)
    e = fwd.final @ p.w_fwd.T + bwd.final @ p.w_bwd.T + p.b_comb
    return e, EncodeCache(mask=mask, fwd=fwd, bwd=bwd)


def _direction_backward(gp: GruParams, embedding: np.ndarray, cache: DirectionCache,
                        mask: np.ndarray, d_final: np.ndarray, out: GruParams,
                        d_embedding: np.ndarray) -> None:
    dxp, du_r, du_z, du_h, _ = kernels.gru_backward(
        np.ascontiguousarray(d_final), cache.h, cache.r, cache.z, cache.c,
        gp.u_r, gp.u_z, gp.u_h, mask)
    batch, steps, three_h = dxp.shape
    hidden = three_h // 3
    flat_idx = cache.indices.ravel()
    x = embedding[flat_idx]
    dxp2 = dxp.reshape(batch * steps, three_h)

    dw_all = dxp2.T @ x
    db_all = dxp2.sum(axis=0)
    out.w_r += dw_all[:hidden]
    out.w_z += dw_all[hidden:2 * hidden]
    out.w_h += dw_all[2 * hidden:]
    out.b_r += db_all[:hidden]
    out.b_z += db_all[hidden:2 * hidden]
    out.b_h += db_all[2 * hidden:]
    out.u_r += du_r
    out.u_z += du_z
    out.u_h += du_h

    w_all = np.vstack([gp.w_r, gp.w_z, gp.w_h])
    dx = dxp2 @ w_all
    np.add.at(d_embedding, flat_idx, dx)


def zero_grads_like(p: EncoderParams) -> EncoderParams:
    z = lambda a: np.zeros_like(a)
    zg = lambda gp: GruParams(*(z(getattr(gp, f)) for f in
                                ("w_r", "w_z", "w_h", "u_r", "u_z", "u_h",
                                 "b_r", "b_z", "b_h")))
    return EncoderParams(embedding=z(p.embedding), fwd=zg(p.fwd), bwd=zg(p.bwd),
                         w_fwd=z(p.w_fwd), w_bwd=z(p.w_bwd), b_comb=z(p.b_comb))


def encoder_backward(p: EncoderParams, cache: EncodeCache, d_e: np.ndarray) -> EncoderParams:
    """Gradients of the batch loss w.r.t. every encoder parameter.

    ``d_e`` is the (B, out dim) upstream gradient on the combined
    embeddings. The result reuses the EncoderParams structure to hold
    gradient arrays; embedding rows not touched by the batch stay exactly
    zero.
    """
    d_e = np.asarray(d_e, dtype=np.float64)
    if d_e.shape != cache.fwd.final.shape[:1] + (p.out_dim,):
        raise ShapeError(
            f"upstream gradient shape {d_e.shape} does not match "
            f"batch {cache.fwd.final.shape[0]} x out dim {p.out_dim}"
        )
    g = zero_grads_like(p)
    g.w_fwd += d_e.T @ cache.fwd.final
    g.w_bwd += d_e.T @ cache.bwd.final
    g.b_comb += d_e.sum(axis=0)
    _direction_backward(p.fwd, p.embedding, cache.fwd, cache.mask,
                        d_e @ p.w_fwd, g.fwd, g.embedding)
    _direction_backward(p.bwd, p.embedding, cache.bwd, cache.mask,
                        d_e @ p.w_bwd, g.bwd, g.embedding)
    return g
