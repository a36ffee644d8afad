"""Self-describing binary checkpoint format (version 1).

Layout:

    bytes 0..7    magic "POSTVEC1"
    bytes 8..11   header length N, little-endian uint32
    bytes 12..    UTF-8 JSON header (N bytes, canonical: sorted keys,
                  compact separators)
    rest          tensor payload: little-endian float32, tensors
                  concatenated in the canonical parameter order (see
                  postvec.model.named_tensors), each in row-major order

The header carries the format version, model kind, dimensions, the PRNG
id and seed used to build the model, a free-form config echo, the full
symbol table (characters as code points, or word strings), the label
table, and a shape manifest for every tensor. A checkpoint is loadable
with no side files, and save(load(x)) is byte-identical because float32
storage is idempotent and the header serialization is canonical.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .layers import Alphabet, WordVocab
from .model import Model, named_tensors
from .objective import SoftmaxParams
from .layers import EncoderParams, GruParams
from .tensor import SeededRng

MAGIC = b"POSTVEC1"
FORMAT_VERSION = 1


def _header(model: Model, seed: int, config_echo: dict) -> dict:
    if model.kind == "char":
        symbols = [ord(ch) for ch in model.table.chars]
    else:
        symbols = list(model.table.words)
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "embed_dim": model.encoder.embed_dim,
        "hidden_dim": model.encoder.hidden_dim,
        "out_dim": model.encoder.out_dim,
        "table_size": model.encoder.table_size,
        "n_labels": model.n_labels,
        "prng": SeededRng.ALGORITHM,
        "seed": int(seed),
        "config": config_echo,
        "symbols": symbols,
        "labels": list(model.label_names),
        "tensors": [{"name": name, "shape": list(arr.shape)}
                    for name, arr in named_tensors(model)],
    }


def save_checkpoint(model: Model, path, seed: int = 0,
                    config_echo: dict | None = None) -> None:
    """Write atomically (temp file + rename in the target directory)."""
    model.validate()
    path = Path(path)
    header = json.dumps(_header(model, seed, config_echo or {}),
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(np.uint32(len(header)).astype("<u4").tobytes())
            fh.write(header)
            for _, arr in named_tensors(model):
                fh.write(arr.astype("<f4").tobytes(order="C"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Read a checkpoint; returns (model, header dict).

    Tensors come back as float64 (the in-memory working precision); the
    on-disk float32 values are preserved exactly.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if blob[:8] != MAGIC:
        raise DataError(f"{path} is not a postvec checkpoint (bad magic)")
    header_len = int(np.frombuffer(blob[8:12], dtype="<u4")[0])
    header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported checkpoint format version {header.get('format_version')}")

    offset = 12 + header_len
    arrays = {}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        n = int(np.prod(shape))
        raw = np.frombuffer(blob, dtype="<f4", count=n, offset=offset)
        if raw.size != n:
            raise DataError(f"checkpoint truncated at tensor {spec['name']}")
        arrays[spec["name"]] = raw.astype(np.float64).reshape(shape)
        offset += 4 * n
    if offset != len(blob):
        raise DataError(f"{len(blob) - offset} trailing bytes after tensor payload")

    if header["kind"] == "char":
        table = Alphabet([chr(cp) for cp in header["symbols"]])
    elif header["kind"] == "word":
        table = WordVocab(header["symbols"])
    else:
        raise DataError(f"unknown model kind {header['kind']!r}")

    gp = lambda prefix: GruParams(**{f: arrays[f"{prefix}.{f}"] for f in
                                     ("w_r", "w_z", "w_h", "u_r", "u_z", "u_h",
                                      "b_r", "b_z", "b_h")})
    encoder = EncoderParams(
        embedding=arrays["embedding"], fwd=gp("fwd"), bwd=gp("bwd"),
        w_fwd=arrays["combine.w_fwd"], w_bwd=arrays["combine.w_bwd"],
        b_comb=arrays["combine.b"],
    )
    softmax = SoftmaxParams(w=arrays["softmax.w"], b=arrays["softmax.b"])
    model = Model(kind=header["kind"], table=table, label_names=list(header["labels"]),
                  encoder=encoder, softmax=softmax)
    model.validate()
    return model, header
