"""Versioned binary containers for embeddings (``HGEMB1``) and GNN checkpoints (``HGGNN1``).

HGEMB1 layout (little endian)::

    b"HGEMB1"  u32 version  u32 dim  u32 vocab_size  u32 n_matrices
    u32 meta_len  meta JSON (utf-8)
    vocab_size x (u32 len, utf-8 token, u64 count)
    n_matrices x (u16 name_len, name, u32 rows, u32 cols, rows*cols f32)

HGGNN1 layout::

    b"HGGNN1"  u32 version  u32 config_len  config JSON  u32 n_tensors
    n_tensors x (u16 name_len, name, u32 ndim, ndim x u32 shape, f64 data)
"""
from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

EMB_MAGIC = b"HGEMB1"
GNN_MAGIC = b"HGGNN1"
VERSION = 1


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError("truncated container")
    return data


def _unpack(fh, fmt):
    return struct.unpack(fmt, _read_exact(fh, struct.calcsize(fmt)))


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_embedding(path, vocab: list[str], counts, matrices: dict[str, np.ndarray],
                    meta: dict | None = None) -> None:
    dims = {m.shape[1] for m in matrices.values()}
    if len(dims) > 1:
        raise ValueError("all matrices must share one column dimension")
    dim = dims.pop() if dims else 0
    counts = np.zeros(len(vocab), dtype=np.int64) if counts is None else np.asarray(counts)
    meta_b = _json_bytes(meta or {})
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<IIII", VERSION, dim, len(vocab), len(matrices)))
        fh.write(struct.pack("<I", len(meta_b)) + meta_b)
        for tok, c in zip(vocab, counts):
            b = str(tok).encode("utf-8")
            fh.write(struct.pack("<I", len(b)) + b + struct.pack("<Q", int(c)))
        for name, m in matrices.items():
            nb = name.encode("utf-8")
            m = np.ascontiguousarray(m, dtype="<f4")
            fh.write(struct.pack("<H", len(nb)) + nb + struct.pack("<II", *m.shape))
            fh.write(m.tobytes(order="C"))


def read_embedding(path):
    """Return ``(vocab, counts, matrices, meta)``; matrices come back as float64."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 6) != EMB_MAGIC:
            raise ValueError(f"{path}: not an HGEMB1 container")
        version, dim, vsize, nmat = _unpack(fh, "<IIII")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        (mlen,) = _unpack(fh, "<I")
        meta = json.loads(_read_exact(fh, mlen).decode("utf-8"))
        vocab, counts = [], []
        for _ in range(vsize):
            (n,) = _unpack(fh, "<I")
            vocab.append(_read_exact(fh, n).decode("utf-8"))
            counts.append(_unpack(fh, "<Q")[0])
        matrices = {}
        for _ in range(nmat):
            (n,) = _unpack(fh, "<H")
            name = _read_exact(fh, n).decode("utf-8")
            rows, cols = _unpack(fh, "<II")
            if cols != dim:
                raise ValueError(f"{path}: matrix {name} has {cols} columns, header says {dim}")
            raw = _read_exact(fh, rows * cols * 4)
            matrices[name] = np.frombuffer(raw, dtype="<f4").reshape(rows, cols).astype(np.float64)
    return vocab, np.asarray(counts, dtype=np.int64), matrices, meta


def write_checkpoint(path, config: dict, tensors: dict[str, np.ndarray]) -> None:
    cfg = _json_bytes(config)
    with open(path, "wb") as fh:
        fh.write(GNN_MAGIC + struct.pack("<II", VERSION, len(cfg)) + cfg)
        fh.write(struct.pack("<I", len(tensors)))
        for name, t in tensors.items():
            t = np.array(t, dtype="<f8", order="C")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)) + nb + struct.pack("<I", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}I", *t.shape))
            fh.write(t.tobytes(order="C"))


def read_checkpoint(path):
    """Return ``(config, tensors)``."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 6) != GNN_MAGIC:
            raise ValueError(f"{path}: not an HGGNN1 container")
        version, clen = _unpack(fh, "<II")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        config = json.loads(_read_exact(fh, clen).decode("utf-8"))
        (count,) = _unpack(fh, "<I")
        tensors = {}
        for _ in range(count):
            (n,) = _unpack(fh, "<H")
            name = _read_exact(fh, n).decode("utf-8")
            (ndim,) = _unpack(fh, "<I")
            shape = _unpack(fh, f"<{ndim}I") if ndim else ()
            size = int(np.prod(shape)) if ndim else 1
            raw = _read_exact(fh, size * 8)
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return config, tensors
