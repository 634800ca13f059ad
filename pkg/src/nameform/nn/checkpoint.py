"""Parameter checkpoint container.

Layout (documented here normatively):

    bytes 0..7    magic ``NFCKPT1\\n``
    bytes 8..15   little-endian uint64 header length H
    bytes 16..    UTF-8 JSON header: {"config": {...}, "params": [
                      {"name": str, "shape": [int, ...]}, ...]}
    then          each parameter's float64 little-endian row-major values,
                  concatenated in header order
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .autograd import Parameter

MAGIC = b"NFCKPT1\n"


def save_checkpoint(path: str | Path, params: Sequence[Parameter], config: dict | None = None) -> None:
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ValueError("duplicate parameter names in checkpoint")
    header = {
        "config": config or {},
        "params": [{"name": p.name, "shape": list(p.data.shape)} for p in params],
    }
    header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for p in params:
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    header_start = len(MAGIC) + 8
    header = json.loads(raw[header_start : header_start + header_len].decode("utf-8"))
    offset = header_start + header_len
    values: dict[str, np.ndarray] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        values[entry["name"]] = arr.astype(np.float64)
        offset += count * 8
    if offset != len(raw):
        raise ValueError("checkpoint has trailing or missing data")
    return header["config"], values


def restore_parameters(params: Sequence[Parameter], values: dict[str, np.ndarray]) -> None:
    for p in params:
        if p.name not in values:
            raise KeyError(f"checkpoint missing parameter {p.name!r}")
        if values[p.name].shape != p.data.shape:
            raise ValueError(f"shape mismatch for {p.name!r}")
        p.data[...] = values[p.name]
