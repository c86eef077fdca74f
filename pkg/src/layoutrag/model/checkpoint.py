"""Checkpoint persistence: versioned header, config, flat parameter array."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointError
from .flow import ModelConfig, VectorFieldNet, build_net

MAGIC = b"LRCK"
VERSION = 1

_DTYPES = {4: np.float32, 8: np.float64}


def save_checkpoint(net: VectorFieldNet, path: str | Path) -> None:
    """Write config plus all parameters, flattened in declaration order."""
    cfg_bytes = json.dumps(asdict(net.cfg)).encode("utf-8")
    params = [p.detach().cpu() for p in net.parameters()]
    dtype = params[0].dtype if params else torch.float32
    itemsize = 8 if dtype == torch.float64 else 4
    flat = np.concatenate([p.numpy().astype(_DTYPES[itemsize]).reshape(-1) for p in params])
    if not flat.flags["C_CONTIGUOUS"]:
        flat = np.ascontiguousarray(flat)
    if flat.dtype.byteorder == ">":
        flat = flat.astype(flat.dtype.newbyteorder("<"))
    header = (
        MAGIC
        + struct.pack("<I", VERSION)
        + struct.pack("<I", len(cfg_bytes))
        + cfg_bytes
        + struct.pack("<BQ", itemsize, flat.size)
    )
    Path(path).write_bytes(header + flat.tobytes())


def load_checkpoint(path: str | Path) -> VectorFieldNet:
    """Rebuild the net from a checkpoint written by save_checkpoint."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack_from("<I", raw, 8)
    pos = 12
    try:
        cfg = ModelConfig(**json.loads(raw[pos : pos + cfg_len].decode("utf-8")))
    except (ValueError, TypeError, KeyError) as exc:
        raise CheckpointError(f"{path}: bad config block: {exc}") from exc
    pos += cfg_len
    if pos + 9 > len(raw):
        raise CheckpointError(f"{path}: truncated header")
    itemsize, n_params = struct.unpack_from("<BQ", raw, pos)
    pos += 9
    if itemsize not in _DTYPES:
        raise CheckpointError(f"{path}: unknown parameter dtype code {itemsize}")
    expected = n_params * itemsize
    blob = raw[pos:]
    if len(blob) != expected:
        raise CheckpointError(
            f"{path}: parameter payload is {len(blob)} bytes, expected {expected}"
        )
    flat = np.frombuffer(blob, dtype=_DTYPES[itemsize])

    net = build_net(cfg)
    if itemsize == 8:
        net.double()
    offset = 0
    with torch.no_grad():
        for p in net.parameters():
            count = p.numel()
            if offset + count > flat.size:
                raise CheckpointError(f"{path}: parameter count mismatch")
            chunk = flat[offset : offset + count].reshape(tuple(p.shape))
            p.copy_(torch.from_numpy(chunk.copy()))
            offset += count
    if offset != flat.size:
        raise CheckpointError(f"{path}: parameter count mismatch")
    return net
