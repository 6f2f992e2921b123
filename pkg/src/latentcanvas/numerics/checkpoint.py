"""Single-file parameter checkpoints.

Layout: the 8-byte magic ``LCCKPT01``, a little-endian uint64 header length,
a UTF-8 JSON manifest (names, shapes, dtype, byte offsets, config hash, extra
metadata), then the raw little-endian float64 payload of every array in
manifest order.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LCCKPT01"
_DTYPE = "<f8"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays: dict[str, np.ndarray], config_hash: str = "", meta: dict | None = None):
    path = Path(path)
    entries = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        nbytes = arr.size * 8
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "float64", "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = json.dumps({"config_hash": config_hash, "meta": meta or {}, "tensors": entries},
                        sort_keys=True).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns ``(arrays, header)`` where header carries ``config_hash`` and ``meta``."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    base = 16 + hlen
    arrays = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        buf = raw[start:start + e["nbytes"]]
        if len(buf) != e["nbytes"]:
            raise CheckpointError(f"{path}: truncated payload for {e['name']}")
        arrays[e["name"]] = np.frombuffer(buf, dtype=_DTYPE).reshape(e["shape"]).astype(np.float64)
    return arrays, header
