"""Binary parameter checkpoints.

Layout::

    b"VMTCKPT"  (7 bytes magic)
    u8          format version
    u64 LE      JSON header length in bytes
    JSON        {"config": ..., "tensors": [{"name", "shape", "dtype", "offset"}]}
    raw         row-major little-endian buffers, concatenated in header order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

MAGIC = b"VMTCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, state: dict[str, np.ndarray], config: dict[str, Any] | None = None) -> None:
    entries = []
    offset = 0
    blobs = []
    for name in state:
        arr = np.ascontiguousarray(state[name])
        dtype = arr.dtype.newbyteorder("<")
        blob = arr.astype(dtype, copy=False).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": dtype.str, "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"config": config or {}, "tensors": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<B", raw, pos)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos += 1
    (hlen,) = struct.unpack_from("<Q", raw, pos)
    pos += 8
    header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    base = pos + hlen
    state = {}
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start = base + entry["offset"]
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=start)
        state[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return state, header["config"]
