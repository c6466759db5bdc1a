"""Parameter checkpoint file.

Layout: magic b"VLNN", format version u16, then one block per parameter
array: name length u16, UTF-8 name bytes, rank u8, one u32 extent per
dimension, then the values as little-endian float32 in row-major order.
Blocks repeat until end of file. All integers little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import SchemaMismatch

MAGIC = b"VLNN"
FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, blocks: dict[str, np.ndarray]) -> None:
    """Write named arrays in sorted-name order (deterministic bytes)."""
    path = Path(path)
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION)]
    for name in sorted(blocks):
        arr = np.ascontiguousarray(blocks[name], dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Read arrays back as float64 (compute precision)."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SchemaMismatch("not a parameter checkpoint (bad magic)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise SchemaMismatch(f"unsupported checkpoint version {version}")
    offset = 6
    blocks: dict[str, np.ndarray] = {}
    while offset < len(data):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        blocks[name] = values.reshape(shape).astype(np.float64)
    return blocks
