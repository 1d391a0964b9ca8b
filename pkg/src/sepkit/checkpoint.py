"""Binary checkpoint container for named parameter arrays.

Layout (all integers little-endian), fixed so files round-trip bit-exactly:

    magic   4 bytes  b"SEPK"
    u32     format version (currently 1)
    u32     metadata length M
    M bytes UTF-8 JSON metadata (kind, config, fingerprint, ...)
    u32     entry count N
    then N entries of:
        u16     name length n
        n bytes UTF-8 name
        u8      ndim
        u32 * ndim  shape
        float32 little-endian values, row-major, prod(shape) * 4 bytes

Values are always stored as 32-bit floats; callers cast to their working
precision after loading.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataIOError

MAGIC = b"SEPK"
VERSION = 1


def config_fingerprint(config: dict) -> str:
    """Stable sha256 over a canonical JSON rendering of a config dict."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def save(path, arrays: dict, metadata: dict | None = None) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    chunks.append(struct.pack("<I", len(meta)))
    chunks.append(meta)
    chunks.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes())
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(b"".join(chunks))
    except OSError as e:
        raise DataIOError(f"cannot write checkpoint {path}: {e}") from e


def load(path):
    """Return (arrays: dict[str, float32 ndarray], metadata: dict)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read checkpoint {path}: {e}") from e
    if raw[:4] != MAGIC:
        raise DataIOError(f"{path} is not a sepkit checkpoint (bad magic)")
    off = 4
    (version,) = struct.unpack_from("<I", raw, off)
    off += 4
    if version != VERSION:
        raise DataIOError(f"{path}: unsupported checkpoint version {version}")
    (mlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    metadata = json.loads(raw[off:off + mlen].decode("utf-8")) if mlen else {}
    off += mlen
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(shape)
        off += 4 * n
        arrays[name] = arr.copy()
    if off != len(raw):
        raise DataIOError(f"{path}: {len(raw) - off} trailing bytes after last entry")
    return arrays, metadata


def assign_parameters(named_params: dict, arrays: dict) -> None:
    """Copy checkpoint arrays into model parameters, casting to their dtype."""
    missing = set(named_params) - set(arrays)
    extra = set(arrays) - set(named_params)
    if missing or extra:
        raise DataIOError(
            f"checkpoint/model mismatch: missing {sorted(missing)[:4]}, "
            f"unexpected {sorted(extra)[:4]}")
    for name, p in named_params.items():
        arr = arrays[name]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise DataIOError(
                f"checkpoint entry '{name}' has shape {arr.shape}, "
                f"model expects {p.data.shape}")
        p.data = arr.astype(p.data.dtype)
