"""Small shared helpers: tagged binary containers and deterministic parallel map.

The tagged container is the common layout behind the model/intermediate
files (WIVISVM1, WIVINN01, ...): an 8-byte magic, a JSON metadata blob,
then named little-endian arrays.  Writers sort keys, so identical inputs
always produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import FormatError, VersionError

_DTYPES = {
    "f4": "<f4",
    "f8": "<f8",
    "i4": "<i4",
    "i8": "<i8",
    "u1": "|u1",
    "c16": "<c16",
}
_DTYPE_TAGS = {np.dtype(v): k for k, v in _DTYPES.items()}


def pack_container(magic: bytes, meta: dict, arrays: dict) -> bytes:
    """Serialize metadata + named arrays behind an 8-byte magic."""
    if len(magic) != 8:
        raise ValueError("magic must be exactly 8 bytes")
    index = []
    blobs = []
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        tag = _DTYPE_TAGS.get(a.dtype)
        if tag is None:
            raise ValueError(f"unsupported array dtype {a.dtype} for {name!r}")
        data = a.astype(_DTYPES[tag], copy=False).tobytes()
        index.append({"name": name, "dtype": tag, "shape": list(a.shape)})
        blobs.append(data)
    header = json.dumps(
        {"meta": meta, "arrays": index}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    out = bytearray()
    out += magic
    out += struct.pack("<I", len(header))
    out += header
    for b in blobs:
        out += b
    return bytes(out)


def unpack_container(data: bytes, magic: bytes) -> tuple:
    """Parse bytes written by pack_container; returns (meta, arrays)."""
    if len(data) < 12:
        raise FormatError("container too short")
    if data[:8] != magic:
        raise VersionError(f"bad magic: expected {magic!r}, found {data[:8]!r}")
    (hlen,) = struct.unpack_from("<I", data, 8)
    if 12 + hlen > len(data):
        raise FormatError("container header extends past end of file")
    try:
        header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
        meta = header["meta"]
        index = header["arrays"]
    except (ValueError, KeyError) as e:
        raise FormatError(f"corrupt container header: {e}") from None
    arrays = {}
    pos = 12 + hlen
    for entry in index:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(data):
            raise FormatError(f"array {entry['name']!r} truncated")
        arrays[entry["name"]] = np.frombuffer(
            data, dtype=dtype, count=nbytes // dtype.itemsize, offset=pos
        ).reshape(shape).copy()
        pos += nbytes
    return meta, arrays


def read_container(path, magic: bytes) -> tuple:
    with open(path, "rb") as f:
        return unpack_container(f.read(), magic)


def write_container(path, magic: bytes, meta: dict, arrays: dict):
    with open(path, "wb") as f:
        f.write(pack_container(magic, meta, arrays))


def parallel_map(fn, items, jobs: int = 1) -> list:
    """Map fn over items, optionally across processes.

    Results always come back in input order, so any jobs value yields the
    same output.  fn and items must be picklable when jobs > 1.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
