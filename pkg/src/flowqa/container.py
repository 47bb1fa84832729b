"""Flat binary container for named float32 arrays plus a JSON manifest.

Layout (all integers little-endian):

    magic b"FLPW" | version u32 | entry count u32
    per entry: name length u16 | UTF-8 name | dtype u8 (0 = f32) |
               rank u8 | dims u32 each | raw little-endian f32 payload
    manifest length u32 | UTF-8 JSON

Writing is fully deterministic: entries in insertion order, manifest
serialized with sorted keys and no whitespace.
"""

import json
import struct

import numpy as np

from flowqa.errors import ParseError, TruncationError

MAGIC = b"FLPW"
VERSION = 1
_DTYPE_F32 = 0


def write_container(path, entries, manifest):
    """Write named float32 arrays and a manifest dict to ``path``."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(entries))
    for name, arr in entries.items():
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<BB", _DTYPE_F32, arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.astype("<f4").tobytes()
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    encoded = text.encode("utf-8")
    blob += struct.pack("<I", len(encoded))
    blob += encoded
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


class _Reader:
    def __init__(self, data, label):
        self.data = data
        self.pos = 0
        self.label = label

    def take(self, n):
        if self.pos + n > len(self.data):
            raise TruncationError(
                f"{self.label}: need {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} remain")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_container(path):
    """Read ``path`` back into (entries dict, manifest dict)."""
    with open(path, "rb") as fh:
        data = fh.read()
    rd = _Reader(data, str(path))
    if len(data) < 12:
        raise ParseError(f"{path}: too short to be a container file")
    if rd.take(4) != MAGIC:
        raise ParseError(f"{path}: bad magic, expected FLPW")
    version, count = rd.unpack("<II")
    if version != VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    entries = {}
    for _ in range(count):
        (name_len,) = rd.unpack("<H")
        name = rd.take(name_len).decode("utf-8")
        dtype_code, rank = rd.unpack("<BB")
        if dtype_code != _DTYPE_F32:
            raise ParseError(f"{path}: entry {name!r} has unknown dtype "
                             f"code {dtype_code}")
        dims = rd.unpack(f"<{rank}I") if rank else ()
        size = int(np.prod(dims, dtype=np.int64)) if dims else 1
        payload = rd.take(4 * size)
        arr = np.frombuffer(payload, "<f4").reshape(dims).astype(np.float32)
        entries[name] = arr
    (mlen,) = rd.unpack("<I")
    try:
        manifest = json.loads(rd.take(mlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: malformed manifest block") from exc
    return entries, manifest
