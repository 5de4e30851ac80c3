"""SWT: checksummed little-endian container of named float32 tensors.

Layout (all integers little-endian):

    bytes 0-3   magic "SWT1"
    u32         version (= 1)
    u32         tensor count
    per tensor: u16 name length, UTF-8 name bytes,
                u8 dtype (0 = float32), u8 rank, rank * u32 dims,
                prod(dims) * 4 bytes IEEE-754 float32 data
    u32         CRC-32 of every preceding byte

Save and load round-trip bitwise. ``load_swt`` optionally validates the
name/shape set against an expected manifest; every failure mode raises
``WeightFormatError`` with a distinct ``code``.
"""

import struct
import zlib

import numpy as np

from seatnet.errors import WeightFormatError
from seatnet.model import WeightStore

MAGIC = b"SWT1"
VERSION = 1
DTYPE_F32 = 0


def swt_bytes(store):
    """Serialize a name -> float32 tensor mapping to SWT bytes."""
    items = list(store.items())
    parts = [MAGIC, struct.pack("<II", VERSION, len(items))]
    for name, arr in items:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise WeightFormatError("bad_name", f"tensor name too long: {name[:40]}...")
        arr = np.asarray(arr, dtype="<f4")
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BB", DTYPE_F32, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_swt(store, path):
    data = swt_bytes(store)
    with open(path, "wb") as fh:
        fh.write(data)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data) - 4:  # last 4 bytes are the checksum
            raise WeightFormatError(
                "truncated", f"file ends inside {what} (offset {self.pos})"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def parse_swt(data):
    """Parse SWT bytes into an ordered {name: float32 array} dict."""
    if len(data) < len(MAGIC) + 8 + 4:
        raise WeightFormatError("truncated", f"file is only {len(data)} bytes")
    if data[:4] != MAGIC:
        raise WeightFormatError("bad_magic", f"expected {MAGIC!r}, got {data[:4]!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise WeightFormatError("bad_version", f"expected {VERSION}, got {version}")
    reader = _Reader(data)
    reader.pos = 12
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", reader.take(2, "name length"))
        name = reader.take(name_len, "name").decode("utf-8")
        dtype, rank = struct.unpack("<BB", reader.take(2, "dtype/rank"))
        if dtype != DTYPE_F32:
            raise WeightFormatError("bad_dtype", f"{name}: dtype tag {dtype}")
        dims = struct.unpack(f"<{rank}I", reader.take(4 * rank, "dims"))
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = reader.take(4 * n, f"data of {name}")
        if name in tensors:
            raise WeightFormatError("duplicate_tensor", name)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if reader.pos != len(data) - 4:
        raise WeightFormatError(
            "trailing_garbage",
            f"{len(data) - 4 - reader.pos} unexpected bytes after tensor payload",
        )
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise WeightFormatError(
            "bad_checksum", f"stored {stored_crc:#010x} != computed {actual_crc:#010x}"
        )
    return tensors


def load_swt(path, expected=None):
    """Load an SWT file into a WeightStore.

    ``expected`` is an optional {name: shape} manifest; the file must match
    it exactly (no unknown, no missing, no mis-shaped tensors).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    tensors = parse_swt(data)
    if expected is not None:
        unknown = [n for n in tensors if n not in expected]
        if unknown:
            raise WeightFormatError("unknown_tensor", ", ".join(sorted(unknown)[:8]))
        missing = [n for n in expected if n not in tensors]
        if missing:
            raise WeightFormatError("missing_tensor", ", ".join(sorted(missing)[:8]))
        for name, shape in expected.items():
            if tensors[name].shape != tuple(shape):
                raise WeightFormatError(
                    "shape_mismatch",
                    f"{name}: file has {tensors[name].shape}, expected {tuple(shape)}",
                )
    return WeightStore(tensors)
