"""Binary field format FTF1.

Layout (little endian)::

    b"FTF1"  u8 d  u64 N  f64 L  f64 domain_offset[d]  f64 domain_side
    f64 cutoff_width  f64 values[N**d]   (row-major)
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import Grid, RealField

MAGIC = b"FTF1"


class FormatError(ValueError):
    pass


def encode_field(f: RealField) -> bytes:
    g = f.grid
    header = MAGIC + struct.pack("<BQd", g.d, g.N, g.L)
    header += struct.pack(f"<{g.d}d", *g.domain_offset)
    header += struct.pack("<dd", g.domain_side, g.cutoff_width)
    return header + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def decode_field(data: bytes) -> RealField:
    if data[:4] != MAGIC:
        raise FormatError("not an FTF1 file (bad magic)")
    pos = 4
    d, N, L = struct.unpack_from("<BQd", data, pos)
    pos += struct.calcsize("<BQd")
    if d not in (1, 2):
        raise FormatError(f"unsupported dimension {d}")
    offset = struct.unpack_from(f"<{d}d", data, pos)
    pos += 8 * d
    side, width = struct.unpack_from("<dd", data, pos)
    pos += 16
    count = N**d
    if len(data) - pos != 8 * count:
        raise FormatError(f"payload has {len(data) - pos} bytes, expected {8 * count}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape((N,) * d)
    grid = Grid(d=d, N=N, L=L, domain_offset=offset, domain_side=side, cutoff_width=width)
    return RealField(grid, values.astype(float))


def write_field(path, f: RealField) -> Path:
    path = Path(path)
    path.write_bytes(encode_field(f))
    return path


def read_field(path) -> RealField:
    return decode_field(Path(path).read_bytes())
