import struct

import numpy as np
import pytest

from fractal_transport.io import FormatError, decode_field, encode_field, read_field, write_field
from fractal_transport.spectral import Grid, RealField


@pytest.mark.parametrize("d", [1, 2])
def test_round_trip(tmp_path, d):
    g = Grid(d=d, N=32)
    f = RealField(g, np.random.default_rng(d).standard_normal(g.shape))
    path = write_field(tmp_path / "f.ftf", f)
    back = read_field(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_header_layout():
    g = Grid(N=16)
    data = encode_field(RealField(g, np.arange(16.0)))
    assert data[:4] == bytes([0x46, 0x54, 0x46, 0x31])
    assert data[4] == 1
    assert struct.unpack_from("<Q", data, 5)[0] == 16
    assert struct.unpack_from("<d", data, 13)[0] == 2.0
    assert len(data) == 4 + 1 + 8 + 8 + 8 + 8 + 8 + 16 * 8
    assert struct.unpack_from("<d", data, len(data) - 8)[0] == 15.0


def test_bad_magic():
    with pytest.raises(FormatError, match="magic"):
        decode_field(b"XXXX" + bytes(100))


def test_truncated_payload():
    data = encode_field(RealField.zeros(Grid(N=16)))
    with pytest.raises(FormatError, match="payload"):
        decode_field(data[:-8])
