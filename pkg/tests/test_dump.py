import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ontosim.dump import decode_dump, encode_dump, read_csv, read_dump, write_csv, write_dump
from ontosim.errors import DumpFormatError
from ontosim.grid import GridSpec, WaveFunction


def _state(n=1, m=16, seed=0):
    g = GridSpec(n, -3.0, 3.0, m)
    rng = np.random.default_rng(seed)
    return WaveFunction(g, rng.normal(size=g.size) + 1j * rng.normal(size=g.size))


def test_header_layout():
    psi = _state(2, 8)
    data = encode_dump(psi)
    assert data[:4] == b"ONTO"
    assert int.from_bytes(data[4:8], "little") == 1
    assert int.from_bytes(data[8:12], "little") == 2
    assert int.from_bytes(data[12:16], "little") == 1
    assert int.from_bytes(data[16:20], "little") == 8
    assert len(data) == 36 + 16 * 64


def test_dump_round_trip(tmp_path):
    psi = _state(2, 8)
    back = read_dump(write_dump(tmp_path / "a.onto", psi))
    assert back.grid == psi.grid
    assert np.array_equal(back.amplitudes, psi.amplitudes)


def test_dump_csv_dump_bitwise(tmp_path):
    psi = _state(1, 32, seed=3)
    psi.amplitudes[0] = complex(-0.0, 1e-310)
    write_dump(tmp_path / "a.onto", psi)
    write_csv(tmp_path / "a.csv", read_dump(tmp_path / "a.onto"))
    write_dump(tmp_path / "b.onto", read_csv(tmp_path / "a.csv"))
    assert (tmp_path / "a.onto").read_bytes() == (tmp_path / "b.onto").read_bytes()


def test_two_particle_csv_columns(tmp_path):
    psi = _state(2, 8)
    write_csv(tmp_path / "p.csv", psi)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0].startswith("# ONTO v1 N=2 D=1 M=8")
    assert lines[1] == "x1,x2,re,im,abs2"
    assert len(lines) == 2 + 64
    row = [float(v) for v in lines[2 + 8 * 2 + 5].split(",")]
    g = psi.grid
    a = psi.amplitudes[2, 5]
    assert row == [g.axis[2], g.axis[5], a.real, a.imag, np.abs(a) ** 2]


def test_truncated_reports_offset():
    data = encode_dump(_state())
    with pytest.raises(DumpFormatError, match=r"offset 100"):
        decode_dump(data[:100])
    with pytest.raises(DumpFormatError, match="truncated header"):
        decode_dump(data[:10])


def test_bad_magic_and_version():
    data = bytearray(encode_dump(_state()))
    with pytest.raises(DumpFormatError, match="magic"):
        decode_dump(b"XXXX" + bytes(data[4:]))
    data[4] = 7
    with pytest.raises(DumpFormatError, match="version"):
        decode_dump(bytes(data))


def test_oversized_rejected():
    with pytest.raises(DumpFormatError, match="oversized"):
        decode_dump(encode_dump(_state()) + b"\0" * 16)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(allow_nan=False, allow_infinity=False), min_size=8, max_size=8))
def test_dump_round_trip_property(values):
    psi = WaveFunction(GridSpec(1, -1.0, 1.0, 8), np.array(values))
    assert encode_dump(decode_dump(encode_dump(psi))) == encode_dump(psi)
