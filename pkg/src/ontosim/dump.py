"""Binary field dump and CSV export of wave functions.

Dump layout (all little-endian)::

    offset  size  field
    0       4     magic b"ONTO"
    4       4     version (u32, currently 1)
    8       4     N, number of particles (u32)
    12      4     D, dimensions per particle (u32)
    16      4     M, points per axis (u32)
    20      8     extent_min (f64)
    28      8     extent_max (f64)
    36      ...   M**(N*D) amplitudes as interleaved (re, im) f64 pairs, C order

The CSV export has one row per grid point with columns ``x1..xN, re, im, abs2``.
A leading ``#`` comment line carries the grid header so that a CSV converts
back to a dump bit for bit (floats are written with 17 significant digits).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DumpFormatError
from .grid import GridSpec, WaveFunction

MAGIC = b"ONTO"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd")


def encode_dump(psi: WaveFunction) -> bytes:
    g = psi.grid
    header = _HEADER.pack(MAGIC, VERSION, g.n_particles, g.space_dim, g.points_per_axis, g.extent_min, g.extent_max)
    body = np.ascontiguousarray(psi.amplitudes, dtype="<c16").tobytes()
    return header + body


def decode_dump(data: bytes, time: float = 0.0, max_points: int | None = None) -> WaveFunction:
    if len(data) < _HEADER.size:
        raise DumpFormatError(f"truncated header: file has {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, n, d, m, lo, hi = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DumpFormatError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise DumpFormatError(f"unsupported dump version {version} at offset 4")
    kwargs = {} if max_points is None else {"max_points": max_points}
    try:
        grid = GridSpec(n, lo, hi, m, space_dim=d, **kwargs)
    except ValueError as exc:
        raise DumpFormatError(f"invalid grid header: {exc}") from None
    need = _HEADER.size + 16 * grid.size
    if len(data) != need:
        kind = "truncated" if len(data) < need else "oversized"
        raise DumpFormatError(
            f"{kind} dump: payload ends at byte offset {len(data)}, expected {need} "
            f"({grid.size} amplitudes from offset {_HEADER.size})"
        )
    amps = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).astype(np.complex128)
    return WaveFunction(grid, amps, time)


def write_dump(path, psi: WaveFunction) -> Path:
    path = Path(path)
    path.write_bytes(encode_dump(psi))
    return path


def read_dump(path, time: float = 0.0) -> WaveFunction:
    return decode_dump(Path(path).read_bytes(), time)


def _header_line(grid: GridSpec) -> str:
    return (
        f"# ONTO v{VERSION} N={grid.n_particles} D={grid.space_dim} M={grid.points_per_axis} "
        f"extent_min={grid.extent_min!r} extent_max={grid.extent_max!r}"
    )


def write_csv(path, psi: WaveFunction) -> Path:
    g = psi.grid
    coords = np.meshgrid(*([g.axis] * g.ndim), indexing="ij")
    a = psi.amplitudes
    cols = [c.ravel() for c in coords] + [a.real.ravel(), a.imag.ravel(), (np.abs(a) ** 2).ravel()]
    names = [f"x{j + 1}" for j in range(g.ndim)] + ["re", "im", "abs2"]
    path = Path(path)
    with path.open("w") as fh:
        fh.write(_header_line(g) + "\n")
        np.savetxt(fh, np.column_stack(cols), fmt="%.17g", delimiter=",", header=",".join(names), comments="")
    return path


def read_csv(path) -> WaveFunction:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# ONTO"):
            raise DumpFormatError(f"{path}: missing '# ONTO' header line")
        fields = dict(tok.split("=", 1) for tok in first.split()[3:])
        try:
            grid = GridSpec(
                int(fields["N"]),
                float(fields["extent_min"]),
                float(fields["extent_max"]),
                int(fields["M"]),
                space_dim=int(fields["D"]),
            )
        except (KeyError, ValueError) as exc:
            raise DumpFormatError(f"{path}: bad header line: {exc}") from None
        table = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    if table.shape != (grid.size, grid.ndim + 3):
        raise DumpFormatError(f"{path}: expected {grid.size} rows x {grid.ndim + 3} columns, got {table.shape}")
    amps = np.empty(grid.size, dtype=np.complex128)
    amps.real = table[:, grid.ndim]
    amps.imag = table[:, grid.ndim + 1]
    return WaveFunction(grid, amps)
