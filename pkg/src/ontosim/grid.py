"""Configuration-space grid, wave-function container and basic observables.

The wave function of ``N`` particles in ``D`` dimensions each is tabulated on
a periodic box with ``M`` points per axis, giving an array of shape
``(M,) * (N * D)``.  Axis ``j`` holds coordinate ``j`` of the configuration
``(x_1, ..., x_N)``; for ``D = 1`` this is simply particle ``j``.  Arrays are
C-ordered, so the flat index of grid point ``(i_0, ..., i_{n-1})`` is
``sum(i_j * M ** (n - 1 - j))`` and its coordinates are
``extent_min + i_j * spacing``.

Units are natural (hbar = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MemoryCapExceeded, ZeroNorm

DEFAULT_MAX_POINTS = 2**26


@dataclass(frozen=True)
class GridSpec:
    n_particles: int
    extent_min: float
    extent_max: float
    points_per_axis: int
    space_dim: int = 1
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.space_dim != 1:
            raise ValueError("only space_dim = 1 is supported for full-grid runs")
        if not self.extent_max > self.extent_min:
            raise ValueError("extent_max must exceed extent_min")
        m = self.points_per_axis
        if m < 8 or m & (m - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {m}")
        if self.size > self.max_points:
            raise MemoryCapExceeded(
                f"grid of {self.size} points exceeds cap of {self.max_points}"
            )

    @property
    def ndim(self) -> int:
        return self.n_particles * self.space_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.ndim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.ndim

    @property
    def length(self) -> float:
        return self.extent_max - self.extent_min

    @property
    def spacing(self) -> float:
        return self.length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.ndim

    @property
    def axis(self) -> np.ndarray:
        """Coordinates of the grid points along one axis."""
        return self.extent_min + self.spacing * np.arange(self.points_per_axis)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers along one axis in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)

    def coordinate(self, j: int) -> np.ndarray:
        """Coordinate ``j`` broadcast to the full grid shape (as a view)."""
        shape = [1] * self.ndim
        shape[j] = self.points_per_axis
        return np.broadcast_to(self.axis.reshape(shape), self.shape)

    def wrap(self, q):
        """Map positions into the periodic box ``[extent_min, extent_max)``."""
        return self.extent_min + np.mod(np.asarray(q, dtype=float) - self.extent_min, self.length)


@dataclass
class WaveFunction:
    """Complex amplitudes on a grid at a given time.

    ``amplitudes`` is the one mutable buffer in the package; propagators and
    collapse operations return new instances instead of writing into it.
    """

    grid: GridSpec
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128)
        if a.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} amplitudes, got {a.size}")
        self.amplitudes = a.reshape(self.grid.shape)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy(), self.time)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.amplitudes)))


def check_masses(masses, n_particles: int) -> np.ndarray:
    m = np.broadcast_to(np.asarray(masses, dtype=float), (n_particles,)).copy()
    if not np.all(m > 0):
        raise ValueError("all particle masses must be positive")
    return m


@dataclass
class PotentialField:
    grid: GridSpec
    values: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        self.values = np.broadcast_to(v, self.grid.shape).copy() if v.ndim == 0 else v.reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential values must be finite")

    def shifted(self, c: float) -> "PotentialField":
        return PotentialField(self.grid, self.values + c, self.family, {**self.params, "shift": c})

    @classmethod
    def free(cls, grid: GridSpec) -> "PotentialField":
        return cls(grid, np.zeros(grid.shape), "free", {})

    @classmethod
    def harmonic(cls, grid: GridSpec, omega: float, masses=1.0, center: float = 0.0):
        """Independent oscillators: ``sum_k m_k omega^2 (x_k - center)^2 / 2``."""
        if omega <= 0:
            raise ValueError("harmonic: omega must be > 0")
        m = check_masses(masses, grid.n_particles)
        v = sum(0.5 * m[k] * omega**2 * (grid.coordinate(k) - center) ** 2 for k in range(grid.ndim))
        return cls(grid, v, "harmonic", {"omega": omega, "center": center})

    @classmethod
    def double_well(cls, grid: GridSpec, omega: float, half_separation: float, masses=1.0):
        """Two harmonic wells at ``+-half_separation`` joined by a cusp at 0."""
        if omega <= 0 or half_separation <= 0:
            raise ValueError("double_well: omega and half_separation must be > 0")
        m = check_masses(masses, grid.n_particles)
        v = sum(
            0.5 * m[k] * omega**2 * (np.abs(grid.coordinate(k)) - half_separation) ** 2
            for k in range(grid.ndim)
        )
        return cls(grid, v, "double-well", {"omega": omega, "half_separation": half_separation})

    @classmethod
    def barrier_with_slits(cls, grid: GridSpec, height: float, slit_centers, slit_width: float):
        """Flat barrier of ``height`` everywhere except open windows (the slits)."""
        if height < 0 or slit_width <= 0:
            raise ValueError("barrier_with_slits: height >= 0 and slit_width > 0 required")
        v = np.zeros(grid.shape)
        for k in range(grid.ndim):
            x = grid.coordinate(k)
            open_ = np.zeros(grid.shape, dtype=bool)
            for c in slit_centers:
                open_ |= np.abs(x - c) <= slit_width / 2
            v = v + np.where(open_, 0.0, height)
        return cls(
            grid,
            v,
            "barrier-with-slits",
            {"height": height, "slit_centers": list(slit_centers), "slit_width": slit_width},
        )


def gaussian_packet(x, center: float, width: float, k0: float = 0.0) -> np.ndarray:
    """Unit-norm (in the continuum) Gaussian packet; ``width`` is the std of ``|psi|^2``."""
    x = np.asarray(x, dtype=float)
    norm = (2 * np.pi * width**2) ** -0.25
    return norm * np.exp(-((x - center) ** 2) / (4 * width**2) + 1j * k0 * x)


def norm_squared(psi: WaveFunction) -> float:
    a = psi.amplitudes
    return float(np.vdot(a, a).real) * psi.grid.cell_volume


def normalize(psi: WaveFunction) -> WaveFunction:
    n2 = norm_squared(psi)
    if not n2 >= 1e-300:
        raise ZeroNorm(f"cannot normalize a state with norm^2 = {n2:g}")
    return WaveFunction(psi.grid, psi.amplitudes / np.sqrt(n2), psi.time)


def marginal_density(psi: WaveFunction, k: int) -> np.ndarray:
    """Probability density of particle ``k`` (0-based), summed over all other coordinates."""
    g = psi.grid
    if not 0 <= k < g.n_particles:
        raise IndexError(f"particle index {k} out of range for N={g.n_particles}")
    rho = psi.density()
    others = tuple(j for j in range(g.ndim) if j != k)
    if others:
        rho = rho.sum(axis=others) * g.spacing ** len(others)
    return rho


def kinetic_energy(psi: WaveFunction, masses) -> float:
    g = psi.grid
    m = check_masses(masses, g.n_particles)
    phat2 = np.abs(np.fft.fftn(psi.amplitudes)) ** 2
    k2 = g.wavenumbers**2
    total = phat2.sum()
    t = 0.0
    for j in range(g.ndim):
        shape = [1] * g.ndim
        shape[j] = g.points_per_axis
        t += float((phat2 * k2.reshape(shape)).sum()) / (2 * m[j])
    return t / float(total)


def potential_energy(psi: WaveFunction, potential: PotentialField) -> float:
    rho = psi.density()
    return float((rho * potential.values).sum() / rho.sum())


def expectation_energy(psi: WaveFunction, potential: PotentialField, masses) -> float:
    """``<H>`` as a Rayleigh quotient; kinetic part evaluated in Fourier space."""
    return kinetic_energy(psi, masses) + potential_energy(psi, potential)
