"""GRW spontaneous-collapse dynamics.

Jumps arrive as a Poisson process of total rate ``N * lambda``.  At a jump a
particle ``k`` is picked uniformly, a center ``x`` is drawn from
``p(x) = ||L_x^{1/2} psi||^2`` and the state is replaced by
``L_x^{1/2} psi / ||L_x^{1/2} psi||`` with the Gaussian multiplication operator
``L_x = (2 pi sigma^2)^{-D/2} exp(-(x_k - x)^2 / (2 sigma^2))``.  Between
jumps the state follows the Strang propagator.

Jump times are snapped to the nearest propagation step boundary.  Collapse
centers are restricted to the grid points of the particle's axis, and the
kernel uses the plain (non-periodic) distance ``x_k - x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants
from scipy.signal import fftconvolve

from .errors import ZeroOverlap
from .grid import GridSpec, PotentialField, WaveFunction, expectation_energy, marginal_density
from .schrodinger import PropagatorConfig, SplitStepPropagator, n_steps_for
from .stats import RngStream

# Standard GRW values in SI units.
LAMBDA_SI = 1e-16  # s^-1
SIGMA_SI = 1e-7  # m

# Direct convolution beats FFT setup cost up to about this many points per axis.
_DIRECT_CONV_MAX = 256


@dataclass(frozen=True)
class NaturalUnits:
    """Natural units with hbar = 1 fixed by a length and a mass scale."""

    length_m: float = 1e-7
    mass_kg: float = constants.m_e

    @property
    def time_s(self) -> float:
        return self.mass_kg * self.length_m**2 / constants.hbar

    def rate_from_si(self, rate_per_s: float) -> float:
        return rate_per_s * self.time_s

    def rate_to_si(self, rate: float) -> float:
        return rate / self.time_s

    def length_from_si(self, length_m: float) -> float:
        return length_m / self.length_m

    def time_to_si(self, t: float) -> float:
        return t * self.time_s


@dataclass(frozen=True)
class GrwParams:
    lambda_rate: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_rate > 0:
            raise ValueError("lambda_rate must be > 0")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    @classmethod
    def from_si(cls, units: NaturalUnits, seed: int = 0, lambda_si=LAMBDA_SI, sigma_si=SIGMA_SI):
        return cls(units.rate_from_si(lambda_si), units.length_from_si(sigma_si), seed)


@dataclass(frozen=True)
class CollapseEvent:
    time: float
    particle_index: int
    center: float
    weight: float  # p(center) used when the center was drawn
    forced: bool = False


def next_jump_interval(n_particles: int, lambda_rate: float, rng: RngStream) -> float:
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    return float(rng.exponential(1.0 / (n_particles * lambda_rate)))


def pick_collapsing_particle(n_particles: int, rng: RngStream) -> int:
    """Uniform 0-based particle index."""
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    return int(rng.integers(0, n_particles))


def _axis_shape(grid: GridSpec, k: int):
    shape = [1] * grid.ndim
    shape[k] = grid.points_per_axis
    return shape


def localization_weights(x_center: float, k: int, sigma: float, grid: GridSpec) -> np.ndarray:
    """``L_x`` on the configuration grid (a broadcast view, constant off axis ``k``)."""
    if not 0 <= k < grid.n_particles:
        raise IndexError(f"particle index {k} out of range for N={grid.n_particles}")
    d = grid.space_dim
    axis = (2 * np.pi * sigma**2) ** (-d / 2) * np.exp(-((grid.axis - x_center) ** 2) / (2 * sigma**2))
    return np.broadcast_to(axis.reshape(_axis_shape(grid, k)), grid.shape)


def collapse_center_distribution(psi: WaveFunction, k: int, sigma: float) -> np.ndarray:
    """Density ``p(x)`` of collapse centers on the grid points of axis ``k``.

    Computed as the linear convolution of the particle-``k`` marginal with
    the Gaussian kernel, then renormalized to unit mass on the grid (the
    fraction falling outside the box is dropped).
    """
    g = psi.grid
    rho = marginal_density(psi, k)
    m = g.points_per_axis
    offsets = g.spacing * np.arange(-(m - 1), m)
    kernel = (2 * np.pi * sigma**2) ** (-g.space_dim / 2) * np.exp(-(offsets**2) / (2 * sigma**2))
    conv = np.convolve if m <= _DIRECT_CONV_MAX else fftconvolve
    p = conv(rho, kernel)[m - 1 : 2 * m - 1] * g.spacing
    p = np.clip(p, 0.0, None)
    return p / (p.sum() * g.spacing)


def apply_collapse(psi: WaveFunction, k: int, x_center: float, sigma: float) -> WaveFunction:
    g = psi.grid
    root = np.sqrt(localization_weights(x_center, k, sigma, g))
    a = psi.amplitudes * root
    n2 = float(np.vdot(a, a).real) * g.cell_volume
    if not n2 >= 1e-300:
        raise ZeroOverlap(f"collapse of particle {k} at x={x_center:g}: overlap {n2:g} underflows")
    return WaveFunction(g, a / np.sqrt(n2), psi.time)


def sample_collapse_center(psi: WaveFunction, k: int, sigma: float, rng: RngStream) -> tuple[float, float]:
    """Inverse-CDF draw of a grid point from ``p(x)``; returns ``(x, p(x))``."""
    p = collapse_center_distribution(psi, k, sigma)
    cdf = np.cumsum(p)
    j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    j = min(j, p.size - 1)
    return float(psi.grid.axis[j]), float(p[j])


def collapse(psi: WaveFunction, sigma: float, rng: RngStream, k: int | None = None, forced: bool = False):
    """One complete GRW jump on ``psi``; returns the new state and its event record."""
    if k is None:
        k = pick_collapsing_particle(psi.grid.n_particles, rng)
    x, w = sample_collapse_center(psi, k, sigma, rng)
    return apply_collapse(psi, k, x, sigma), CollapseEvent(psi.time, k, x, w, forced)


@dataclass
class GrwRun:
    snapshots: list
    events: list
    params: GrwParams
    energies: list = field(default_factory=list)
    n_steps: int = 0

    def report(self) -> dict:
        return {
            "lambda_rate": self.params.lambda_rate,
            "sigma": self.params.sigma,
            "seed": self.params.seed,
            "n_steps": self.n_steps,
            "event_count": len(self.events),
            "spontaneous_events": sum(not e.forced for e in self.events),
            "forced_events": sum(e.forced for e in self.events),
            "energy_series": [[s.time, e] for s, e in zip(self.snapshots, self.energies)],
        }


def run_grw(
    psi0: WaveFunction,
    potential: PotentialField,
    masses,
    t_final: float,
    params: GrwParams,
    config: PropagatorConfig | None = None,
    forced: tuple = (),
    bracket_events: bool = False,
    track_energy: bool = False,
) -> GrwRun:
    """Alternate Schrodinger steps and GRW jumps up to ``t_final``.

    ``forced`` lists ``(time, particle_index)`` collapses applied in addition
    to the spontaneous ones (a stand-in for a measurement).  With
    ``bracket_events`` the states one step before and right after each jump
    are also kept as snapshots, so a jump is visible across a single ``dt``.
    """
    config = config or PropagatorConfig()
    dt = config.dt
    n_steps = n_steps_for(t_final, dt)
    g = psi0.grid
    n = g.n_particles
    prop = SplitStepPropagator(potential, masses, dt)
    rng = RngStream(params.seed, "grw")

    def step_of(t):
        return int(round(t / dt))

    pending = sorted((step_of(t - psi0.time), int(k)) for t, k in forced)
    t_jump = psi0.time + next_jump_interval(n, params.lambda_rate, rng)
    t0 = psi0.time
    psi = psi0.copy()
    snaps = [psi.copy()]
    events = []

    def jumps_at(step_index, state):
        nonlocal t_jump
        fired = False
        while pending and pending[0][0] == step_index:
            _, k = pending.pop(0)
            state, ev = collapse(state, params.sigma, rng, k=k, forced=True)
            events.append(ev)
            fired = True
        while step_of(t_jump - t0) == step_index:
            state, ev = collapse(state, params.sigma, rng)
            events.append(ev)
            t_jump += next_jump_interval(n, params.lambda_rate, rng)
            fired = True
        return state, fired

    psi, fired = jumps_at(0, psi)
    if fired:
        snaps[0] = psi.copy()
    for s in range(1, n_steps + 1):
        prev = psi
        psi = WaveFunction(g, prop.apply(psi.amplitudes), t0 + s * dt)
        psi, fired = jumps_at(s, psi)
        if fired and bracket_events:
            if snaps[-1].time < prev.time:
                snaps.append(prev.copy())
            snaps.append(psi.copy())
        elif s % config.steps_per_output == 0 or s == n_steps:
            snaps.append(psi.copy())
    energies = [expectation_energy(x, potential, masses) for x in snaps] if track_energy else []
    return GrwRun(snaps, events, params, energies, n_steps)
