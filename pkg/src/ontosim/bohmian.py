"""Particle trajectories driven by the guiding equation.

Velocities are ``v_k = Im(psi* d_k psi / |psi|^2) / m_k`` evaluated at the
actual configuration, using spectral gradients per wave snapshot and
multilinear interpolation between grid points.  Positions advance by
classical RK4 on the snapshots at ``t``, ``t + dt/2`` and ``t + dt``.

Where the interpolated density falls below ``NODE_EPS * max|psi|^2`` the
velocity is frozen at its last finite value and the step is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NodeRegion
from .grid import PotentialField, WaveFunction, check_masses, marginal_density
from .schrodinger import PropagatorConfig, SplitStepPropagator, n_steps_for
from .stats import GofReport, RngStream, chi_square_gof, histogram

NODE_EPS = 1e-12


@dataclass
class ParticleConfiguration:
    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(self.positions, dtype=float))


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (n_samples, N)
    seed: int
    index: int
    node_steps: int = 0

    def configuration(self, i: int) -> ParticleConfiguration:
        return ParticleConfiguration(self.positions[i].copy(), float(self.times[i]))

    def __len__(self):
        return len(self.times)


class GuidanceField:
    """Interpolation-ready ``psi`` and ``grad psi`` for a single snapshot."""

    def __init__(self, psi: WaveFunction, masses, backend: str | None = None):
        g = psi.grid
        self.grid = g
        self.time = psi.time
        self.inv_mass = 1.0 / check_masses(masses, g.n_particles)
        self.backend = backend
        a = psi.amplitudes
        ahat = np.fft.fftn(a)
        grads = np.empty((g.ndim, g.size), dtype=np.complex128)
        k = 1j * g.wavenumbers
        # the Nyquist mode has no sign-consistent first derivative; dropping it
        # keeps the gradient of a real function real
        k[g.points_per_axis // 2] = 0.0
        for j in range(g.ndim):
            shape = [1] * g.ndim
            shape[j] = g.points_per_axis
            grads[j] = np.fft.ifftn(ahat * k.reshape(shape)).ravel()
        self.psi = np.ascontiguousarray(a.ravel())
        self.grads = grads
        self.eps = NODE_EPS * float((np.abs(a) ** 2).max())

    def velocities(self, q) -> tuple[np.ndarray, np.ndarray]:
        """Velocities ``(n, N)`` and node mask ``(n,)`` at configurations ``q`` of shape ``(n, N)``."""
        g = self.grid
        return kernels.guidance(
            self.psi, self.grads, g.points_per_axis, g.extent_min, g.spacing, self.inv_mass, self.eps, q, self.backend
        )


def velocity_field(psi: WaveFunction, q, masses) -> np.ndarray:
    """Guiding-equation velocities at one configuration (shape ``(N,)``) or a batch ``(n, N)``.

    Raises :class:`NodeRegion` if any configuration sits where ``|psi|^2`` vanishes.
    """
    q = np.asarray(q, dtype=float)
    batch = q.reshape(-1, psi.grid.n_particles)
    v, node = GuidanceField(psi, masses).velocities(batch)
    if node.any():
        raise NodeRegion(f"{int(node.sum())} configuration(s) in a node region", positions=batch[node])
    return v.reshape(q.shape)


def _rk4(fields, q, dt, last_v, flags):
    f0, fm, f1 = fields

    def stage(f, x):
        v, node = f.velocities(x)
        if node.any():
            v[node] = last_v[node]
            flags[node] = True
        last_v[...] = v
        return v

    k1 = stage(f0, q)
    k2 = stage(fm, q + 0.5 * dt * k1)
    k3 = stage(fm, q + 0.5 * dt * k2)
    k4 = stage(f1, q + dt * k3)
    return q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def advance_configuration(psi_t, psi_mid, psi_next, q, dt: float, masses):
    """One RK4 step of the guiding equation; raises :class:`NodeRegion` on a node encounter."""
    fields = [GuidanceField(p, masses) for p in (psi_t, psi_mid, psi_next)]
    q = np.asarray(q, dtype=float)
    batch = q.reshape(-1, psi_t.grid.n_particles)
    flags = np.zeros(len(batch), dtype=bool)
    last_v = np.zeros_like(batch)
    out = _rk4(fields, batch, dt, last_v, flags)
    if flags.any():
        raise NodeRegion(
            f"node region met during step from t={psi_t.time:g}", positions=batch[flags]
        )
    return psi_t.grid.wrap(out).reshape(q.shape)


def sample_initial_positions(psi0: WaveFunction, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` configurations i.i.d. from ``|psi0|^2``; returns shape ``(count, N)``.

    A grid cell (centered on its grid point) is chosen by inverse CDF of the
    cell masses, then the position is jittered uniformly inside the cell.
    Sample ``i`` depends only on ``(seed, i)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    g = psi0.grid
    cdf = np.cumsum(psi0.density().ravel())
    u = RngStream(seed, "initial-positions").random((count, 1 + g.ndim))
    cell = np.searchsorted(cdf, u[:, 0] * cdf[-1], side="right")
    cell = np.minimum(cell, g.size - 1)
    idx = np.stack(np.unravel_index(cell, g.shape), axis=1)
    q = g.extent_min + (idx + u[:, 1:] - 0.5) * g.spacing
    return g.wrap(q)


@dataclass
class Ensemble:
    """Trajectories of an ensemble sharing one wave evolution.

    ``positions[i, j]`` is the configuration of trajectory ``j`` at ``times[i]``.
    Iterating yields :class:`Trajectory` objects.
    """

    times: np.ndarray
    positions: np.ndarray
    seed: int
    node_steps: np.ndarray
    snapshots: list = field(default_factory=list)
    n_steps: int = 0

    def __len__(self):
        return self.positions.shape[1]

    def __getitem__(self, j: int) -> Trajectory:
        return Trajectory(self.times, self.positions[:, j, :], self.seed, j, int(self.node_steps[j]))

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    def report(self) -> dict:
        flagged = self.node_steps > 0
        return {
            "seed": self.seed,
            "n_trajectories": len(self),
            "n_steps": self.n_steps,
            "n_outputs": len(self.times),
            "node_fallback": {
                "trajectories_flagged": int(flagged.sum()),
                "flagged_steps_total": int(self.node_steps.sum()),
                "max_flagged_steps": int(self.node_steps.max(initial=0)),
            },
        }


def run_ensemble(
    psi0: WaveFunction,
    potential: PotentialField,
    masses,
    t_final: float,
    n_traj: int,
    seed: int,
    config: PropagatorConfig | None = None,
    backend: str | None = None,
) -> Ensemble:
    """Sample ``n_traj`` initial configurations from ``|psi0|^2`` and integrate them to ``t_final``.

    The wave function is propagated once with step ``dt``; the midpoint state
    for RK4 comes from a separate half step off the same ``psi_t``, so the main
    wave sequence matches :func:`ontosim.schrodinger.evolve` bit for bit.
    """
    config = config or PropagatorConfig()
    dt = config.dt
    n_steps = n_steps_for(t_final, dt)
    full = SplitStepPropagator(potential, masses, dt)
    half = SplitStepPropagator(potential, masses, dt / 2)
    g = psi0.grid
    q = sample_initial_positions(psi0, n_traj, seed)
    t0 = psi0.time
    a = psi0.amplitudes.copy()
    times = [t0]
    out = [q.copy()]
    snaps = [WaveFunction(g, a.copy(), t0)]
    last_v = np.zeros_like(q)
    node_steps = np.zeros(n_traj, dtype=np.int64)
    f_t = GuidanceField(snaps[0], masses, backend)
    for n in range(1, n_steps + 1):
        t_prev = t0 + (n - 1) * dt
        mid = WaveFunction(g, half.apply(a), t_prev + dt / 2)
        a = full.apply(a)
        nxt = WaveFunction(g, a, t0 + n * dt)
        f_m = GuidanceField(mid, masses, backend)
        f_n = GuidanceField(nxt, masses, backend)
        flags = np.zeros(n_traj, dtype=bool)
        q = g.wrap(_rk4((f_t, f_m, f_n), q, dt, last_v, flags))
        node_steps += flags
        f_t = f_n
        if n % config.steps_per_output == 0 or n == n_steps:
            times.append(nxt.time)
            out.append(q.copy())
            snaps.append(WaveFunction(g, a.copy(), nxt.time))
    return Ensemble(np.array(times), np.stack(out), seed, node_steps, snaps, n_steps)


def cell_marginal_cdf(psi: WaveFunction, k: int = 0):
    """CDF of particle ``k`` under the cell model used for sampling.

    Returns ``(to_cell, cdf)``: a function mapping positions to continuous
    cell coordinates ``u`` in ``[0, M)`` (cell ``i`` spans ``[i, i+1)`` and is
    centered on grid point ``i``), and the cumulative masses at the integer
    cell boundaries ``0..M``.  The CDF is linear inside each cell.
    """
    g = psi.grid
    rho = marginal_density(psi, k) * g.spacing
    cdf = np.concatenate([[0.0], np.cumsum(rho)])
    cdf /= cdf[-1]

    def to_cell(x):
        return np.mod((np.asarray(x, dtype=float) - g.extent_min) / g.spacing + 0.5, g.points_per_axis)

    return to_cell, cdf


def equivariance_test(positions, psi: WaveFunction, k: int = 0, bins: int = 32) -> GofReport:
    """Chi-square test of particle-``k`` positions against the ``|psi|^2`` marginal.

    Bins are equiprobable under the marginal, so every bin expects ``n / bins`` samples.
    """
    to_cell, cdf = cell_marginal_cdf(psi, k)
    targets = np.linspace(0, 1, bins + 1)[1:-1]
    cells = np.arange(cdf.size, dtype=float)
    inner = np.interp(targets, cdf, cells)
    edges = np.concatenate([[0.0], inner, [float(psi.grid.points_per_axis)]])
    edges = np.maximum.accumulate(edges)
    if not np.all(np.diff(edges) > 0):
        raise ValueError("marginal too concentrated for the requested number of bins")
    u = to_cell(np.asarray(positions)[..., k] if np.ndim(positions) > 1 else positions)
    hist = histogram(u, edges)
    probs = np.diff(np.interp(edges, cells, cdf))
    probs /= probs.sum()
    rep = chi_square_gof(hist.counts, probs)
    g = psi.grid
    rep.bin_edges = list(g.extent_min + (edges - 0.5) * g.spacing)
    return rep
