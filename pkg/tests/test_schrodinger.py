import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ontosim.grid import GridSpec, PotentialField, WaveFunction, gaussian_packet, norm_squared, normalize
from ontosim.schrodinger import (
    PropagatorConfig,
    SplitStepPropagator,
    analytic_coherent_state,
    analytic_free_gaussian,
    evolve,
    free_gaussian_width,
    l2_distance,
    n_steps_for,
    step,
    write_snapshots,
)


def _centroid(psi):
    rho = psi.density()
    return float((psi.grid.axis * rho).sum() / rho.sum())


def _width(psi):
    rho = psi.density() / psi.density().sum()
    mu = (psi.grid.axis * rho).sum()
    return float(np.sqrt(((psi.grid.axis - mu) ** 2 * rho).sum()))


def test_free_step_moves_centroid():
    g = GridSpec(1, -30.0, 30.0, 512)
    k0, m, dt = 1.5, 1.0, 0.05
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, 0.0, 2.0, k0)))
    x0 = _centroid(psi)
    for n in range(1, 21):
        psi = step(psi, PotentialField.free(g), [m], dt)
        # centroid of the closed-form solution is x0 + k0 t / m
        assert _centroid(psi) == pytest.approx(x0 + k0 / m * n * dt, abs=1e-9)


def test_constant_potential_is_global_phase():
    g = GridSpec(1, -10.0, 10.0, 128)
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, 0.5, 1.0, 1.0)))
    free = step(psi, PotentialField.free(g), [1.0], 0.01)
    c = 2.7
    shifted = step(psi, PotentialField(g, np.full(g.shape, c)), [1.0], 0.01)
    assert np.abs(shifted.density() - free.density()).max() < 1e-12
    assert np.allclose(shifted.amplitudes, np.exp(-1j * c * 0.01) * free.amplitudes, atol=1e-14)


def test_coherent_state_quarter_period():
    g = GridSpec(1, -16.0, 16.0, 256)
    omega, m = 1.0, 1.0
    t = np.pi / 2
    psi0 = analytic_coherent_state(g, 3.0, 0.0, omega, m, 0.0)
    out = evolve(psi0, PotentialField.harmonic(g, omega, m), [m], t, PropagatorConfig(1e-3, 10**9))[-1]
    exact = analytic_coherent_state(g, 3.0, 0.0, omega, m, out.time)
    assert np.abs(out.density() - exact.density()).max() < 1e-6
    # the packet is the ground-state Gaussian translated to the classical position
    assert _centroid(out) == pytest.approx(3.0 * np.cos(out.time), abs=1e-5)


def test_coherent_state_oracle_solves_equation():
    # closed form satisfies i dpsi/dt = H psi (finite difference in time)
    g = GridSpec(1, -16.0, 16.0, 256)
    h = 1e-5
    a = analytic_coherent_state(g, 1.0, 2.0, 1.0, 1.0, 0.7 - h).amplitudes
    b = analytic_coherent_state(g, 1.0, 2.0, 1.0, 1.0, 0.7 + h).amplitudes
    c = analytic_coherent_state(g, 1.0, 2.0, 1.0, 1.0, 0.7)
    lap = np.fft.ifft(-(g.wavenumbers**2) * np.fft.fft(c.amplitudes))
    h_psi = -0.5 * lap + 0.5 * g.axis**2 * c.amplitudes
    assert np.abs(1j * (b - a) / (2 * h) - h_psi).max() < 1e-6


def test_second_order_in_trap():
    g = GridSpec(1, -16.0, 16.0, 256)
    psi0 = analytic_coherent_state(g, 2.0, 1.0, 1.0, 1.0, 0.0)
    V = PotentialField.harmonic(g, 1.0, 1.0)
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        out = evolve(psi0, V, [1.0], 2.0, PropagatorConfig(dt, 10**9))[-1]
        errs.append(l2_distance(out, analytic_coherent_state(g, 2.0, 1.0, 1.0, 1.0, 2.0)))
    for a, b in zip(errs, errs[1:]):
        assert 3.5 < a / b < 4.5


def test_evolve_zero_time():
    g = GridSpec(1, -5.0, 5.0, 32)
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, 0.0, 1.0)))
    snaps = evolve(psi, PotentialField.free(g), [1.0], 0.0)
    assert len(snaps) == 1
    assert np.array_equal(snaps[0].amplitudes, psi.amplitudes)
    assert snaps[0].amplitudes is not psi.amplitudes


def test_evolve_cadence_and_times():
    g = GridSpec(1, -5.0, 5.0, 32)
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, 0.0, 1.0)))
    snaps = evolve(psi, PotentialField.free(g), [1.0], 0.05, PropagatorConfig(0.01, 2))
    assert [round(s.time, 12) for s in snaps] == [0.0, 0.02, 0.04, 0.05]


def test_free_gaussian_width_at_two():
    g = GridSpec(1, -20.0, 20.0, 512)
    psi0 = WaveFunction(g, gaussian_packet(g.axis, 0.0, 1.0))
    out = evolve(psi0, PotentialField.free(g), [1.0], 2.0, PropagatorConfig(1e-3, 10**9))[-1]
    assert free_gaussian_width(1.0, 1.0, 2.0) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert _width(out) == pytest.approx(np.sqrt(2), abs=1e-4)


def test_free_evolution_matches_closed_form():
    g = GridSpec(1, -20.0, 20.0, 512)
    psi0 = WaveFunction(g, gaussian_packet(g.axis, -2.0, 1.0, 1.0))
    out = evolve(psi0, PotentialField.free(g), [1.0], 2.0, PropagatorConfig(1e-2, 10**9))[-1]
    assert l2_distance(out, analytic_free_gaussian(g, -2.0, 1.0, 1.0, 1.0, 2.0)) < 1e-10


def test_analytic_gaussian_initial_condition():
    g = GridSpec(1, -10.0, 10.0, 256)
    a = analytic_free_gaussian(g, 1.0, 0.5, 0.8, 1.0, 0.0)
    assert np.allclose(a.amplitudes, gaussian_packet(g.axis, 1.0, 0.8, 0.5), atol=1e-15)
    assert _width(a) == pytest.approx(0.8, abs=1e-10)


def test_analytic_gaussian_parity():
    g = GridSpec(1, -10.0, 10.0, 256)
    d = analytic_free_gaussian(g, 0.0, 0.0, 0.7, 1.3, 3.1).density()
    # grid point 0 (x = -10) has no mirror; the rest are symmetric about 0
    assert np.abs(d[1:] - d[1:][::-1]).max() < 1e-15


def test_peak_halves_when_width_doubles():
    s0, m = 0.9, 1.2
    t = 2 * m * s0**2 * np.sqrt(3)
    assert free_gaussian_width(s0, m, t) == pytest.approx(2 * s0, rel=1e-14)
    g = GridSpec(1, -10.0, 10.0, 256)
    p0 = analytic_free_gaussian(g, 0.0, 0.0, s0, m, 0.0).density()[128]
    p1 = analytic_free_gaussian(g, 0.0, 0.0, s0, m, t).density()[128]
    assert p0 / p1 == pytest.approx(2.0, abs=1e-12)


def test_snapshot_index(tmp_path):
    g = GridSpec(1, -5.0, 5.0, 32)
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, 0.0, 1.0)))
    snaps = evolve(psi, PotentialField.free(g), [1.0], 0.03, PropagatorConfig(0.01, 1), out_dir=tmp_path)
    idx = json.loads((tmp_path / "index.json").read_text())
    assert [e["file"] for e in idx["snapshots"]] == [f"psi_{i:05d}.onto" for i in range(4)]
    assert len(snaps) == 4


def test_n_steps_for():
    assert n_steps_for(1.0, 1e-3) == 1000
    with pytest.raises(ValueError):
        n_steps_for(-1.0, 0.1)


def test_bad_config():
    with pytest.raises(ValueError):
        PropagatorConfig(dt=0.0)
    with pytest.raises(ValueError):
        PropagatorConfig(split_order="yoshida")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 0.5))
def test_step_is_unitary(seed, dt):
    rng = np.random.default_rng(seed)
    g = GridSpec(2, -3.0, 3.0, 16)
    psi = normalize(WaveFunction(g, rng.normal(size=g.size) + 1j * rng.normal(size=g.size)))
    V = PotentialField(g, rng.uniform(-5, 5, size=g.shape))
    out = SplitStepPropagator(V, [1.0, 2.5], dt).step(psi)
    assert norm_squared(out) == pytest.approx(1.0, abs=1e-12)
