import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ontosim.errors import DegenerateRegion
from ontosim.grid import GridSpec, WaveFunction, gaussian_packet, marginal_density, normalize
from ontosim.grw import CollapseEvent, apply_collapse, run_grw
from ontosim.ontology import (
    FlashEvent,
    MatterDensityField,
    RegionPartition,
    flashes_from_events,
    matter_density,
    region_masses,
    structured_tails_report,
)
from ontosim.scenarios import build, load_bundled
from ontosim.schrodinger import PropagatorConfig


def _two_packets(a=6.0, s=0.7):
    g = GridSpec(1, -16.0, 16.0, 256)
    return normalize(WaveFunction(g, gaussian_packet(g.axis, -a, s) + gaussian_packet(g.axis, a, s)))


def test_single_particle_density():
    psi = _two_packets()
    m = matter_density(psi, [1.0])
    assert np.array_equal(m.values, psi.density())
    assert m.total == pytest.approx(1.0, abs=1e-12)


def test_symmetric_pair_density():
    spec = load_bundled("entangled_pair_grwm")
    psi, _, masses = build(spec)
    r1, r2 = marginal_density(psi, 0), marginal_density(psi, 1)
    assert np.abs(r1 - r2).max() < 1e-15
    m = matter_density(psi, masses)
    assert np.abs(m.values - 2 * masses[0] * r1).max() < 1e-15


def test_pair_density_brute_force():
    spec = load_bundled("entangled_pair_grwm")
    psi, _, _ = build(spec)
    masses = [1.0, 2.5]
    a = psi.amplitudes
    g = psi.grid
    n = g.points_per_axis
    dx = g.spacing
    direct = np.zeros(n)
    for i in range(n):
        direct[i] = masses[0] * sum(abs(a[i, j]) ** 2 for j in range(n)) * dx + masses[1] * sum(abs(a[j, i]) ** 2 for j in range(n)) * dx
    assert np.abs(matter_density(psi, masses).values - direct).max() < 1e-12


def test_flashes_identity():
    assert flashes_from_events([]) == []
    (f,) = flashes_from_events([CollapseEvent(1.0, 0, 0.5, 0.3)])
    assert (f.time, f.position) == (1.0, 0.5)
    assert isinstance(f, FlashEvent)


def test_flash_count_equals_event_count():
    spec = load_bundled("harmonic_trap_grwf")
    psi, V, m = build(spec)
    run = run_grw(psi, V, m, spec.t_final, spec.grw_params(), PropagatorConfig(spec.dt, 10**9))
    flashes = flashes_from_events(run.events)
    assert len(flashes) == len(run.events) > 0
    assert [f.time for f in flashes] == [e.time for e in run.events]


def test_region_masses_symmetric():
    psi = _two_packets()
    r = region_masses(matter_density(psi, [1.0]), RegionPartition.halves(psi.grid))
    assert r["left"] == pytest.approx(0.5, abs=1e-8)
    assert r["right"] == pytest.approx(0.5, abs=1e-8)


def test_region_masses_single_region():
    psi = _two_packets()
    g = psi.grid
    m = matter_density(psi, [3.0])
    r = region_masses(m, RegionPartition(("all",), (g.extent_min, g.extent_max)))
    assert r["all"] == pytest.approx(m.total, rel=1e-14)


def test_einstein_box_collapse_to_right():
    spec = load_bundled("einstein_box_grwm")
    psi, _, m = build(spec)
    a = spec.state_value("half_separation")
    after = apply_collapse(psi, 0, a, spec.grw_params().sigma)
    r = region_masses(matter_density(after, m), RegionPartition.halves(spec.grid))
    total = r["left"] + r["right"]
    assert r["right"] > 0.999 * total
    assert r["left"] > 0


def test_structured_tails_after_collapse():
    g = GridSpec(1, -16.0, 16.0, 1024)
    a = 12.0
    # the packets must be narrow against a: the Gaussian's slope over the
    # suppressed packet shifts it by about 2 s^2 ln(1e6) / a
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, -a, 0.15) + gaussian_packet(g.axis, a, 0.15)))
    # sigma chosen so the left remainder is exp(-(2a)^2 / (2 sigma^2)) = 1e-6 of the total
    sigma = 2 * a / np.sqrt(2 * np.log(1e6))
    after = apply_collapse(psi, 0, a, sigma)
    rep = structured_tails_report(matter_density(psi, [1.0]), matter_density(after, [1.0]), RegionPartition.halves(g))
    left = rep["regions"]["left"]
    assert rep["suppressed"] == "left"
    assert left["weight_after"] == pytest.approx(1e-6, rel=0.3)
    assert left["weight_ratio"] < 1e-5
    assert left["shape_correlation"] > 0.99


def test_tails_identity_and_scaling():
    psi = _two_packets()
    part = RegionPartition.halves(psi.grid)
    m = matter_density(psi, [1.0])
    rep = structured_tails_report(m, m, part)
    for r in rep["regions"].values():
        assert r["weight_ratio"] == pytest.approx(1.0, abs=1e-15)
        assert r["shape_correlation"] == pytest.approx(1.0, abs=1e-12)
    scaled = MatterDensityField(m.x, np.where(m.x >= 0, 2 * m.values, m.values))
    rep = structured_tails_report(m, scaled, part)
    assert rep["regions"]["right"]["weight_ratio"] == pytest.approx(2.0, rel=1e-14)
    assert rep["regions"]["right"]["shape_correlation"] == pytest.approx(1.0, abs=1e-12)


def test_tails_degenerate_region():
    g = GridSpec(1, -16.0, 16.0, 256)
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, 6.0, 0.7)))
    m = matter_density(psi, [1.0])
    with pytest.raises(DegenerateRegion):
        structured_tails_report(m, m, RegionPartition.halves(g))


def test_partition_validation():
    with pytest.raises(ValueError):
        RegionPartition(("a", "b"), (0.0, 1.0))
    with pytest.raises(ValueError):
        RegionPartition(("a", "b"), (0.0, 2.0, 1.0))
    with pytest.raises(ValueError):
        RegionPartition.from_intervals([("a", 0.0, 1.0), ("b", 1.5, 2.0)])
    p = RegionPartition.from_intervals([("b", 1.0, 2.0), ("a", 0.0, 1.0)])
    assert p.names == ("a", "b")
    assert p.labels([0.0, 1.0, 1.99, 2.0, -1.0]).tolist() == [0, 1, 1, -1, -1]
    with pytest.raises(ValueError):
        p.check_covers(GridSpec(1, 0.0, 3.0, 8))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-7.9, 7.9), min_size=1, max_size=5, unique=True), st.integers(0, 2**31))
def test_region_masses_sum_to_total(cuts, seed):
    g = GridSpec(1, -8.0, 8.0, 64)
    edges = (g.extent_min, *sorted(cuts), g.extent_max)
    part = RegionPartition(tuple(f"r{i}" for i in range(len(edges) - 1)), edges)
    vals = np.random.default_rng(seed).random(64)
    m = MatterDensityField(g.axis, vals)
    assert sum(region_masses(m, part).values()) == pytest.approx(m.total, rel=1e-12)
