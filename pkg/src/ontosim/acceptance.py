"""Acceptance criteria as runnable checks.

Each ``criterion_N(scale)`` returns a :class:`CriterionResult`.  The ``full``
scale runs every check at its stated size; ``fast`` trims the ensemble and
seed counts of the statistical checks (tolerances are unchanged).
"""

from __future__ import annotations

import hashlib
import tempfile
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bohmian import equivariance_test, run_ensemble, velocity_field
from .grid import (
    GridSpec,
    PotentialField,
    WaveFunction,
    expectation_energy,
    gaussian_packet,
    marginal_density,
    norm_squared,
    normalize,
)
from .grw import apply_collapse, collapse, collapse_center_distribution, run_grw, sample_collapse_center
from .ontology import RegionPartition, matter_density, region_masses, structured_tails_report
from .scenarios import build, load_bundled
from .schrodinger import PropagatorConfig, analytic_coherent_state, analytic_free_gaussian, evolve, l2_distance
from .stats import RngStream, binomial_within, chi_square_gof, majority_pass, poisson_count_test, sign_test

SUITES = ("fast", "full")


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:>2} {self.name:<32} {self.seconds:7.1f}s  {self.detail}"


def _scale(scale: str, full, fast):
    if scale not in SUITES:
        raise ValueError(f"unknown suite {scale!r}")
    return full if scale == "full" else fast


# -- 1 ---------------------------------------------------------------------------


def criterion_1(scale: str = "full") -> CriterionResult:
    """Norm and energy conservation over 10^4 steps on the double-well state."""
    t0 = time.perf_counter()
    spec = load_bundled("einstein_box_schrodinger")
    psi0, V, m = build(spec)
    n_steps = 10_000
    snaps = evolve(psi0, V, m, n_steps * spec.dt, PropagatorConfig(spec.dt, 100))
    e0 = expectation_energy(psi0, V, m)
    norm_dev = max(abs(np.sqrt(norm_squared(s)) - 1) for s in snaps)
    drift = max(abs(expectation_energy(s, V, m) - e0) for s in snaps) / abs(e0)
    secs = time.perf_counter() - t0
    ok = norm_dev < 1e-10 and drift < 1e-8 and secs < 30
    detail = f"|norm-1|={norm_dev:.2e} (<1e-10), dE/E={drift:.2e} (<1e-8), {secs:.1f}s (<30s)"
    return CriterionResult(1, "unitarity/energy conservation", ok, detail, {"norm_deviation": norm_dev, "energy_drift": drift}, secs)


# -- 2 ---------------------------------------------------------------------------


def free_gaussian_errors():
    """Width at t=2 and L2 errors against the closed form at dt and dt/2."""
    g = GridSpec(1, -20.0, 20.0, 512)
    s0, m, t = 1.0, 1.0, 2.0
    psi0 = WaveFunction(g, gaussian_packet(g.axis, 0.0, s0))
    exact = analytic_free_gaussian(g, 0.0, 0.0, s0, m, t)
    errs = []
    width = None
    for dt in (1e-3, 5e-4):
        psi = evolve(psi0, PotentialField.free(g), [m], t, PropagatorConfig(dt, 10**9))[-1]
        errs.append(l2_distance(psi, exact))
        if width is None:
            rho = psi.density() / norm_squared(psi)
            mean = (g.axis * rho).sum() * g.spacing
            width = float(np.sqrt(((g.axis - mean) ** 2 * rho).sum() * g.spacing))
    return width, errs


def coherent_state_errors(dts=(1e-2, 5e-3)):
    """L2 errors of the coherent state in a trap, where splitting error is non-zero."""
    g = GridSpec(1, -16.0, 16.0, 256)
    omega, m, x0, p0, t = 1.0, 1.0, 2.0, 1.0, 2.0
    psi0 = analytic_coherent_state(g, x0, p0, omega, m, 0.0)
    exact = analytic_coherent_state(g, x0, p0, omega, m, t)
    V = PotentialField.harmonic(g, omega, m)
    return [l2_distance(evolve(psi0, V, [m], t, PropagatorConfig(dt, 10**9))[-1], exact) for dt in dts]


def criterion_2_width() -> tuple[bool, str, dict]:
    width, errs = free_gaussian_errors()
    ok = abs(width - np.sqrt(2)) < 1e-4
    return ok, f"s(2)={width:.8f} vs sqrt2 (+-1e-4)", {"width": width, "l2_errors": errs}


def criterion_2_convergence() -> tuple[bool, str, dict]:
    _, errs = free_gaussian_errors()
    ratio = errs[0] / errs[1]
    ok = 3.5 <= ratio <= 4.5
    ce = coherent_state_errors()
    detail = (
        f"free L2 err {errs[0]:.1e}->{errs[1]:.1e}, ratio {ratio:.2f} (want 3.5-4.5; "
        f"splitting is exact for V=0, errors are round-off); trap coherent-state ratio {ce[0] / ce[1]:.2f}"
    )
    return ok, detail, {"ratio": ratio, "l2_errors": errs, "coherent_ratio": ce[0] / ce[1]}


def criterion_2(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    ok_w, d_w, m_w = criterion_2_width()
    ok_c, d_c, m_c = criterion_2_convergence()
    return CriterionResult(
        2, "analytic free propagation", ok_w and ok_c, f"{d_w}; {d_c}", {**m_w, **m_c}, time.perf_counter() - t0
    )


# -- 3 ---------------------------------------------------------------------------

EQUIVARIANCE_SEEDS = (1, 2, 3)


def criterion_3(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    n_traj = _scale(scale, 10_000, 3_000)
    spec = load_bundled("double_slit_bohm")
    psi0, V, m = build(spec)
    cfg = PropagatorConfig(spec.dt, 10**9)
    pvals = []
    for seed in EQUIVARIANCE_SEEDS:
        ens = run_ensemble(psi0, V, m, spec.t_final, n_traj, seed, cfg)
        pvals.append(equivariance_test(ens.positions[-1], ens.snapshots[-1], 0, 32).p_value)
    secs = time.perf_counter() - t0
    ok = majority_pass(p > 0.01 for p in pvals) and secs < 180
    detail = f"{n_traj} traj, 32 bins, p={', '.join(f'{p:.3f}' for p in pvals)} (>0.01 on 2/3), {secs:.0f}s (<180s)"
    return CriterionResult(3, "Bohmian equivariance", ok, detail, {"p_values": pvals}, secs)


# -- 4 ---------------------------------------------------------------------------


def guidance_identities() -> dict:
    out = {}
    # plane wave commensurate with the period
    g = GridSpec(1, -8.0, 8.0, 64)
    k0 = 2 * np.pi * 3 / g.length
    psi = WaveFunction(g, np.exp(1j * k0 * g.axis) / np.sqrt(g.length))
    q = RngStream(4, "plane-wave").random((50, 1)) * g.length + g.extent_min
    out["plane_wave_error"] = float(np.abs(velocity_field(psi, q, [1.0]) - k0).max())
    # real wave function: superposition of real Gaussians
    psi = normalize(WaveFunction(g, gaussian_packet(g.axis, -1.0, 1.0) - 0.5 * gaussian_packet(g.axis, 1.5, 0.7)))
    q = np.linspace(-3.0, 3.0, 41)[:, None]
    q = q[np.abs(q[:, 0] - 0.9) > 0.3]  # keep clear of the node near x ~ 1
    out["real_velocity_max"] = float(np.abs(velocity_field(psi, q, [1.0])).max())
    # two particles: product state vs entangled state, v_1 at fixed x1 while x2 moves
    g2 = GridSpec(2, -12.0, 12.0, 64)
    f = gaussian_packet(g2.axis, -4.0, 1.5, -1.0)
    h = gaussian_packet(g2.axis, 4.0, 1.5, 1.0)
    x2 = np.linspace(-5.0, 5.0, 21)
    q2 = np.column_stack([np.full_like(x2, 0.3), x2])
    prod = normalize(WaveFunction(g2, np.multiply.outer(f, h)))
    ent = normalize(WaveFunction(g2, np.multiply.outer(f, h) + np.multiply.outer(h, f)))
    v_prod = velocity_field(prod, q2, [1.0, 1.0])[:, 0]
    v_ent = velocity_field(ent, q2, [1.0, 1.0])[:, 0]
    out["product_variation"] = float(np.ptp(v_prod))
    out["entangled_variation"] = float(np.ptp(v_ent))
    return out


def criterion_4(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    r = guidance_identities()
    ok = (
        r["plane_wave_error"] < 1e-8
        and r["real_velocity_max"] < 1e-10
        and r["product_variation"] < 1e-9
        and r["entangled_variation"] > 1e-3
    )
    detail = (
        f"plane {r['plane_wave_error']:.1e} (<1e-8), real {r['real_velocity_max']:.1e} (<1e-10), "
        f"product dv1 {r['product_variation']:.1e} (<1e-9), entangled dv1 {r['entangled_variation']:.2f} (>1e-3)"
    )
    return CriterionResult(4, "guiding-equation identities", ok, detail, r, time.perf_counter() - t0)


# -- 5 ---------------------------------------------------------------------------


def _random_state(rng: RngStream, g: GridSpec) -> WaveFunction:
    a = np.zeros(g.shape, dtype=complex)
    for _ in range(1 + int(rng.integers(0, 3))):
        term = np.ones((), dtype=complex)
        for _ in range(g.n_particles):
            c = g.extent_min + g.length * (0.25 + 0.5 * rng.random())
            w = 0.3 + 1.5 * rng.random()
            term = np.multiply.outer(term, gaussian_packet(g.axis, c, w, 4 * (rng.random() - 0.5)))
        a = a + (rng.random() + 1j * rng.random()) * term
    return normalize(WaveFunction(g, a))


def collapse_norm_deviation(cases: int = 1000) -> float:
    rng = RngStream(5, "collapse-norm")
    grids = [GridSpec(1, -10.0, 10.0, 128), GridSpec(2, -8.0, 8.0, 32)]
    worst = 0.0
    for i in range(cases):
        g = grids[i % 2]
        psi = _random_state(rng, g)
        sigma = 10 ** (-0.5 + 2 * rng.random())
        after, _ = collapse(psi, sigma, rng)
        worst = max(worst, abs(np.sqrt(norm_squared(after)) - 1))
    return worst


def two_packet_state() -> WaveFunction:
    g = GridSpec(1, -16.0, 16.0, 256)
    return normalize(WaveFunction(g, gaussian_packet(g.axis, -5.0, 1.0) + 0.6 * gaussian_packet(g.axis, 4.0, 1.5, 2.0)))


def collapse_center_gof(n: int = 10_000, sigma: float = 1.0):
    psi = two_packet_state()
    rng = RngStream(5, "collapse-centers")
    g = psi.grid
    xs = np.array([sample_collapse_center(psi, 0, sigma, rng)[0] for _ in range(n)])
    idx = np.rint((xs - g.extent_min) / g.spacing).astype(int)
    counts = np.bincount(idx, minlength=g.points_per_axis)
    probs = collapse_center_distribution(psi, 0, sigma) * g.spacing
    return chi_square_gof(counts, probs)


def wide_collapse_deviation() -> float:
    psi = two_packet_state()
    after = apply_collapse(psi, 0, 0.3, 1e6 * psi.grid.length)
    return float(np.abs(after.amplitudes - psi.amplitudes).max())


def criterion_5(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    dev = collapse_norm_deviation(1000)
    gof = collapse_center_gof(10_000)
    wide = wide_collapse_deviation()
    ok = dev < 1e-12 and gof.p_value > 0.01 and wide < 1e-8
    detail = f"|norm-1|max={dev:.1e} (<1e-12, 1e3 cases), centers p={gof.p_value:.3f} (>0.01), wide sigma {wide:.1e} (<1e-8)"
    return CriterionResult(
        5, "collapse rule", ok, detail, {"norm_deviation": dev, "center_p": gof.p_value, "wide_deviation": wide}, time.perf_counter() - t0
    )


# -- 6 ---------------------------------------------------------------------------

POISSON_META_SEEDS = (101, 202, 303)


def jump_counts(meta_seed: int, runs: int):
    """Event counts of ``runs`` independent GRWf runs of the scaled-rate trap."""
    spec = load_bundled("harmonic_trap_grwf")
    psi0, V, m = build(spec)
    seeds = RngStream(meta_seed, "poisson-runs").integers(0, 2**62, size=runs)
    base = spec.grw_params()
    counts = []
    for s in seeds:
        params = type(base)(base.lambda_rate, base.sigma, int(s))
        run = run_grw(psi0, V, m, spec.t_final, params, PropagatorConfig(spec.dt, 10**9))
        counts.append(len(run.events))
    # jump times are snapped to the nearest step, so the counting window is [0, t_final + dt/2)
    mu = spec.grid.n_particles * base.lambda_rate * (spec.t_final + spec.dt / 2)
    return np.array(counts), mu


def criterion_6(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    runs = _scale(scale, 200, 60)
    pvals, means = [], []
    for meta in POISSON_META_SEEDS:
        counts, mu = jump_counts(meta, runs)
        pvals.append(poisson_count_test(counts, mu).p_value)
        means.append(float(counts.mean()))
    ok = majority_pass(p > 0.01 for p in pvals)
    detail = (
        f"{runs} runs x 3 meta-seeds, expected {mu:.2f}/run, means {', '.join(f'{x:.2f}' for x in means)}, "
        f"p={', '.join(f'{p:.3f}' for p in pvals)} (>0.01 on 2/3)"
    )
    return CriterionResult(6, "jump statistics (rate N*lambda)", ok, detail, {"p_values": pvals, "means": means}, time.perf_counter() - t0)


# -- 7 and 8 ---------------------------------------------------------------------


def bohm_half_box_violations() -> tuple[int, int]:
    spec = load_bundled("einstein_box_bohm")
    psi0, V, m = build(spec)
    ens = run_ensemble(psi0, V, m, spec.t_final, spec.n_traj, spec.seed, PropagatorConfig(spec.dt, spec.steps_per_output))
    labels = RegionPartition.halves(spec.grid).labels(ens.positions[..., 0])
    return int(np.any(labels != labels[0], axis=0).sum()), len(ens)


@lru_cache(maxsize=4)
def einstein_box_grwm_runs(n_seeds: int) -> tuple:
    """Per-seed outcome records of the forced-collapse Einstein's box run."""
    spec = load_bundled("einstein_box_grwm")
    psi0, V, m = build(spec)
    base = spec.grw_params()
    part = RegionPartition.halves(spec.grid)
    t_meas = spec.grw["measurement_time"]
    out = []
    for seed in range(n_seeds):
        params = type(base)(base.lambda_rate, base.sigma, seed)
        run = run_grw(psi0, V, m, spec.t_final, params, PropagatorConfig(spec.dt, spec.steps_per_output),
                      forced=((t_meas, 0),), bracket_events=True)
        series = [region_masses(matter_density(s, m), part) for s in run.snapshots]
        times = [s.time for s in run.snapshots]
        i_after = next(i for i, t in enumerate(times) if t >= t_meas - spec.dt / 2)
        before, after = run.snapshots[i_after - 1], run.snapshots[i_after]
        tails = structured_tails_report(matter_density(before, m), matter_density(after, m), part)
        sup = tails["suppressed"]
        total = sum(series[i_after].values())
        out.append(
            {
                "right": series[-1]["right"] > series[-1]["left"],
                "dominant_fraction": max(series[-1].values()) / sum(series[-1].values()),
                "max_step_jump": max(abs(b["left"] - a["left"]) for a, b in zip(series, series[1:])),
                "step_dt": after.time - before.time,
                "suppressed_fraction": tails["regions"][sup]["weight_after"] / total,
                "suppressed_shape_correlation": tails["regions"][sup]["shape_correlation"],
            }
        )
    return tuple(out)


def criterion_7(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    n_seeds = _scale(scale, 200, 100)
    violations, n_traj = bohm_half_box_violations()
    runs = einstein_box_grwm_runs(n_seeds)
    n_right = sum(r["right"] for r in runs)
    min_dom = min(r["dominant_fraction"] for r in runs)
    min_jump = min(r["max_step_jump"] for r in runs)
    secs = time.perf_counter() - t0
    ok = violations == 0 and min_dom > 0.999 and binomial_within(n_right, n_seeds) and min_jump > 0.4 and secs < 300
    detail = (
        f"Bohm: {violations}/{n_traj} switch half (0); GRWm {n_seeds} seeds: dominant half >= {min_dom:.6f} (>0.999), "
        f"right {n_right}/{n_seeds} (0.5+-3sd), min one-step jump {min_jump:.3f} (>0.4), {secs:.0f}s (<300s)"
    )
    return CriterionResult(
        7, "Einstein's box contrast", ok, detail,
        {"bohm_violations": violations, "right": n_right, "min_dominant": min_dom, "min_jump": min_jump}, secs,
    )


def criterion_8(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    n_seeds = _scale(scale, 200, 100)
    runs = einstein_box_grwm_runs(n_seeds)
    lo = min(r["suppressed_fraction"] for r in runs)
    hi = max(r["suppressed_fraction"] for r in runs)
    corr = min(r["suppressed_shape_correlation"] for r in runs)
    ok = lo > 0 and hi < 1e-4 and corr > 0.99
    detail = f"{n_seeds} seeds: suppressed mass in [{lo:.1e}, {hi:.1e}] (>0, <1e-4), min shape corr {corr:.4f} (>0.99)"
    return CriterionResult(8, "bare and structured tails", ok, detail, {"min": lo, "max": hi, "min_corr": corr}, time.perf_counter() - t0)


# -- 9 ---------------------------------------------------------------------------


def mean_energy_series(n_seeds: int):
    spec = load_bundled("harmonic_trap_grwm")
    psi0, V, m = build(spec)
    base = spec.grw_params()
    cfg = PropagatorConfig(spec.dt, spec.steps_per_output)
    series = []
    for seed in range(n_seeds):
        run = run_grw(psi0, V, m, spec.t_final, type(base)(base.lambda_rate, base.sigma, seed), cfg, track_energy=True)
        series.append(run.energies)
    times = [s.time for s in run.snapshots]
    return np.array(times), np.mean(series, axis=0)


def criterion_9(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    n_seeds = _scale(scale, 100, 50)
    times, mean_e = mean_energy_series(n_seeds)
    rep = sign_test(np.diff(mean_e))
    ok = rep.p_value < 0.05
    detail = (
        f"{n_seeds} seeds, <H> {mean_e[0]:.3f} -> {mean_e[-1]:.3f} over t={times[-1]:g}, "
        f"{rep.extra.get('positive', 0)}/{rep.dof} increments > 0, sign-test p={rep.p_value:.2e} (<0.05)"
    )
    return CriterionResult(9, "energy increase under GRW", ok, detail, {"p_value": rep.p_value, "mean_energy": mean_e.tolist()}, time.perf_counter() - t0)


# -- 10 --------------------------------------------------------------------------

REPRO_CONFIGS_FULL = ("double_slit_schrodinger", "entangled_pair_bohm", "einstein_box_grwm", "harmonic_trap_grwf")
REPRO_CONFIGS_FAST = ("double_slit_schrodinger", "harmonic_trap_grwf")


def _digests(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def rerun_digests(name: str, seed: int | None = None):
    from .runner import run_scenario

    spec = load_bundled(name, **({"scenario__seed": seed} if seed is not None else {}))
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        run_scenario(spec, a)
        run_scenario(spec, b)
        return _digests(Path(a)), _digests(Path(b))


def criterion_10(scale: str = "full") -> CriterionResult:
    t0 = time.perf_counter()
    names = _scale(scale, REPRO_CONFIGS_FULL, REPRO_CONFIGS_FAST)
    bad, files = [], 0
    for name in names:
        da, db = rerun_digests(name)
        files += len(da)
        if da != db:
            bad.append(name)
    ok = not bad
    detail = f"{len(names)} scenarios run twice, {files} files compared" + (f"; differ: {', '.join(bad)}" if bad else ", all identical")
    return CriterionResult(10, "bitwise reproducibility", ok, detail, {"differ": bad}, time.perf_counter() - t0)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_suite(scale: str = "fast", only=None, stream=None) -> list[CriterionResult]:
    if scale not in SUITES:
        raise ValueError(f"unknown suite {scale!r}")
    results = []
    for number, fn in CRITERIA.items():
        if only and number not in only:
            continue
        try:
            res = fn(scale)
        except Exception as exc:  # a crash is a failure of that criterion, not of the suite
            res = CriterionResult(number, fn.__name__, False, f"error: {type(exc).__name__}: {exc}")
        results.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    if stream is not None:
        n_ok = sum(r.passed for r in results)
        print(f"{n_ok}/{len(results)} criteria passed ({scale} suite)", file=stream)
    return results
