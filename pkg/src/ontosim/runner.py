"""Execute a :class:`ScenarioSpec` and write its data files and manifest.

Manifest (``manifest.json``) layout::

    {
      "schema": "ontosim.manifest/1",
      "status": "ok" | "failed",
      "error": null | "<message>",
      "scenario": <ScenarioSpec.to_dict()>,
      "seed": int,
      "versions": {"ontosim", "numpy", "scipy", "python", "kernel_backend"},
      "outputs": {"<relative path>": "<sha256>"},
      "summary": {...mode specific results, GofReport dicts...}
    }

The manifest holds no timestamps, so re-running a spec reproduces it bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import shutil
from importlib import resources
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import scipy

from . import kernels
from .bohmian import equivariance_test, run_ensemble
from .dump import write_dump
from .errors import OntosimError
from .grid import expectation_energy, marginal_density, norm_squared
from .grw import run_grw
from .ontology import RegionPartition, flashes_from_events, matter_density, region_masses, structured_tails_report
from .scenarios import ScenarioSpec, build, double_slit_fringe_spacing
from .schrodinger import PropagatorConfig, evolve, write_snapshots

SCHEMA = "ontosim.manifest/1"


class ScenarioRunError(OntosimError):
    def __init__(self, spec_name, cause):
        super().__init__(f"scenario {spec_name!r} failed: {type(cause).__name__}: {cause}")
        self.cause = cause


def _versions() -> dict:
    try:
        own = version("ontosim")
    except PackageNotFoundError:  # pragma: no cover - running from a source tree
        own = "unknown"
    return {
        "ontosim": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _write_dat(path: Path, header: str, columns):
    np.savetxt(path, np.column_stack(columns), fmt="%.17g", header=header)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _copy_plot_script(out: Path, mode: str, written):
    src = resources.files("ontosim").joinpath("data", f"{mode}.gp")
    if src.is_file():
        (out / f"{mode}.gp").write_text(src.read_text())
        written.append(out / f"{mode}.gp")


def run_scenario(spec: ScenarioSpec, out_dir) -> dict:
    """Run ``spec`` into ``out_dir``; returns the manifest dict.

    Engine failures are recorded in a ``status: failed`` manifest and then
    re-raised as :class:`ScenarioRunError`.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema": SCHEMA,
        "status": "ok",
        "error": None,
        "scenario": spec.to_dict(),
        "seed": spec.seed,
        "versions": _versions(),
        "outputs": {},
        "summary": {},
    }
    written: list[Path] = []
    try:
        psi0, potential, masses = build(spec)
        written.append(write_dump(out / "initial.onto", psi0))
        if spec.t_final > 0:
            engine = {"schrodinger": _run_schrodinger, "bohm": _run_bohm, "grwm": _run_grw, "grwf": _run_grw}[spec.mode]
            manifest["summary"] = engine(spec, psi0, potential, masses, out, written)
            _copy_plot_script(out, spec.mode, written)
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        _finish(manifest, out, written)
        raise ScenarioRunError(spec.name, exc) from exc
    _finish(manifest, out, written)
    return manifest


def _finish(manifest, out: Path, written):
    manifest["outputs"] = {str(p.relative_to(out)): _sha256(p) for p in sorted(set(written))}
    _write_json(out / "manifest.json", manifest)


def _config(spec: ScenarioSpec) -> PropagatorConfig:
    return PropagatorConfig(spec.dt, spec.steps_per_output)


def _halves(spec: ScenarioSpec) -> RegionPartition:
    return RegionPartition.halves(spec.grid)


def _density_dat(out: Path, snaps, written, name="density.dat"):
    g = snaps[0].grid
    cols = [g.axis] + [marginal_density(s, 0) for s in snaps]
    header = "x " + " ".join(f"t={s.time!r}" for s in snaps)
    _write_dat(out / name, header, cols)
    written.append(out / name)


def _run_schrodinger(spec, psi0, potential, masses, out: Path, written) -> dict:
    snaps = evolve(psi0, potential, masses, spec.t_final, _config(spec))
    idx = write_snapshots(out / "snapshots", snaps, spec.dt)
    written.extend([idx] + sorted((out / "snapshots").glob("*.onto")))
    part = _halves(spec)
    rows = []
    e0 = expectation_energy(psi0, potential, masses)
    for s in snaps:
        rm = region_masses(matter_density(s, masses), part)
        rows.append((s.time, norm_squared(s) ** 0.5, expectation_energy(s, potential, masses), rm["left"], rm["right"]))
    _write_rows(out / "observables.csv", ["t", "norm", "energy", "mass_left", "mass_right"], rows)
    written.append(out / "observables.csv")
    _density_dat(out, snaps, written)
    summary = {
        "n_snapshots": len(snaps),
        "max_norm_deviation": max(abs(r[1] - 1) for r in rows),
        "max_relative_energy_drift": max(abs(r[2] - e0) for r in rows) / abs(e0) if e0 else None,
    }
    if spec.kind == "double_slit":
        summary["screen_distance"] = spec.state_value("forward_momentum") * spec.t_final / spec.state_value("mass")
        summary["two_source_fringe_spacing"] = double_slit_fringe_spacing(spec, snaps[-1].time)
    return summary


def _run_bohm(spec, psi0, potential, masses, out: Path, written) -> dict:
    ens = run_ensemble(psi0, potential, masses, spec.t_final, spec.n_traj, spec.seed, _config(spec))
    n_save = min(spec.save_trajectories, len(ens))
    npart = spec.grid.n_particles
    rows = []
    for j in range(n_save):
        for i, t in enumerate(ens.times):
            rows.append((j, t, *ens.positions[i, j]))
    qcols = [f"q{k + 1}" for k in range(npart)]
    _write_rows(out / "trajectories.csv", ["trajectory", "t"] + qcols, rows)
    _write_rows(out / "final_positions.csv", qcols, ens.positions[-1].tolist())
    written += [out / "trajectories.csv", out / "final_positions.csv"]
    reports = [equivariance_test(ens.positions[i], ens.snapshots[i], 0, spec.bins) for i in range(len(ens.times))]
    final = reports[-1]
    # histogram of particle 1 at the final time against |psi_T|^2 on the equiprobable bins
    edges = np.asarray(final.bin_edges)
    lo = spec.grid.extent_min
    hist_edges = edges.copy()
    hist_edges[0], hist_edges[-1] = lo, spec.grid.extent_max
    counts, _ = np.histogram(ens.positions[-1, :, 0], bins=hist_edges)
    widths = np.diff(hist_edges)
    _write_dat(
        out / "histogram.dat",
        "bin_center empirical_density expected_density",
        [0.5 * (hist_edges[1:] + hist_edges[:-1]), counts / (len(ens) * widths), np.full(widths.size, 1.0 / widths.size) / widths],
    )
    written.append(out / "histogram.dat")
    _density_dat(out, ens.snapshots, written)
    part = _halves(spec)
    labels = part.labels(ens.positions[..., 0])
    switched = np.any(labels != labels[0], axis=0)
    report = ens.report()
    report["equivariance"] = [{"t": float(t), **r.to_dict()} for t, r in zip(ens.times, reports)]
    report["half_box"] = {
        "trajectories_switching_half": int(switched.sum()),
        "left_fraction_initial": float(np.mean(labels[0] == 0)),
    }
    _write_json(out / "run_report.json", report)
    written.append(out / "run_report.json")
    summary = dict(report)
    summary["equivariance_final_p"] = final.p_value
    return summary


def _run_grw(spec, psi0, potential, masses, out: Path, written) -> dict:
    params = spec.grw_params()
    forced = ()
    if spec.grw.get("measurement_time") is not None:
        forced = ((spec.grw["measurement_time"], spec.grw.get("measured_particle", 0)),)
    run = run_grw(
        psi0, potential, masses, spec.t_final, params, _config(spec), forced=forced, bracket_events=True, track_energy=True
    )
    _write_rows(
        out / "events.csv",
        ["t", "k", "x", "p_x", "forced"],
        [(e.time, e.particle_index, e.center, e.weight, int(e.forced)) for e in run.events],
    )
    written.append(out / "events.csv")
    report = run.report()
    part = _halves(spec)
    series = [(s.time, region_masses(matter_density(s, masses), part)) for s in run.snapshots]
    _write_rows(
        out / "energy.csv", ["t", "energy"], [(s.time, e) for s, e in zip(run.snapshots, run.energies)]
    )
    written.append(out / "energy.csv")
    if spec.mode == "grwm":
        dens_dir = out / "density"
        dens_dir.mkdir(exist_ok=True)
        for i, s in enumerate(run.snapshots):
            m = matter_density(s, masses)
            p = dens_dir / f"m_{i:05d}.csv"
            _write_rows(p, ["x", "m"], zip(m.x, m.values))
            written.append(p)
        _write_dat(
            out / "region_masses.dat",
            "t mass_left mass_right",
            [[t for t, _ in series], [r["left"] for _, r in series], [r["right"] for _, r in series]],
        )
        written.append(out / "region_masses.dat")
        jumps = [abs(b["left"] - a["left"]) for (_, a), (_, b) in zip(series, series[1:])]
        report["max_region_mass_jump"] = max(jumps, default=0.0)
        if run.events:
            t_ev = run.events[0].time
            i_after = next(i for i, s in enumerate(run.snapshots) if s.time >= t_ev)
            if i_after > 0:
                before = matter_density(run.snapshots[i_after - 1], masses)
                after = matter_density(run.snapshots[i_after], masses)
                try:
                    report["tails"] = structured_tails_report(before, after, part)
                except OntosimError as exc:
                    report["tails"] = {"error": str(exc)}
    else:
        flashes = flashes_from_events(run.events)
        _write_rows(out / "flashes.csv", ["t", "x"], [(f.time, f.position) for f in flashes])
        written.append(out / "flashes.csv")
        report["flash_count"] = len(flashes)
    report["region_masses_final"] = series[-1][1]
    _write_json(out / "analysis_report.json", report)
    written.append(out / "analysis_report.json")
    return {k: v for k, v in report.items() if k != "energy_series"}


def clean_output_dir(out_dir):
    """Remove a previous run's files (only those named in its manifest)."""
    out = Path(out_dir)
    man = out / "manifest.json"
    if not man.exists():
        return
    for rel in json.loads(man.read_text()).get("outputs", {}):
        p = out / rel
        if p.is_file():
            p.unlink()
    for sub in ("snapshots", "density"):
        d = out / sub
        if d.is_dir() and not any(d.iterdir()):
            shutil.rmtree(d)
