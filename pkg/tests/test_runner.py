import json
import time

import numpy as np
import pytest

from ontosim.dump import read_dump
from ontosim.runner import ScenarioRunError, clean_output_dir, run_scenario
from ontosim.scenarios import bundled_configs, load_bundled


def test_zero_time_writes_initial_state_only(tmp_path):
    spec = load_bundled("double_slit_bohm", dynamics__t_final=0)
    man = run_scenario(spec, tmp_path)
    assert list(man["outputs"]) == ["initial.onto"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["initial.onto", "manifest.json"]
    assert read_dump(tmp_path / "initial.onto").grid == spec.grid


def test_manifest_contents(tmp_path):
    spec = load_bundled("harmonic_trap_grwf")
    man = run_scenario(spec, tmp_path)
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == json.loads(json.dumps(man))
    assert man["status"] == "ok" and man["seed"] == spec.seed
    assert {"events.csv", "flashes.csv", "energy.csv", "analysis_report.json"} <= set(man["outputs"])
    assert man["summary"]["flash_count"] == man["summary"]["event_count"]
    assert set(man["versions"]) == {"ontosim", "numpy", "scipy", "python", "kernel_backend"}


def test_bohm_outputs(tmp_path):
    spec = load_bundled("entangled_pair_bohm", bohm__n_traj=200, dynamics__t_final=0.2)
    man = run_scenario(spec, tmp_path)
    hist = np.loadtxt(tmp_path / "histogram.dat")
    assert hist.shape == (spec.bins, 3)
    header = (tmp_path / "trajectories.csv").read_text().splitlines()[0]
    assert header == "trajectory,t,q1,q2"
    report = json.loads((tmp_path / "run_report.json").read_text())
    assert report["n_trajectories"] == 200
    assert "run_report.json" in man["outputs"]


def test_grwm_outputs(tmp_path):
    spec = load_bundled("einstein_box_grwm")
    man = run_scenario(spec, tmp_path)
    rm = np.loadtxt(tmp_path / "region_masses.dat")
    assert rm.shape[1] == 3
    assert man["summary"]["max_region_mass_jump"] > 0.4
    assert man["summary"]["tails"]["regions"][man["summary"]["tails"]["suppressed"]]["weight_after"] > 0
    assert (tmp_path / "grwm.gp").exists()


def test_same_seed_same_bytes(tmp_path):
    spec = load_bundled("harmonic_trap_grwm")
    a = run_scenario(spec, tmp_path / "a")
    b = run_scenario(spec, tmp_path / "b")
    assert a["outputs"] == b["outputs"]
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()
    c = run_scenario(load_bundled("harmonic_trap_grwm", scenario__seed=12), tmp_path / "c")
    assert c["outputs"]["events.csv"] != a["outputs"]["events.csv"]


def test_failure_recorded(tmp_path):
    spec = load_bundled("einstein_box_grwm", grw__sigma=40.0)
    with pytest.raises(ScenarioRunError, match="InvalidGeometry"):
        run_scenario(spec, tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "failed"
    assert "sigma" in man["error"]


def test_clean_output_dir(tmp_path):
    run_scenario(load_bundled("einstein_box_schrodinger", dynamics__t_final=0.01, dynamics__steps_per_output=5), tmp_path)
    (tmp_path / "keep.txt").write_text("mine")
    clean_output_dir(tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["keep.txt", "manifest.json"]


@pytest.mark.slow
@pytest.mark.parametrize("name", bundled_configs())
def test_bundled_config_within_budget(name, tmp_path):
    spec = load_bundled(name)
    t0 = time.perf_counter()
    man = run_scenario(spec, tmp_path)
    assert man["status"] == "ok"
    assert time.perf_counter() - t0 < spec.runtime_budget_s
