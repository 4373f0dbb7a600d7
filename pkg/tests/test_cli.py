import hashlib
import json

import numpy as np
import pytest

from ontosim import acceptance
from ontosim.cli import main
from ontosim.dump import read_dump, write_dump
from ontosim.grid import GridSpec, WaveFunction
from ontosim.scenarios import bundled_config_text
from ontosim.schrodinger import SplitStepPropagator


def _digests(root):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def test_run_bundled_double_slit(tmp_path, capsys):
    assert main(["run", "double_slit_bohm", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "ok"
    assert "histogram.dat" in man["outputs"]
    assert man["summary"]["equivariance_final_p"] > 0.01
    assert "files written" in capsys.readouterr().out


def test_negative_sigma_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(bundled_config_text("einstein_box_grwm").replace("sigma = 15", "sigma = -15"))
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 2
    assert "sigma" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_seed_flag_reproducible(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "harmonic_trap_grwf", "--seed", "42", "--out", str(tmp_path / d)]) == 0
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 42


def test_mode_override_and_manifest_rerun(tmp_path):
    assert main(["run", "harmonic_trap_grwf", "--mode", "grwm", "--out", str(tmp_path / "a")]) == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["scenario"]["mode"] == "grwm"
    assert main(["run", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")


def test_runtime_failure_exit_3(tmp_path, monkeypatch, capsys):
    from ontosim import runner

    def boom(*args):
        raise FloatingPointError("non-finite amplitudes")

    monkeypatch.setattr(runner, "_run_grw", boom)
    assert main(["run", "harmonic_trap_grwf", "--out", str(tmp_path)]) == 3
    assert "non-finite amplitudes" in capsys.readouterr().err
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "failed"


def test_missing_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2


def test_verify_unknown_suite():
    with pytest.raises(SystemExit) as info:
        main(["verify", "--suite", "huge"])
    assert info.value.code == 2


def test_verify_single_criterion(capsys):
    assert main(["verify", "--suite", "fast", "--only", "4"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]  4" in out


def test_verify_mutation_breaks_unitarity(monkeypatch, capsys):
    # corrupt the kinetic phase factor's modulus by 1e-9: the scheme stops being unitary
    orig = SplitStepPropagator.__init__

    def corrupted(self, *args, **kwargs):
        orig(self, *args, **kwargs)
        self.kinetic = self.kinetic * (1 + 1e-9)

    monkeypatch.setattr(SplitStepPropagator, "__init__", corrupted)
    assert main(["verify", "--suite", "fast", "--only", "1"]) == 1
    captured = capsys.readouterr()
    assert "[FAIL]  1" in captured.out
    assert "unitarity" in captured.err


def test_verify_reports_crash_as_failure(monkeypatch, capsys):
    def broken(scale):
        raise RuntimeError("boom")

    monkeypatch.setitem(acceptance.CRITERIA, 4, broken)
    assert main(["verify", "--only", "4"]) == 1
    assert "boom" in capsys.readouterr().out


def _dump(tmp_path, n=1, m=8):
    g = GridSpec(n, -2.0, 2.0, m)
    rng = np.random.default_rng(1)
    psi = WaveFunction(g, rng.normal(size=g.size) + 1j * rng.normal(size=g.size))
    return write_dump(tmp_path / "psi.onto", psi), psi


def test_convert_round_trip(tmp_path):
    path, psi = _dump(tmp_path)
    assert main(["convert", "--in", str(path), "--format", "csv"]) == 0
    assert main(["convert", "--in", str(tmp_path / "psi.csv"), "--format", "dump", "--out", str(tmp_path / "back.onto")]) == 0
    assert (tmp_path / "back.onto").read_bytes() == path.read_bytes()
    assert np.array_equal(read_dump(tmp_path / "back.onto").amplitudes, psi.amplitudes)


def test_convert_two_particle_columns(tmp_path):
    path, _ = _dump(tmp_path, n=2)
    assert main(["convert", "--in", str(path), "--out", str(tmp_path / "p.csv")]) == 0
    assert (tmp_path / "p.csv").read_text().splitlines()[1] == "x1,x2,re,im,abs2"


def test_convert_truncated(tmp_path, capsys):
    path, _ = _dump(tmp_path)
    path.write_bytes(path.read_bytes()[:-5])
    assert main(["convert", "--in", str(path)]) == 2
    assert "offset" in capsys.readouterr().err


def test_convert_bad_magic(tmp_path, capsys):
    path, _ = _dump(tmp_path)
    path.write_bytes(b"NOPE" + path.read_bytes()[4:])
    assert main(["convert", "--in", str(path)]) == 2
    assert "magic" in capsys.readouterr().err


def test_list(capsys):
    assert main(["list"]) == 0
    assert "double_slit_bohm.cfg" in capsys.readouterr().out
