import csv
import json

import numpy as np
import pytest

from qsim import cli
from qsim.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, ConfigError, main, run_scenario, validate_config
from qsim.device import default_two_qubit_model
from qsim.scenarios import RUNNERS, two_qubit_model

SMALL_FIG2 = """
sweep:
  detuning_GHz: {start: -0.01, stop: 0.01, num: 5}
  pulse_length_ns: {start: 0.0, stop: 20.0, num: 3}
  drive_amp_GHz: [0.005, 0.01]
"""

SMALL_FIG5 = """
sweep:
  sigmas: [0.0, 0.05]
  drive_amps_GHz: [0.01]
options:
  n_traj: 6
  duration_ns: 40.0
  record_every_ns: 10.0
"""


def test_every_scenario_has_a_runner():
    assert set(cli.SCENARIOS) == set(RUNNERS)
    assert set(cli.SCENARIOS) == {"fig2", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9",
                                  "fig11", "fig12", "fig13", "fig14", "fig15", "fig16"}


def test_empty_config_applies_defaults():
    cfg = validate_config("", "fig7")
    m = two_qubit_model(cfg.model)
    ref = default_two_qubit_model()
    assert m.freqs() == ref.freqs()
    assert m.drive == ref.drive and m.rwa == ref.rwa
    assert {k: v.g_ref for k, v in m.couplings.items()} == {k: v.g_ref for k, v in ref.couplings.items()}
    assert cfg.solver.dim == 5 and cfg.solver.cap == 5


def test_negative_ramp_rejected_with_path():
    with pytest.raises(ConfigError) as exc:
        validate_config("options:\n  ramp_ns: -1.0\n", "fig9")
    assert any(e.startswith("options.ramp_ns") for e in exc.value.errors)


def test_errors_are_aggregated():
    text = "model:\n  q0_freq_MHz: 6000\n  drive_amp: 0.01\n  q1_anharm_GHz: 0.2\nsolver:\n  dt_ns: -0.1\nbogus: 1\n"
    with pytest.raises(ConfigError) as exc:
        validate_config(text, "fig7")
    errs = exc.value.errors
    assert len(errs) == 5
    assert any("unit violation" in e and "q0_freq_GHz" in e for e in errs)
    assert any("missing unit suffix" in e for e in errs)
    assert any(e.startswith("model.q1_anharm_GHz") for e in errs)
    assert any(e.startswith("solver.dt_ns") for e in errs)
    assert any(e.startswith("bogus") for e in errs)


def test_malformed_yaml():
    with pytest.raises(ConfigError) as exc:
        validate_config("model: [1, 2", "fig7")
    assert exc.value.errors[0].startswith("syntax")


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        validate_config("", "fig10")


def test_seed_override():
    assert validate_config("seed: 3\n", "fig5").seed == 3
    assert validate_config("seed: 3\n", "fig5", seed=9).seed == 9


def test_drive_override_reaches_model_and_manifest(tmp_path):
    cfg = validate_config(SMALL_FIG2 + "model:\n  drive_amp_GHz: 0.02\n", "fig2", out=str(tmp_path))
    assert two_qubit_model(cfg.model).drive.amp == 0.02
    run_scenario(cfg)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["model"]["drive_amp_GHz"] == 0.02
    assert manifest["status"] == "ok"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_main_success_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["fig2", "--config", _write(tmp_path, "c.yaml", SMALL_FIG2), "--out", str(out)]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    names = {a["path"] for a in manifest["artifacts"]}
    assert "summary.json" in names
    for a in manifest["artifacts"]:
        assert (out / a["path"]).stat().st_size == a["bytes"]
    for p in out.glob("*.csv"):
        header = next(csv.reader(p.open()))
        assert header and all(not _is_float(h) for h in header)


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def test_usage_errors(tmp_path):
    assert main(["fig10"]) == EXIT_USAGE
    assert main(["fig2", "--pulse", "fa"]) == EXIT_USAGE
    assert main(["fig2", "--threads", "0"]) == EXIT_USAGE
    assert main(["fig2", "--config", str(tmp_path / "missing.yaml")]) == EXIT_USAGE
    bad = _write(tmp_path, "bad.yaml", "options:\n  ramp_ns: -2\n")
    assert main(["fig9", "--config", bad, "--out", str(tmp_path / "x")]) == EXIT_USAGE


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg, writer):
        raise np.linalg.LinAlgError("synthetic")

    monkeypatch.setitem(RUNNERS, "fig2", boom)
    out = tmp_path / "f"
    assert main(["fig2", "--out", str(out)]) == EXIT_NUMERICAL
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed" and "synthetic" in manifest["error"]


def _hashes(out):
    m = json.loads((out / "manifest.json").read_text())
    return {a["path"]: a["sha256"] for a in m["artifacts"]}


def test_same_seed_same_hashes(tmp_path):
    conf = _write(tmp_path, "c.yaml", SMALL_FIG5)
    for name, seed in (("a", "4"), ("b", "4"), ("c", "5")):
        assert main(["fig5", "--config", conf, "--seed", seed, "--out", str(tmp_path / name)]) == EXIT_OK
    a, b, c = (_hashes(tmp_path / n) for n in "abc")
    assert a == b
    assert a != c


def test_threads_flag_sets_environment(tmp_path, monkeypatch):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS"):
        monkeypatch.delenv(var, raising=False)
    assert main(["fig2", "--threads", "1", "--config", _write(tmp_path, "c.yaml", SMALL_FIG2),
                 "--out", str(tmp_path / "t")]) == EXIT_OK
    import os
    assert os.environ["OMP_NUM_THREADS"] == "1"
