import csv
import json
import subprocess
import sys

import pytest

from mis_mimo.cli import config_snapshot, main, parse_config
from mis_mimo.model import ConfigError

TINY = {"N": 4, "K": 9, "M": 2, "B": 1, "L": 4, "t_max": 30}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def test_minimal_config_takes_defaults(tmp_path):
    cfg, spec, mode = parse_config(_write(tmp_path, {"N": 8, "K": 36, "M": 4, "B": 2}))
    assert spec is None and mode.value == "unimodular"
    assert (cfg.L, cfg.P_dbm, cfg.sigma_w2_dbm, cfg.eta_bu) == (8, 20.0, -100.0, 3.7)


def test_propagation_table_config_accepted(tmp_path):
    p = _write(tmp_path, {"sigma_w2_dbm": -100, "C0_db": -30, "eta_mis": 2.5, "eta_bu": 3.7,
                          "d_mis": 500, "d": 500, "d_prime_range": [10, 50]})
    cfg, _, _ = parse_config(p)
    assert cfg.d_prime_range == (10.0, 50.0)


@pytest.mark.parametrize("obj, message", [
    ({"K": 10}, "K must be a perfect square"),
    ({"foo": 1}, "unknown keys"),
    ({"P_dbm": "loud"}, "P_dbm: must be a number"),
    ({"values": [1]}, "axis: required"),
    ({"axis": "power"}, "values: must be a non-empty list"),
    ({"axis": "power", "values": [10], "trials": 0}, "trials"),
    ({"axis": "volume", "values": [10]}, "axis: must be one of"),
    ({"axis": "power", "values": [10], "schemes": ["best"]}, "schemes"),
    ({"axis": "users", "values": [100], "N": 4, "K": 9, "B": 8}, "B"),
    ({"constraint": "soft"}, "constraint"),
    ("[1, 2]", "JSON object"),
    ("{not json", "malformed JSON"),
])
def test_bad_configs_are_rejected(tmp_path, obj, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(_write(tmp_path, obj))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="no such file"):
        parse_config(tmp_path / "absent.json")


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", str(_write(tmp_path, TINY))]) == 0
    assert list(tmp_path.iterdir()) == [tmp_path / "cfg.json"]
    assert main(["validate", str(_write(tmp_path, {"K": 10}, "bad.json"))]) == 1
    assert "K must be a perfect square" in capsys.readouterr().err
    assert main(["frobnicate"]) == 1


def test_trial_is_reproducible(tmp_path, capsys):
    p = str(_write(tmp_path, TINY))
    assert main(["trial", p, "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert main(["trial", p, "--seed", "7"]) == 0
    assert capsys.readouterr().out == first
    rec = json.loads(first)
    assert rec["seed"] == 7 and rec["scheme"] == "hybrid" and len(rec["mmse"]) == 2


def test_trial_runs_as_module(tmp_path):
    p = str(_write(tmp_path, TINY))
    out = subprocess.run([sys.executable, "-m", "mis_mimo", "trial", p, "--seed", "3",
                          "--constraint", "reactive"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["seed"] == 3


def test_sweep_writes_outputs(tmp_path):
    cfg = dict(TINY, axis="power", values=[30, 10, 20], trials=2, schemes=["mis_all", "scheme1"])
    out = tmp_path / "out"
    assert main(["sweep", str(_write(tmp_path, cfg)), "--out", str(out), "--seed", "5"]) == 0
    summary = list(csv.DictReader(open(out / "summary.csv")))
    assert [(r["axis_value"], r["scheme"]) for r in summary] == [
        (p, s) for p in ("10", "20", "30") for s in ("mis_all", "scheme1")]
    assert set(summary[0]) >= {"axis_value", "scheme", "mean_sum_rate", "stderr", "trials"}
    trials = list(csv.DictReader(open(out / "trials.csv")))
    assert len(trials) == 12
    keys = [(float(r["axis_value"]), r["scheme"], int(r["seed"])) for r in trials]
    assert keys == sorted(keys)

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == {"summary": "summary.csv", "trials": "trials.csv"}
    assert manifest["config"]["seed"] == 5
    assert manifest["failed_trials"] == 0
    assert len(manifest["summary"]) == 6
    assert manifest["version"] and manifest["timestamp"]


def test_manifest_config_reproduces_the_run(tmp_path):
    cfg = dict(TINY, axis="kappa", values=[0.9, 1.0], trials=2, schemes=["hybrid"])
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", str(_write(tmp_path, cfg)), "--out", str(out1), "--seed", "11",
                 "--constraint", "reactive"]) == 0
    replay = _write(tmp_path, json.loads((out1 / "manifest.json").read_text())["config"], "replay.json")
    assert main(["sweep", str(replay), "--out", str(out2)]) == 0
    assert (out1 / "trials.csv").read_bytes() == (out2 / "trials.csv").read_bytes()
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()


def test_snapshot_round_trip(tmp_path):
    cfg, spec, mode = parse_config(_write(tmp_path, dict(TINY, axis="power", values=[1, 2])))
    again = parse_config(_write(tmp_path, config_snapshot(cfg, spec, mode), "snap.json"))
    assert again[0] == cfg and again[1] == spec and again[2] == mode


def test_sweep_without_axis_is_a_config_error(tmp_path):
    assert main(["sweep", str(_write(tmp_path, TINY)), "--out", str(tmp_path / "o")]) == 1


def test_runtime_failure_exit_code_and_cleanup(tmp_path, monkeypatch):
    import mis_mimo.cli as cli

    def boom(*a, **k):
        raise RuntimeError("worker pool died")

    monkeypatch.setattr(cli, "run_sweep", boom)
    out = tmp_path / "o"
    cfg = dict(TINY, axis="power", values=[10], trials=1)
    assert main(["sweep", str(_write(tmp_path, cfg)), "--out", str(out)]) == 2
    assert list(out.iterdir()) == []


def test_bad_flags(tmp_path):
    p = str(_write(tmp_path, dict(TINY, axis="power", values=[10], trials=1)))
    assert main(["sweep", p, "--out", str(tmp_path / "o"), "--threads", "0"]) == 1
    assert main(["trial", p, "--seed", "-3"]) == 1
    assert main(["trial", p, "--constraint", "soft"]) == 1
