import json
import math

import pytest

from esrqc.cli import main


def write(path, payload):
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return str(path)


def run_json(args, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_run_turnon_ground_state(tmp_path):
    prog = write(tmp_path / "p.esr", "turnon\n")
    code, rep = run_json(["run", prog], tmp_path)
    assert code == 0
    assert rep["lines"]["1:0"]["abs"] == pytest.approx(0.5)
    assert rep["expanded"] == ["pulse 1 0 1/2pi 0"]
    assert rep["metadata"]["seed"] == 0


def test_run_prepare_echo(tmp_path):
    cfg = write(tmp_path / "c.json", {"spins": 5, "thermal": {"x": math.log(10)}})
    prog = write(tmp_path / "p.esr", "turnon\ngrad +\nprepare\ngrad +\n")
    code, rep = run_json(["run", "--config", cfg, prog], tmp_path)
    assert code == 0
    w0, w1 = (10 / 11) ** 5, (10 / 11) ** 4 / 11
    echo = rep["blocks"][0]["lines"]["1:1"]["abs"]
    assert echo / 0.5 == pytest.approx(w0 - w1, abs=1e-10)
    assert rep["pulse_count"] == 8


def test_reports_are_deterministic(tmp_path):
    prog = write(tmp_path / "p.esr", "turnon; grad +; prepare; grad +")
    cfg = write(tmp_path / "c.json", {"spins": 4, "thermal": {"x": 1.0}, "mode": "sampled",
                                      "grid": 32, "draws": 50, "seed": 7})
    main(["run", "--config", cfg, prog, "--out", str(tmp_path / "a.json")])
    main(["run", "--config", cfg, prog, "--out", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()


def test_parse_errors_exit_6(tmp_path, capsys):
    prog = write(tmp_path / "p.esr", "pi 3 102\nfoo 1\n")
    assert main(["run", prog]) == 6
    err = capsys.readouterr().err
    assert "line 1" in err and "line 2" in err


def test_unknown_config_key_exit_3(tmp_path):
    cfg = write(tmp_path / "c.json", {"spins": 5, "colour": "red"})
    assert main(["spectrum", "--config", cfg]) == 3


def test_bad_json_exit_3(tmp_path):
    cfg = write(tmp_path / "c.json", "{not json")
    assert main(["spectrum", "--config", cfg]) == 3


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_runtime_error_exit_4(tmp_path):
    prog = write(tmp_path / "p.esr", "pi 9 0\n")
    assert main(["run", prog]) == 4


def test_spectrum_writes_csv(tmp_path):
    code, rep = run_json(["spectrum"], tmp_path, "spec.json")
    assert code == 0 and rep["spectrum"]["addressable"]
    rows = (tmp_path / "spec.csv").read_text().splitlines()
    assert rows[0] == "spin,cond,frequency"
    assert len(rows) == 1 + 2 + 3 * 4 + 2


def test_spectrum_flags_collisions(tmp_path):
    cfg = write(tmp_path / "c.json", {"spins": 5, "couplings": [2, 2]})
    code, rep = run_json(["spectrum", "--config", cfg], tmp_path)
    assert code == 0 and not rep["spectrum"]["addressable"]


def test_shor_periodic(tmp_path):
    code, rep = run_json(["shor", "--w-bits", "6", "--period", "3",
                          "--strategy", "exhaustive_scan", "--classify"], tmp_path)
    assert code == 0
    scan = rep["readouts"]["exhaustive_scan"]
    assert scan["value"] == 3
    assert scan["signal"] == pytest.approx(1 / 22)
    assert {row["class"] for row in rep["zmatch_classes"]} >= {"true_match", "false_match"}


def test_shor_shifted(tmp_path):
    code, rep = run_json(["shor", "--w-bits", "4", "--x", "7", "--modulus", "15", "--s", "1",
                          "--strategy", "cumulative"], tmp_path)
    assert code == 0
    assert rep["readouts"]["cumulative"]["value"] == 1
    assert rep["state"]["norm"] == pytest.approx(1.0)


def test_shor_needs_period_or_modulus(tmp_path):
    assert main(["shor", "--w-bits", "4"]) == 3


def test_grover(tmp_path):
    code, rep = run_json(["grover", "--answer", "10100010", "--weight", "0.8"], tmp_path)
    assert code == 0
    assert rep["grover"]["recovered"] and rep["probe"]["recovered"]
    assert rep["probe"]["strongest"]["3"] == "3:11"


def test_grover_register_too_small(tmp_path):
    cfg = write(tmp_path / "c.json", {"spins": 4})
    assert main(["grover", "--config", cfg, "--answer", "101010"]) == 3


def test_verify_and_perturbation(tmp_path):
    code, rep = run_json(["verify", "--programs", "5"], tmp_path)
    assert code == 0 and rep["passed"]
    code, rep = run_json(["verify", "--programs", "5", "--perturb", "1e-6"], tmp_path, "p.json")
    assert code == 5 and not rep["passed"]
