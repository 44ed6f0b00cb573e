import json
import subprocess
import sys

import jsonschema
import pytest

from orey.cli import dumps, load_schema, main


def run_cli(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def validated(path_or_text, schema):
    data = json.loads(path_or_text.read_text() if hasattr(path_or_text, "read_text") else path_or_text)
    jsonschema.validate(data, load_schema(schema))
    return data


def test_sigma_half(capsys):
    code, out, _ = run_cli(["sigma", "--gamma", 0.5], capsys)
    assert code == 0
    data = validated(out, "sigma")
    assert data["sigma_sq"] == pytest.approx(3.0, abs=1e-12)
    assert data["Sigma11"] == pytest.approx(3.0, abs=1e-12)


def test_sigma_unreachable_tolerance(capsys):
    code, _, err = run_cli(["sigma", "--gamma", 0.99, "--tol", 1e-40], capsys)
    assert code == 2 and "tolerance unreachable" in err


def test_simulate_estimate_and_manifest(tmp_path, capsys):
    path = tmp_path / "p.csv"
    code, _, _ = run_cli(["simulate", "--model", "sfbm:H=0.7", "--n", 1024, "--seed", 4, "--out", path], capsys)
    assert code == 0
    manifest = validated(tmp_path / "p.csv.manifest.json", "manifest")
    assert manifest["seed"] == 4 and manifest["model"] == "sfbm:H=0.7"

    est = tmp_path / "e.json"
    code, _, _ = run_cli(["estimate", "--in", path, "--ci", 0.95, "--out", est], capsys)
    assert code == 0
    data = validated(est, "estimate")
    assert data["n"] == 512
    assert data["ci_low"] < data["gamma_hat"] < data["ci_high"]
    validated(tmp_path / "e.json.manifest.json", "manifest")


def test_simulate_requires_seed(tmp_path, capsys):
    code, _, err = run_cli(["simulate", "--model", "fbm:gamma=0.5", "--n", 8, "--out", tmp_path / "x.csv"], capsys)
    assert code == 1 and "--seed" in err
    assert not (tmp_path / "x.csv").exists()


def test_estimate_affine_path_is_degenerate(tmp_path, capsys):
    lin = tmp_path / "lin.csv"
    lin.write_text("k,t,x\n" + "".join(f"{k},{k / 16!r},{0.5 * k / 16!r}\n" for k in range(17)))
    code, _, err = run_cli(["estimate", "--in", lin], capsys)
    assert code == 2 and "degenerate" in err


def test_estimate_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("k,t,x\n0,0,0.1\n1,0.5,0.2\n2,1,0.3\n")
    code, _, err = run_cli(["estimate", "--in", bad], capsys)
    assert code == 1 and "malformed path CSV" in err
    code, _, err = run_cli(["estimate", "--in", tmp_path / "missing.csv"], capsys)
    assert code == 1 and "not found" in err


def test_unknown_model(capsys):
    code, _, err = run_cli(["coeffs", "--model", "gbm:mu=1", "--n", 8], capsys)
    assert code == 1 and "invalid model" in err


def test_usage_errors(capsys):
    assert run_cli([], capsys)[0] == 1
    assert run_cli(["frobnicate"], capsys)[0] == 1
    assert run_cli(["sigma"], capsys)[0] == 1
    assert run_cli(["verify", "--model", "fbm:gamma=0.5", "--checks", "nope"], capsys)[0] == 1


def test_coeffs(tmp_path, capsys):
    out = tmp_path / "c.json"
    code, _, _ = run_cli(["coeffs", "--model", "bifbm:H=0.6,K=0.5", "--n", 8, "--mode", "exact", "--full", "--out", out],
                         capsys)
    assert code == 0
    data = validated(out, "coeffs")
    assert len(data["matrices"]["d_n"]) == 7 and len(data["matrices"]["c"][0]) == 15
    assert data["expected_v_n"] == pytest.approx(7.0)


def test_verify_bias_passes(capsys):
    code, out, _ = run_cli(["verify", "--model", "sfbm:H=0.7", "--checks", "bias"], capsys)
    assert code == 0
    assert validated(out, "verify")["verdicts"] == {"bias": "PASS"}


def test_verify_fail_exit_code(capsys):
    code, out, _ = run_cli(["verify", "--model", "sfbm:H=0.7", "--checks", "begyn,rowsum", "--nmax", 64], capsys)
    assert code == 2
    data = validated(out, "verify")
    assert data["verdicts"]["begyn"] == "FAIL" and data["verdicts"]["rowsum"] == "PASS"


def test_horizon_flag(capsys):
    code, out, _ = run_cli(["coeffs", "--model", "fbm:gamma=0.5", "--n", 8, "--horizon", 3.0, "--mode", "exact"], capsys)
    assert code == 0 and json.loads(out)["expected_v_2n"] == pytest.approx(15.0)


def test_mc_and_replay(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("OREY_THREADS", "3")
    code, _, _ = run_cli(
        ["mc", "--model", "sfbm:H=0.7", "--n", 64, "--reps", 120, "--seed", 42, "--stat", "gamma_hat",
         "--out", "r.json", "--samples", "s.csv"],
        capsys,
    )
    assert code == 0
    validated(tmp_path / "r.json", "mc")
    manifest = validated(tmp_path / "r.json.manifest.json", "manifest")
    assert set(manifest["outputs"]) == {"r.json", "s.csv"}
    first = (tmp_path / "r.json").read_bytes()
    (tmp_path / "r.json").write_text("{}")
    code, _, err = run_cli(["replay", "r.json.manifest.json"], capsys)
    assert code == 0 and "reproduced 2" in err
    assert (tmp_path / "r.json").read_bytes() == first


def test_replay_detects_drift(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    run_cli(["sigma", "--gamma", 0.4, "--out", "s.json"], capsys)
    manifest = json.loads((tmp_path / "s.json.manifest.json").read_text())
    manifest["outputs"]["s.json"] = "0" * 64
    (tmp_path / "m.json").write_text(json.dumps(manifest))
    code, _, _ = run_cli(["replay", "m.json"], capsys)
    assert code == 2


def test_bad_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("OREY_THREADS", "many")
    code, _, err = run_cli(["mc", "--model", "fbm:gamma=0.5", "--n", 16, "--reps", 10, "--seed", 1], capsys)
    assert code == 1 and "OREY_THREADS" in err


def test_dumps_handles_numpy_and_nan():
    import numpy as np

    text = dumps({"a": np.float64("nan"), "b": np.int64(3), "c": np.arange(2), "d": np.bool_(True)})
    assert json.loads(text) == {"a": None, "b": 3, "c": [0, 1], "d": True}


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "orey.cli", "sigma", "--gamma", "0.5"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["sigma_sq"] == pytest.approx(3.0)
