from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from dynkinlab import cli
from dynkinlab.config import ConfigValidationError, validate

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _cfg(tmp_path, name, **patch):
    raw = json.loads((CONFIGS / name).read_text())
    for k, v in patch.items():
        raw[k] = v
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def test_phi_closed_form_columns(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["phi", "--config", str(CONFIGS / "phi_power.json"), "--out", str(out)]) == 0
    rows = _rows(out / "phi.csv")
    assert len(rows) == 4 * 50 * 50
    for r in rows:
        num, exact = float(r["phi_numeric"]), float(r["phi_closed"])
        assert abs(num - exact) <= 1e-6 * exact
    assert _summary(out)["status"] == "pass"


def test_verify_mdh_fixture_and_rerun_bytes(tmp_path):
    cfg = _cfg(tmp_path, "verify_mdh.json", estimator={**json.loads((CONFIGS / "verify_mdh.json").read_text())
                                                          ["estimator"], "n_paths": 4000})
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.run(["verify-mdh", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.run(["verify-mdh", "--config", str(cfg), "--out", str(b)]) == 0
    assert cli.run(["verify-mdh", "--config", str(cfg), "--out", str(c), "--threads", "8"]) == 0
    for name in ("mdh.csv", "mdh_terms.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()
    s = _summary(a)
    assert s["status"] == "pass" and s["seed"] == 20261018
    assert set(s["files"]) >= {"mdh.csv", "mdh_terms.csv"}


def test_missing_field_exit_2(tmp_path, capsys):
    raw = json.loads((CONFIGS / "verify_mdh.json").read_text())
    del raw["estimator"]["dt"]
    del raw["seed"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    out = tmp_path / "o"
    assert cli.run(["verify-mdh", "--config", str(p), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "estimator.dt" in err and "seed" in err
    s = _summary(out)
    assert s["status"] == "config_error" and len(s["errors"]) >= 2


def test_validate_collects_all_errors():
    with pytest.raises(ConfigValidationError) as exc:
        validate({"model": {"kind": "nope"}, "estimator": {"n_paths": -1}}, "simulate", None, None)
    assert len(exc.value.errors) >= 3


def test_closure_cross_check():
    raw = json.loads((CONFIGS / "verify_mdh.json").read_text())
    raw["geometry"]["B"] = {"kind": "interval", "lo": -1.0, "hi": 0.5, "closed": True}
    with pytest.raises(ConfigValidationError) as exc:
        validate(raw, "verify-mdh", None, None)
    assert any("geometry.B" in e for e in exc.value.errors)


def test_seed_override_and_env_out(tmp_path, monkeypatch):
    cfg = CONFIGS / "simulate_killed.json"
    monkeypatch.setenv("DYNKINLAB_OUT", str(tmp_path / "env"))
    assert cli.run(["simulate", "--config", str(cfg), "--seed", "99"]) == 0
    assert _summary(tmp_path / "env")["seed"] == 99
    # --out beats the environment
    assert cli.run(["simulate", "--config", str(cfg), "--seed", "99", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "endpoints.csv").read_bytes() == (tmp_path / "env" / "endpoints.csv").read_bytes()
    assert cli.run(["simulate", "--config", str(cfg), "--out", str(tmp_path / "cfgseed")]) == 0
    assert (tmp_path / "cfgseed" / "endpoints.csv").read_bytes() != (tmp_path / "env" / "endpoints.csv").read_bytes()


@pytest.mark.parametrize("name,sub", [
    ("phi_piecewise.json", "phi"), ("estimate_killed.json", "estimate"), ("verify_dh.json", "verify-dh"),
    ("exit_prob.json", "exit-prob"), ("verify_du.json", "verify-du"), ("verify_p.json", "verify-p"),
    ("bound_profile.json", "bound-profile"), ("verify_chain.json", "verify-chain"),
])
def test_example_configs_pass(tmp_path, name, sub):
    out = tmp_path / "o"
    assert cli.run([sub, "--config", str(CONFIGS / name), "--out", str(out)]) == 0
    s = _summary(out)
    assert s["status"] == "pass" and all(c["passed"] for c in s["checks"].values())
    for f in s["files"]:
        assert (out / f).exists()
