import csv
import json
from pathlib import Path

import pytest

from gimvi_dyn.cli import main
from gimvi_dyn.core import canonical_instance, save_instance


def _run(tmp_path: Path, capsys, command: str, config: dict, *flags: str, name: str = "cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    code = main([command, "--config", str(path), "--out", str(tmp_path / "out"), *flags])
    return code, capsys.readouterr().out


def _check(report: dict, name: str) -> dict:
    return next(ch for ch in report["checks"] if ch["name"] == name)


def test_validate_canonical(tmp_path, capsys):
    code, out = _run(tmp_path, capsys, "validate", {"instance": "canonical"})
    report = json.loads(out)
    assert code == 0
    assert report["c"] == 0.5 and report["certified"]
    assert report["c1"] == pytest.approx(1 / 18)
    assert report["delta"] == pytest.approx(1296)


def test_validate_zero_coupling_recipe(tmp_path, capsys):
    cfg = {"instance": {"recipe": {"family": "scaled-identity", "dim": 1, "g_scale": 0.0, "gamma": 1.0}}}
    code, out = _run(tmp_path, capsys, "validate", cfg)
    assert code == 2
    assert _check(json.loads(out), "zeta_positive")["reason"] == "zeta nonpositive"


def test_validate_stepsize_above_root(tmp_path, capsys):
    cfg = {"instance": {"recipe": {"family": "scaled-identity", "dim": 1, "gamma": 3.0}}}
    code, out = _run(tmp_path, capsys, "validate", cfg)
    report = json.loads(out)
    assert code == 2
    assert _check(report, "c_positive")["reason"] == "c ≤ 0"
    assert report["gamma_bar"]["quadratic_root"] == pytest.approx(2.0)


def test_solve_discrete_writes_history_and_passes(tmp_path, capsys):
    cfg = {"instance": "canonical", "mode": "discrete", "params": {"source": "cor43"}}
    code, _ = _run(tmp_path, capsys, "solve", cfg)
    out = tmp_path / "out"
    assert code == 0
    assert (out / "history.csv").read_text().startswith("k,w[0],psi_norm,x,y1,y2,y3")
    assert json.loads((out / "verdict.json").read_text())["verdict"] == "PASS"


def test_solve_rate_two_slope(tmp_path, capsys):
    cfg = {"instance": "canonical", "mode": "continuous-3rd", "params": {"source": "eps2"}}
    code, _ = _run(tmp_path, capsys, "solve", cfg)
    assert code == 0
    fit = json.loads((tmp_path / "out" / "fit.json").read_text())
    assert fit["fit"]["slope"] <= -1.75
    verdict = json.loads((tmp_path / "out" / "verdict.json").read_text())
    assert verdict["verdict"] == "PASS" and verdict["eps_or_xi"] == 2.0


def test_solve_infeasible_explicit_params(tmp_path, capsys):
    cfg = {"instance": "canonical", "mode": "continuous-3rd", "eps": 1.0,
           "params": {"source": "explicit", "a0": 5.0, "a1": 1.0, "a2": 1.0}}
    code, _ = _run(tmp_path, capsys, "solve", cfg)
    assert code == 0
    assert json.loads((tmp_path / "out" / "verdict.json").read_text())["verdict"] == "NotApplicable"


def test_solve_divergence_exit_code(tmp_path, capsys):
    cfg = {"instance": "canonical", "mode": "discrete",
           "params": {"source": "explicit", "a0": 100.0, "a1": 0.25, "a2": 0.9}}
    code, _ = _run(tmp_path, capsys, "solve", cfg)
    assert code == 3


def test_compare_default_ordering_and_rows(tmp_path, capsys):
    code, out = _run(tmp_path, capsys, "compare", {"instance": "canonical"}, "--horizon", "40", "--dt", "0.01")
    assert code == 0
    slopes = {s["name"]: s["slope"] for s in json.loads(out)["systems"]}
    assert slopes["third_order"] <= slopes["second_order"] <= slopes["first_order"] + 0.1
    with open(tmp_path / "out" / "compare.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "psi_norm_first_order", "psi_norm_second_order", "psi_norm_third_order"]
    assert len(rows) - 1 == round(40 / 0.01) + 1


def test_compare_identical_systems_give_identical_columns(tmp_path, capsys):
    sys2 = {"order": 2, "kappa": 2.0, "rho": 1.0}
    code, _ = _run(tmp_path, capsys, "compare", {"instance": "canonical", "systems": [sys2, sys2],
                                                 "horizon": 2.0})
    assert code == 0
    with open(tmp_path / "out" / "compare.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) - 1 == 201
    assert all(r[1] == r[2] for r in rows[1:])


def test_tune_canonical(tmp_path, capsys):
    code, out = _run(tmp_path, capsys, "tune", {"instance": "canonical"})
    report = json.loads(out)
    assert code == 0 and report["empty"] == []
    regions = {r["region"]: r for r in report["regions"]}
    assert {"cor35", "thm36", "eps2", "cor43", "common-continuous", "common-discrete"} == set(regions)
    assert all(r["checker"]["verdict"] for r in regions.values())
    assert regions["thm36"]["max_feasible_eps"] >= 1
    assert regions["eps2"]["max_feasible_eps"] >= 2


def test_audit_canonical(tmp_path, capsys):
    code, out = _run(tmp_path, capsys, "audit", {"instance": "canonical", "trials": 1000})
    assert code == 0 and json.loads(out)["ok"]


def test_audit_corrupted_lipschitz_constant(tmp_path, capsys):
    inst = canonical_instance().with_constants(eta=0.5)
    save_instance(inst, tmp_path / "bad.json")
    code, out = _run(tmp_path, capsys, "audit", {"instance": {"path": "bad.json"}})
    assert code == 5
    audits = {a["name"]: a for a in json.loads(out)["audits"]}
    assert not audits["constants"]["ok"]
    assert audits["constants"]["worst_slack"]["lipschitz_F"] < 0


def test_audit_unconstrained_prox_slacks_vanish(tmp_path, capsys):
    recipe = {"family": "scaled-identity", "dim": 3, "gamma": 1.0, "omega": {"variant": "whole-space"}}
    code, out = _run(tmp_path, capsys, "audit", {"instance": {"recipe": recipe}, "trials": 200})
    assert code == 0
    prox = next(a for a in json.loads(out)["audits"] if a["name"] == "prox")
    assert all(abs(v) <= 1e-12 for v in prox["worst_slack"].values())


def test_outputs_are_byte_identical(tmp_path, capsys):
    cfg = {"instance": {"recipe": {"family": "spd-affine", "dim": 4, "seed": 5}}, "mode": "discrete",
           "params": {"source": "cor43"}, "max_iter": 3000}
    outputs = []
    for run in ("a", "b"):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["solve", "--config", str(path), "--out", str(tmp_path / run)]) == 0
        outputs.append([(tmp_path / run / f).read_bytes() for f in ("history.csv", "fit.json", "verdict.json")])
    capsys.readouterr()
    assert outputs[0] == outputs[1]


def test_toml_config_and_flag_override(tmp_path, capsys):
    (tmp_path / "cfg.toml").write_text('instance = "canonical"\nmode = "continuous-1st"\n'
                                       'horizon = 5.0\n[params]\nsource = "explicit"\nrho = 1.0\n')
    code = main(["solve", "--config", str(tmp_path / "cfg.toml"), "--horizon", "2",
                 "--out", str(tmp_path / "o")])
    capsys.readouterr()
    assert code == 0
    lines = (tmp_path / "o" / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 1 + 201


@pytest.mark.parametrize("cfg", [
    {"mode": "sideways"},
    {"mode": "discrete", "params": {"source": "eps2"}},
    {"params": {"source": "cor35", "a0": 1.0}},
    {"unexpected": 1},
])
def test_bad_configs_exit_one(tmp_path, capsys, cfg):
    code, _ = _run(tmp_path, capsys, "solve", cfg)
    assert code == 1
