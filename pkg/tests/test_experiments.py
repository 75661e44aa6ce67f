import csv
import json
import math

import numpy as np
import pytest

from monowave import MemoryGuard
from monowave.errors import ConfigError
from monowave.experiments import cli
from monowave.experiments.config import ExperimentConfig, load_config, parse_config
from monowave.experiments.io import Table, format_cell
from monowave.experiments.runners import (
    run_covariance_check,
    run_kernel_profile,
    run_modes,
    run_supnorm_scan,
    run_tail_scan,
    run_theorem1,
    run_variance_scan,
    sup_norms,
)
from monowave import Circle, CoefficientLaw, SpectralWindow, enumerate_modes

TORUS = {"kind": "torus", "lengths": [2 * math.pi, 2 * math.pi]}
SMALL = {"manifold": TORUS, "T_values": [10, 14], "samples": 400, "single_point_samples": 1000,
         "epsilons": [0.0, 0.5], "rT_values": [3, 5], "eta_rule": {"kind": "fixed", "value": 4}}


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# config


def test_config_round_trip():
    cfg = parse_config(SMALL)
    again = parse_config(json.loads(cfg.canonical_json()))
    assert again == cfg and again.canonical_json() == cfg.canonical_json()


def test_default_config_is_valid():
    cfg = ExperimentConfig().replace()
    assert cfg.schedule()[0][0] == 20.0


@pytest.mark.parametrize("bad", [
    {"unknown": 1},
    {"T_values": [5], "eta_rule": {"kind": "fixed", "value": 6}},
    {"T_values": [10], "r_rule": {"kind": "fixed", "value": 4.0}},
    {"manifold": {"kind": "klein"}},
    {"manifold": {"kind": "sphere", "radius": 2}},
    {"law": "cauchy"},
    {"c": 0.5},
    {"samples": 0},
    {"seed": -1},
    {"eta_rule": {"kind": "log_power"}},
    {"T_values": []},
])
def test_config_rejections(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_schedules():
    cfg = parse_config({"T_values": [math.e**2]})
    T, eta, radii = cfg.schedule()[0]
    assert eta == pytest.approx(4.0) and radii[0] == pytest.approx(4.0 / T)
    assert cfg.spacing(T) == pytest.approx(1 / T)
    assert parse_config({"grid_spacing": 0.2}).spacing(10) == 0.2


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(SMALL))
    assert load_config(p) == parse_config(SMALL)


# io


def test_format_cell():
    assert format_cell(True) == "true" and format_cell(np.bool_(False)) == "false"
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(float("nan")) == "nan" and format_cell(None) == ""
    assert float(format_cell(math.pi)) == math.pi


def test_table_rejects_wrong_keys():
    t = Table("t", ["a", "b"])
    t.add(a=1, b=2)
    with pytest.raises(KeyError):
        t.add(a=1)
    assert t.to_csv() == "a,b\n1,2\n"


# runners


def test_modes_examples():
    circle = run_modes(parse_config({"manifold": {"kind": "circle"}, "T_values": [4.5],
                                     "eta_rule": {"kind": "fixed", "value": 2}, "r_rule": {"kind": "fixed", "value": 0.5}}))
    assert circle.tables[0].rows[0]["N"] == 4
    sphere = run_modes(parse_config({"manifold": {"kind": "sphere"}, "T_values": [10.5],
                                     "eta_rule": {"kind": "fixed", "value": 0.6}, "r_rule": {"kind": "fixed", "value": 0.5}}))
    assert sphere.tables[0].rows[0]["N"] == 21
    torus = run_modes(parse_config({"T_values": [40, 40, 40], "eta_rule": {"kind": "fixed", "value": 8},
                                    "r_rule": {"kind": "fixed", "value": 0.5}}))
    assert set(torus.tables[0].column("status")) == {"ok"}


def test_modes_reports_empty_window_per_row():
    res = run_modes(parse_config({"manifold": {"kind": "circle"}, "T_values": [3.5, 4.1],
                                  "eta_rule": {"kind": "fixed", "value": 0.2}, "r_rule": {"kind": "fixed", "value": 0.5}}))
    assert res.tables[0].column("status") == ["EmptyWindow", "ok"]


def test_kernel_profile_circle_row():
    cfg = parse_config({"manifold": {"kind": "circle"}, "T_values": [5.0], "eta_rule": {"kind": "fixed", "value": 0.5},
                        "r_rule": {"kind": "fixed", "value": 0.5}, "rho_points": 11})
    rows = run_kernel_profile(cfg).tables[0].rows
    for row in rows:
        assert row["K_exact"] == pytest.approx(math.cos(5 * row["rho"]) / math.pi, abs=1e-13)


def test_kernel_profile_sphere_addition_theorem():
    from scipy.special import eval_legendre

    cfg = parse_config({"manifold": {"kind": "sphere"}, "T_values": [10.5], "eta_rule": {"kind": "fixed", "value": 0.6},
                        "r_rule": {"kind": "fixed", "value": 0.5}, "rho_points": 21})
    res = run_kernel_profile(cfg)
    for row in res.tables[0].rows:
        ref = 21 / (4 * math.pi) * eval_legendre(10, math.cos(row["rho"]))
        assert row["K_exact"] == pytest.approx(ref, abs=1e-10)
    assert all(isinstance(v, bool) for v in res.tables[0].column("dominated"))


def test_variance_scan_whole_manifold_row():
    cfg = parse_config({**SMALL, "include_whole_manifold": True})
    res = run_variance_scan(cfg)
    rows = [r for r in res.tables[0].rows if r["domain"] == "manifold"]
    assert len(rows) == 2
    for r in rows:
        assert r["variance_exact"] == pytest.approx(2 / r["N"], rel=1e-10)
    assert all(res.tables[0].column("within_fitted_envelope"))
    assert res.summary["slopes"][0]["slope"] < 0


def test_tail_scan_rows():
    res = run_tail_scan(parse_config(SMALL))
    rows = res.tables[0].rows
    zero = [r for r in rows if r["epsilon"] == 0.0]
    assert all(r["empirical"] == 1.0 for r in zero)
    assert all(r["samples"] == 400 and r["stderr"] >= 0 for r in rows)


def test_tail_bound_decreases_with_eta():
    cfg = parse_config({**SMALL, "T_values": [20, 20, 20], "rT_values": [6]})
    bounds = []
    for eta in (3.0, 6.0, 12.0):
        c = cfg.replace(eta_rule={"kind": "fixed", "value": eta}, T_values=[20], samples=50, epsilons=[0.5])
        bounds.append(run_tail_scan(c).tables[0].rows[0]["analytic_upper"])
    assert bounds[0] > bounds[1] > bounds[2]


def test_covariance_check_coefficients():
    res = run_covariance_check(parse_config({**SMALL, "T_values": [10], "rT_values": [3]}))
    rows = {r["law"]: r for r in res.tables[0].rows}
    s4 = rows["gaussian"]["sigma2"] ** 2
    assert rows["gaussian"]["fourth_moment_coefficient"] == 0
    assert rows["rademacher"]["fourth_moment_coefficient"] == pytest.approx(-2 * s4)
    assert rows["uniform"]["fourth_moment_coefficient"] == pytest.approx(-6 * s4 / 5)
    assert len(res.summary["law_differences"]) == 2


def test_theorem1_sup_dominates_single_point():
    cfg = parse_config({**SMALL, "rT_values": None, "samples": 24, "epsilons": [0.5]})
    res = run_theorem1(cfg)
    samples, summary = res.tables
    assert len(samples.rows) == 48
    assert all(r["sup_deviation"] >= r["single_point_deviation"] for r in samples.rows)
    assert {r["grid_size"] for r in summary.rows} == {63**2, 88**2}


def test_theorem1_generic_path_on_sphere():
    cfg = parse_config({"manifold": {"kind": "sphere"}, "T_values": [6.5], "eta_rule": {"kind": "fixed", "value": 2},
                        "r_rule": {"kind": "fixed", "value": 0.6}, "samples": 16, "single_point_samples": 500,
                        "epsilons": [0.5]})
    samples, summary = run_theorem1(cfg).tables
    assert all(r["sup_deviation"] >= r["single_point_deviation"] for r in samples.rows)
    assert summary.rows[0]["grid_size"] > 100


def test_theorem1_memory_guard():
    cfg = parse_config({**SMALL, "rT_values": None, "samples": 4})
    with pytest.raises(MemoryGuard):
        run_theorem1(cfg, budget_mb=0.01)
    sphere = parse_config({"manifold": {"kind": "sphere"}, "T_values": [6.5], "eta_rule": {"kind": "fixed", "value": 2},
                           "r_rule": {"kind": "fixed", "value": 0.6}, "samples": 4})
    with pytest.raises(MemoryGuard):
        run_theorem1(sphere, budget_mb=0.01)


def test_supnorm_single_mode_circle():
    modes = enumerate_modes(Circle(), SpectralWindow(3.0, 0.5))[:1]
    law = CoefficientLaw("rademacher", 2.0)
    sup = sup_norms(Circle(), modes, law, 5, 10, 4)
    assert np.allclose(sup, math.sqrt(2.0) / math.sqrt(math.pi))


def test_supnorm_quantiles_grow_with_N():
    cfg = parse_config({**SMALL, "T_values": [6, 12, 24], "rT_values": None, "samples": 300})
    q50 = run_supnorm_scan(cfg).tables[0].column("q50")
    assert q50[0] < q50[1] < q50[2]


# cli


def test_cli_writes_tables_and_manifest(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(SMALL))
    out = tmp_path / "out"
    assert cli.main(["tail-scan", "--config", str(cfg_path), "--out", str(out), "--seed", "7"]) == 0
    rows = _read(out / "tail-scan.csv")
    assert len(rows) == 8 and {r["seed"] for r in rows} != {"7"}
    manifest = json.loads((out / "tail-scan.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["config"]["seed"] == 7
    assert {"numpy", "scipy", "python", "monowave"} <= set(manifest["versions"])
    assert "total" in manifest["wall_times_s"]
    assert str(out / "tail-scan.csv") in capsys.readouterr().out


def test_cli_rejects_bad_config_before_compute(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"T_values": [5], "eta_rule": {"kind": "fixed", "value": 9}}))
    assert cli.main(["theorem1-run", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 2
    assert "eta" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_cli_print_config(capsys):
    assert cli.main(["modes", "--print-config", "--seed", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 3


def test_cli_memory_guard_exit_code(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({**SMALL, "rT_values": None, "samples": 4}))
    assert cli.main(["theorem1-run", "--config", str(cfg_path), "--out", str(tmp_path / "o"),
                     "--budget-mb", "0.01"]) == 2


def test_rerun_is_byte_identical(tmp_path):
    cfg = parse_config(SMALL)
    a = cli.run("covariance-check", cfg, workers=1, out=tmp_path / "a")
    b = cli.run("covariance-check", cfg, workers=2, out=tmp_path / "b")
    assert a[0].read_bytes() == b[0].read_bytes()
