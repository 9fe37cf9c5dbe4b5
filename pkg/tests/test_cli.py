import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from attackkf.cli import main
from attackkf.config import load_config
from attackkf.files import read_measurements
from attackkf.filtering import standard_kf_rtss

ATTACK = dict(
    alpha_a=0.3, alpha_b=0.7, alpha_c=0.9, alpha_m=0.1,
    mu_a=[0.7, 0.9], Sigma_a=[[1.0, 0.0], [0.0, 0.5]], mu_m=0.95, sigma_m_sq=0.01,
)


def write_cfg(tmp_path, name="run.yaml", attack=None, execution=None, scenario=None):
    cfg = {"scenario": scenario or {"preset": "paper-default"}}
    if attack is not None:
        cfg["attack"] = attack
    cfg["execution"] = {"out": str(tmp_path / "out"), **(execution or {})}
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def noiseless_scenario(horizon=40, r=0.0):
    z4 = np.zeros((4, 4)).tolist()
    x0 = [200.0, 200.0, 15.0, 15.0]
    return {
        "sample_time": 0.05, "horizon": horizon, "turn_rate": {"value": 3, "unit": "deg/s"},
        "Q": z4, "R": [[r, 0.0], [0.0, r]], "x0": x0, "x0_cov": z4,
        "init_mean": x0, "init_cov": z4,
    }


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])


class TestSimulate:
    def test_row_counts(self, tmp_path):
        assert main(["simulate", "--config", write_cfg(tmp_path), "--seed", "7"]) == 0
        out = tmp_path / "out"
        for name, width in (("truth.csv", 5), ("measurements.csv", 3), ("attacks.csv", 6)):
            lines = (out / name).read_text().splitlines()
            assert len(lines) == 401, name
            assert len(lines[0].split(",")) == width
        assert (out / "attacks.csv").read_text().splitlines()[0] == "step,xi_b,xi_c,xi_a,xi_m,attack_type"

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_cfg(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", cfg, "--seed", "7", "--out", str(a)])
        main(["simulate", "--config", cfg, "--seed", "7", "--out", str(b)])
        for name in ("truth.csv", "measurements.csv", "attacks.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        main(["simulate", "--config", cfg, "--seed", "8", "--out", str(b)])
        assert (a / "measurements.csv").read_bytes() != (b / "measurements.csv").read_bytes()

    def test_no_attack_log(self, tmp_path):
        cfg = write_cfg(tmp_path, attack={"alpha_b": 1.0})
        assert main(["simulate", "--config", cfg]) == 0
        rows = (tmp_path / "out" / "attacks.csv").read_text().splitlines()[1:]
        assert {r.split(",")[-1] for r in rows} == {"NoAttack"}

    def test_json_format(self, tmp_path):
        cfg = write_cfg(tmp_path, execution={"format": "json"})
        assert main(["simulate", "--config", cfg]) == 0
        recs = json.loads((tmp_path / "out" / "truth.json").read_text())
        assert len(recs) == 400 and list(recs[0]) == ["step", "x1", "x2", "x3", "x4"]

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, attack={"alpha_c": 1.3})
        assert main(["simulate", "--config", cfg]) == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "config" and any("alpha_c" in v for v in err["violations"])

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["simulate", "--config", write_cfg(tmp_path), "--out", str(blocker / "sub")]) == 1


class TestEstimate:
    def test_row_counts_and_columns(self, tmp_path):
        cfg = write_cfg(tmp_path)
        main(["simulate", "--config", cfg, "--seed", "7"])
        meas = tmp_path / "out" / "measurements.csv"
        assert main(["estimate", str(meas), "--config", cfg, "--out", str(tmp_path / "est")]) == 0
        for name in ("filtered.csv", "smoothed.csv"):
            header, data = read_csv(tmp_path / "est" / name)
            assert header == ["step", "x1", "x2", "x3", "x4", "P11", "P22", "P33", "P44"]
            assert data.shape == (400, 9)
            assert np.all(data[:, 5:] > 0)

    def test_no_attack_matches_standard(self, tmp_path):
        cfg = write_cfg(tmp_path, attack={"alpha_b": 1.0})
        main(["simulate", "--config", cfg, "--seed", "3"])
        meas = tmp_path / "out" / "measurements.csv"
        assert main(["estimate", str(meas), "--config", cfg, "--out", str(tmp_path / "est")]) == 0
        sc = load_config(cfg).scenario
        rec, sm = standard_kf_rtss(sc.init_estimator, read_measurements(meas), sc.model)
        _, filt = read_csv(tmp_path / "est" / "filtered.csv")
        _, smooth = read_csv(tmp_path / "est" / "smoothed.csv")
        np.testing.assert_allclose(filt[:, 1:5], [r.posterior.mean for r in rec], atol=1e-10, rtol=0)
        np.testing.assert_allclose(smooth[:, 1:5], sm.means(), atol=1e-10, rtol=0)
        np.testing.assert_allclose(smooth[:, 5:], [np.diag(P) for P in sm.covs()], atol=1e-10, rtol=0)

    def test_bad_cell_reports_line(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        rows = ["step,y1,y2"] + [f"{k},1.0,2.0" for k in range(1, 31)]
        rows[16] = "16,abc,2.0"  # file line 17
        meas = tmp_path / "bad.csv"
        meas.write_text("\n".join(rows) + "\n")
        assert main(["estimate", str(meas), "--config", cfg]) == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["line"] == 17 and "17" in err["message"]

    def test_dimension_mismatch(self, tmp_path):
        cfg = write_cfg(tmp_path)
        meas = tmp_path / "m.csv"
        meas.write_text("step,y1,y2,y3\n1,1,2,3\n")
        assert main(["estimate", str(meas), "--config", cfg]) == 2

    def test_full_cov_and_measurements_from_config(self, tmp_path):
        cfg = write_cfg(tmp_path)
        main(["simulate", "--config", cfg, "--seed", "1"])
        cfg2 = write_cfg(tmp_path, "est.yaml", execution={
            "measurements": str(tmp_path / "out" / "measurements.csv"), "out": str(tmp_path / "est"),
        })
        assert main(["estimate", "--config", cfg2, "--full-cov"]) == 0
        cov = json.loads((tmp_path / "est" / "covariances.json").read_text())
        assert len(cov["filtered"]) == 400 and np.array(cov["smoothed"]).shape == (400, 4, 4)
        _, filt = read_csv(tmp_path / "est" / "filtered.csv")
        np.testing.assert_allclose(filt[:, 5:], [np.diag(P) for P in cov["filtered"]], rtol=1e-15)

    def test_missing_measurement_file_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, execution={"measurements": str(tmp_path / "nope.csv")})
        assert main(["estimate", "--config", cfg]) == 1


class TestBenchmark:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = write_cfg(tmp_path, execution={"runs": 2, "base_seed": 5})
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["benchmark", "--config", cfg, "--out", str(a)]) == 0
        assert main(["benchmark", "--config", cfg, "--out", str(b)]) == 0
        assert (a / "rmse.csv").read_bytes() == (b / "rmse.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
        header, data = read_csv(a / "rmse.csv")
        assert header[:4] == ["step", "time_s", "ProposedKF_pos_rmse", "ProposedKF_vel_rmse"]
        assert data.shape == (400, 10)
        summary = json.loads((a / "summary.json").read_text())
        assert summary["runs"] == 2 and summary["base_seed"] == 5
        assert "wall_time_s" in json.loads((a / "timing.json").read_text())

    def test_noiseless_attack_free_is_zero(self, tmp_path):
        cfg = write_cfg(
            tmp_path, scenario=noiseless_scenario(), attack={**ATTACK, "alpha_b": 1.0},
            execution={"runs": 1, "singular": "pinv"},
        )
        assert main(["benchmark", "--config", cfg]) == 0
        _, data = read_csv(tmp_path / "out" / "rmse.csv")
        assert np.max(np.abs(data[:, 2:])) < 1e-9
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["methods"]["ProposedKF"]["position"]["mean_rmse_after_transient"] is None

    def test_noiseless_without_fallback_is_numerical_error(self, tmp_path, capsys):
        cfg = write_cfg(
            tmp_path, scenario=noiseless_scenario(r=1.0), attack={**ATTACK, "alpha_b": 1.0},
            execution={"runs": 1},
        )
        assert main(["benchmark", "--config", cfg]) == 3
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "numerical" and err["step"] is not None

    def test_methods_flag(self, tmp_path):
        cfg = write_cfg(tmp_path)
        assert main(["benchmark", "--config", cfg, "--runs", "1", "--methods", "StandardKF,ProposedKF"]) == 0
        header, _ = read_csv(tmp_path / "out" / "rmse.csv")
        assert header == ["step", "time_s", "ProposedKF_pos_rmse", "ProposedKF_vel_rmse",
                          "StandardKF_pos_rmse", "StandardKF_vel_rmse"]
        assert main(["benchmark", "--config", cfg, "--runs", "1", "--methods", "Nope"]) == 1


class TestValidate:
    def test_preset_valid(self, tmp_path, capsys):
        assert main(["validate", "--config", write_cfg(tmp_path)]) == 0
        assert json.loads(capsys.readouterr().out)["valid"] is True

    def test_probability_out_of_range(self, tmp_path, capsys):
        assert main(["validate", "--config", write_cfg(tmp_path, attack={"alpha_c": 1.3})]) == 1
        rep = json.loads(capsys.readouterr().out)
        assert rep["valid"] is False and any("alpha_c" in v for v in rep["violations"])

    def test_indefinite_sigma_a(self, tmp_path, capsys):
        assert main(["validate", "--config", write_cfg(tmp_path, attack={"Sigma_a": [[1, 2], [2, 1]]})]) == 1
        rep = json.loads(capsys.readouterr().out)
        assert any("Sigma_a" in v for v in rep["violations"])

    def test_lists_every_violation(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, attack={"alpha_c": 1.3, "Sigma_a": [[1, 2], [2, 1]]}, execution={"runs": 0})
        assert main(["validate", "--config", cfg]) == 1
        assert len(json.loads(capsys.readouterr().out)["violations"]) >= 3

    def test_explicit_scenario_valid(self, tmp_path):
        cfg = write_cfg(tmp_path, scenario=noiseless_scenario(), attack=ATTACK, execution={"singular": "pinv"})
        assert main(["validate", "--config", cfg]) == 0

    def test_unreadable_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "missing.yaml")]) == 1


def test_usage_error_exit_code(capsys):
    assert main(["frobnicate"]) == 1
    assert main([]) == 1


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "attackkf", "validate", "--config", cfg], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
