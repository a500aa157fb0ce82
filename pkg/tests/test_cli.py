"""End-to-end tests for the scenario command line."""

import contextlib
import io
import os
import subprocess
import sys

import numpy as np
import pytest

from bayesfilt.cli import main


def run_cli(args):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        rc = main(list(args))
    return rc, out.getvalue(), err.getvalue()


def metrics_of(stdout):
    got = {}
    for line in stdout.splitlines():
        key, _, value = line.partition("=")
        got[key] = value
    return got


FAST_GP_PF = ["--steps", "10", "--n-particles", "100", "--n-pairs", "50",
              "--train-max-iters", "40", "--train-restarts", "1"]


class TestScenariosRun:
    def test_kalman_ar2(self, tmp_path):
        rc, out, _ = run_cli(["kalman-ar2", "--seed", "3", "--out", str(tmp_path)])
        assert rc == 0
        m = metrics_of(out)
        assert float(m["rmse_filtered"]) < float(m["rmse_raw"])
        assert (tmp_path / "kalman_ar2.csv").exists()

    def test_pf_ungm(self, tmp_path):
        rc, out, _ = run_cli(["pf-ungm", "--seed", "1", "--steps", "25",
                              "--n-particles", "200", "--out", str(tmp_path)])
        assert rc == 0
        m = metrics_of(out)
        assert np.isfinite(float(m["rmse"]))
        assert int(m["resample_count"]) >= 1
        assert (tmp_path / "pf_ungm.csv").exists()

    def test_gp_demo(self, tmp_path):
        rc, out, _ = run_cli(["gp-demo", "--seed", "2", "--out", str(tmp_path)])
        assert rc == 0
        m = metrics_of(out)
        assert int(m["train_points"]) == 11
        assert (tmp_path / "gp_demo.csv").exists()
        assert (tmp_path / "gp_demo_train.csv").exists()

    def test_gp_train(self, tmp_path):
        rc, out, _ = run_cli(["gp-train", "--seed", "4", "--out", str(tmp_path)])
        assert rc == 0
        m = metrics_of(out)
        assert float(m["grad_norm"]) < 1e-3
        report = (tmp_path / "gp_train_report.txt").read_text()
        assert "final_lml=" in report and "grad_norm=" in report
        assert (tmp_path / "gp_train_data.csv").exists()

    def test_gp_train_reads_dataset_back(self, tmp_path):
        rc, _, _ = run_cli(["gp-train", "--seed", "4", "--out", str(tmp_path)])
        assert rc == 0
        rc, out, _ = run_cli(["gp-train", "--seed", "5", "--out", str(tmp_path),
                              "--data", str(tmp_path / "gp_train_data.csv")])
        assert rc == 0
        assert int(metrics_of(out)["n"]) == 50

    def test_gp_pf_demo(self, tmp_path):
        rc, out, _ = run_cli(["gp-pf-demo", "--seed", "0", "--out", str(tmp_path)]
                             + FAST_GP_PF)
        assert rc == 0
        m = metrics_of(out)
        assert np.isfinite(float(m["rmse_ratio"]))
        for name in ("gp_pf_pairs.csv", "gp_pf_known.csv", "gp_pf_learned.csv"):
            assert (tmp_path / name).exists()

    def test_gp_pf_demo_accepts_pairs_file(self, tmp_path):
        rc, out, _ = run_cli(["gp-pf-demo", "--seed", "0", "--out", str(tmp_path)]
                             + FAST_GP_PF)
        first = metrics_of(out)["rmse_ratio"]
        rc, out, _ = run_cli(["gp-pf-demo", "--seed", "0", "--out", str(tmp_path),
                              "--pairs", str(tmp_path / "gp_pf_pairs.csv")]
                             + FAST_GP_PF)
        assert rc == 0
        assert metrics_of(out)["rmse_ratio"] == first

    def test_console_entry_point(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "bayesfilt.cli", "kalman-ar2", "--seed", "1",
             "--steps", "30", "--out", str(tmp_path)],
            capture_output=True, text=True,
        )
        assert out.returncode == 0
        assert "rmse_filtered=" in out.stdout


class TestDeterminism:
    def run_twice(self, tmp_path, args):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            rc, _, _ = run_cli(args + ["--out", str(d)])
            assert rc == 0
        for name in sorted(os.listdir(a)):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_kalman_ar2(self, tmp_path):
        self.run_twice(tmp_path, ["kalman-ar2", "--seed", "11", "--steps", "60"])

    def test_pf_ungm(self, tmp_path):
        self.run_twice(tmp_path, ["pf-ungm", "--seed", "11", "--steps", "20",
                                  "--n-particles", "200"])

    def test_gp_demo(self, tmp_path):
        self.run_twice(tmp_path, ["gp-demo", "--seed", "11"])

    def test_gp_train(self, tmp_path):
        self.run_twice(tmp_path, ["gp-train", "--seed", "11", "--n", "30",
                                  "--max-iters", "150"])

    def test_gp_pf_demo(self, tmp_path):
        self.run_twice(tmp_path, ["gp-pf-demo", "--seed", "11"] + FAST_GP_PF)


class TestConfigFile:
    def test_config_overrides_defaults(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("# comment line\n\nsteps = 7\nseed = 9\n")
        rc, out, _ = run_cli(["pf-ungm", "--config", str(conf),
                              "--n-particles", "50", "--out", str(tmp_path)])
        assert rc == 0
        m = metrics_of(out)
        assert int(m["steps"]) == 7
        assert int(m["seed"]) == 9

    def test_flag_beats_config(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("steps = 7\nseed = 9\n")
        rc, out, _ = run_cli(["pf-ungm", "--config", str(conf), "--steps", "5",
                              "--seed", "2", "--n-particles", "50",
                              "--out", str(tmp_path)])
        assert rc == 0
        m = metrics_of(out)
        assert int(m["steps"]) == 5
        assert int(m["seed"]) == 2

    def test_unknown_key_is_a_config_error(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("stepz = 7\n")
        rc, _, err = run_cli(["pf-ungm", "--config", str(conf),
                              "--out", str(tmp_path)])
        assert rc == 2
        assert "stepz" in err

    def test_missing_config_file(self, tmp_path):
        rc, _, err = run_cli(["pf-ungm", "--config", str(tmp_path / "nope.conf"),
                              "--out", str(tmp_path)])
        assert rc == 4


class TestExitCodes:
    def test_invalid_parameter_value(self, tmp_path):
        rc, _, err = run_cli(["pf-ungm", "--steps", "0", "--out", str(tmp_path)])
        assert rc == 2

    def test_numerical_failure(self, tmp_path):
        rc, _, err = run_cli(["pf-ungm", "--x0", "1e160", "--steps", "3",
                              "--out", str(tmp_path)])
        assert rc == 3
        assert "ZeroTotalWeight" in err

    def test_missing_dataset_file(self, tmp_path):
        rc, _, err = run_cli(["gp-train", "--data", str(tmp_path / "absent.csv"),
                              "--out", str(tmp_path)])
        assert rc == 4


class TestScenarioBehavior:
    def test_kalman_survives_huge_observation_noise(self, tmp_path):
        rc, out, _ = run_cli(["kalman-ar2", "--seed", "0", "--r", "1e12",
                              "--out", str(tmp_path)])
        assert rc == 0
        assert np.isfinite(float(metrics_of(out)["rmse_filtered"]))

    def test_resampling_rescues_final_ess(self, tmp_path):
        """Same seed: the resampling run ends at least as healthy as pure SIS."""
        base = ["pf-ungm", "--seed", "5", "--out", str(tmp_path)]
        rc, out0, _ = run_cli(base + ["--resample-frac", "0"])
        assert rc == 0
        m0 = metrics_of(out0)
        rc, out25, _ = run_cli(base + ["--resample-frac", "0.25"])
        assert rc == 0
        m25 = metrics_of(out25)
        assert int(m0["resample_count"]) == 0
        assert float(m25["final_ess"]) >= float(m0["final_ess"])

    def test_two_particles_completes_or_fails_loudly(self, tmp_path):
        rc, out, err = run_cli(["pf-ungm", "--n-particles", "2",
                                "--out", str(tmp_path)])
        if rc == 0:
            assert np.isfinite(float(metrics_of(out)["rmse"]))
        else:
            assert rc == 3
            assert "ZeroTotalWeight" in err

    def test_gp_demo_band_calibration(self, tmp_path):
        counts = []
        for seed in range(20):
            rc, out, _ = run_cli(["gp-demo", "--seed", str(seed),
                                  "--out", str(tmp_path)])
            assert rc == 0
            counts.append(int(metrics_of(out)["train_inside_band"]))
        assert np.median(counts) >= 10

    def test_gp_demo_far_band_approaches_prior(self, tmp_path):
        rc, out, _ = run_cli(["gp-demo", "--seed", "0", "--out", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "gp_demo.csv").read_text().splitlines()
        assert rows[0] == "x_star,mean,variance,lower95,upper95"
        assert float(rows[1].split(",")[0]) == -2.0
        half_width = float(metrics_of(out)["far_band_half_width"])
        assert half_width == pytest.approx(2.0 * np.sqrt(1.1), rel=0.02)
