import json
import os

import numpy as np
import pytest

from nvmech.cli import main
from nvmech.experiments import (
    COMBINED_PULSES,
    EXPERIMENT_KINDS,
    PROFILES,
    ExperimentConfig,
    ResultRecord,
    run_experiment,
    run_noise_verify,
    run_spinflip,
    run_transform_check,
)

TWO_PI = 2 * np.pi


class TestExperimentConfig:
    def test_kind_validated(self):
        with pytest.raises(ValueError, match="unknown experiment"):
            ExperimentConfig(experiment="nope")

    def test_profile_validated(self):
        with pytest.raises(ValueError, match="profile"):
            ExperimentConfig(experiment="spinflip", profile="fast")

    def test_pulse_timing_validated(self):
        with pytest.raises(ValueError, match="pulse_timing"):
            ExperimentConfig(experiment="graph", pulse_timing="random")

    def test_samples_validated(self):
        with pytest.raises(ValueError):
            ExperimentConfig(experiment="spinflip", samples=1)

    def test_scalars_promoted_to_lists(self):
        cfg = ExperimentConfig(experiment="bell-damping", q_factor=1e6, t2n=1e-3)
        assert cfg.q_factor == [1e6]
        assert cfg.t2n == [1e-3]

    def test_fock_dim_defaults(self):
        cfg = ExperimentConfig(experiment="bell-damping")
        assert cfg.fock_dim(thermal=False) == 8
        assert cfg.fock_dim(thermal=True) == 24
        cfg = ExperimentConfig(experiment="bell-damping", n_max=12)
        assert cfg.fock_dim(thermal=True) == 12

    def test_profile_realizations(self):
        assert PROFILES == {"ci": 300, "paper": 3000}
        cfg = ExperimentConfig(experiment="graph", profile="ci")
        assert cfg.n_realizations() == 300
        cfg = ExperimentConfig(experiment="graph", profile="ci", realizations=7)
        assert cfg.n_realizations() == 7

    def test_gate_time_quarter_period(self):
        cfg = ExperimentConfig(experiment="bell-nuclear-noise")
        assert cfg.gate_time() == pytest.approx(1.25e-3, rel=1e-12)
        cfg = ExperimentConfig(experiment="bell-nuclear-noise", total_time=1e-3)
        assert cfg.gate_time() == 1e-3

    def test_schedule_kinds(self):
        cfg = ExperimentConfig(experiment="graph")
        assert cfg.schedule(0, 1.0) is None
        assert cfg.schedule(2, 4.0).times == (1.0, 3.0)
        cfg = ExperimentConfig(experiment="graph", pulse_timing="periodic")
        assert cfg.schedule(3, 4.0).times == (1.0, 2.0, 3.0)

    def test_json_roundtrip(self, tmp_path):
        cfg = ExperimentConfig(experiment="spinflip", seed=99, samples=11)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = ExperimentConfig.from_json(str(path))
        assert loaded == cfg

    def test_json_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"experiment": "spinflip", "bogus": 1}))
        with pytest.raises(ValueError, match="unknown config fields"):
            ExperimentConfig.from_json(str(path))

    def test_json_overrides_win(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"experiment": "spinflip", "seed": 1}))
        loaded = ExperimentConfig.from_json(str(path), seed=2, samples=None)
        assert loaded.seed == 2
        assert loaded.samples == 101  # None overrides are ignored


class TestResultRecord:
    def test_column_lengths_checked(self):
        with pytest.raises(ValueError, match="lengths"):
            ResultRecord("x", np.zeros(3), np.zeros(2), np.zeros(3))

    def test_range_checked(self):
        with pytest.raises(ValueError, match="outside"):
            ResultRecord("x", np.zeros(2), np.array([0.5, 1.5]), np.zeros(2))
        # tiny numerical overshoot is clipped, not rejected
        r = ResultRecord("x", np.zeros(2), np.array([0.0, 1.0 + 1e-12]), np.zeros(2))
        assert r.mean.max() == 1.0

    def test_write_csv_schema(self, tmp_path):
        cfg = ExperimentConfig(experiment="spinflip", out_dir=str(tmp_path))
        r = ResultRecord("demo", np.array([0.0, 1e-3]), np.array([0.25, 0.5]),
                         np.array([0.0, 0.01]))
        csv_path, json_path = r.write(str(tmp_path), cfg, {"checked": False}, 0.1)
        raw = open(csv_path, "rb").read()
        assert b"\r" not in raw  # LF endings
        lines = raw.decode().splitlines()
        assert lines[0] == "time_s,mean_fidelity,stderr"
        assert lines[1] == "0,0.25,0"
        assert lines[2] == "0.001,0.5,0.01"
        side = json.loads(open(json_path).read())
        for key in ("experiment", "record", "config", "seed", "convergence",
                    "wall_clock_s", "version", "metadata"):
            assert key in side
        assert side["config"]["experiment"] == "spinflip"

    def test_write_is_atomic(self, tmp_path):
        cfg = ExperimentConfig(experiment="spinflip", out_dir=str(tmp_path))
        r = ResultRecord("demo", np.zeros(2), np.zeros(2), np.zeros(2))
        r.write(str(tmp_path), cfg, {}, 0.0)
        leftovers = [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]
        assert leftovers == []


class TestRunners:
    def test_spinflip_effective_is_sine_squared(self, tmp_path, j_nuclear):
        cfg = ExperimentConfig(
            experiment="spinflip", samples=21, out_dir=str(tmp_path),
            skip_convergence_check=True,
        )
        records = run_spinflip(cfg)
        names = [r.name for r in records]
        assert names == ["spinflip_exact", "spinflip_effective"]
        eff = records[1]
        oracle = np.sin(j_nuclear * eff.times) ** 2
        assert np.abs(eff.mean - oracle).max() < 1e-6
        exact = records[0]
        assert np.abs(exact.mean - oracle).max() < 0.05

    def test_transform_check_rows(self):
        cfg = ExperimentConfig(experiment="transform-check")
        (record,) = run_transform_check(cfg)
        rows = dict(zip(record.metadata["rows"], record.mean))
        assert rows["sw_residual_ratio"] <= 1.25e-3
        assert rows["linear_coupling_residual_ratio"] <= 1e-9
        assert rows["j_nuclear_extraction_rel_err"] <= 1e-12
        assert rows["j_electron_extraction_rel_err"] <= 1e-12

    def test_noise_verify_fits_recorded(self):
        cfg = ExperimentConfig(
            experiment="noise-verify", realizations=200, samples=41, seed=7
        )
        records = run_noise_verify(cfg)
        assert [r.name for r in records] == ["noise-autocorrelation", "noise-fid"]
        acf, fid = records
        assert acf.metadata["tau_fit"] == pytest.approx(20e-3, rel=0.5)
        assert fid.metadata["t2_fit"] == pytest.approx(20e-6, rel=0.2)

    def test_run_experiment_writes_all_records(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="transform-check", out_dir=str(tmp_path)
        )
        paths = run_experiment(cfg)
        assert len(paths) == 1
        for csv_path, json_path in paths:
            assert os.path.exists(csv_path)
            assert os.path.exists(json_path)

    def test_rerun_is_bit_identical(self, tmp_path):
        def one(sub):
            out = tmp_path / sub
            cfg = ExperimentConfig(
                experiment="bell-nuclear-noise", profile="ci", realizations=8,
                samples=5, t2n=[1e-3], out_dir=str(out), seed=42,
                skip_convergence_check=True,
            )
            paths = run_experiment(cfg)
            return [open(p, "rb").read() for p, _ in paths]

        assert one("a") == one("b")

    def test_combined_pulse_count_is_pinned(self):
        assert COMBINED_PULSES == 37


class TestCLI:
    def test_transform_check_exit_zero(self, tmp_path, capsys):
        rc = main(["transform-check", "--out", str(tmp_path)])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].endswith(".csv") and lines[1].endswith(".json")
        assert os.path.exists(lines[0])

    def test_every_kind_has_a_subcommand(self):
        from nvmech.cli import build_parser

        parser = build_parser()
        subactions = next(
            a for a in parser._actions if hasattr(a, "_name_parser_map")
        )
        for kind in EXPERIMENT_KINDS:
            assert kind in subactions._name_parser_map
        assert "run" in subactions._name_parser_map

    def test_validation_error_exit_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"experiment": "spinflip", "bogus": 1}))
        rc = main(["run", "--config", str(bad)])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_malformed_json_exit_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = main(["run", "--config", str(bad)])
        assert rc == 2

    def test_missing_experiment_exit_two(self, capsys):
        rc = main(["run"])
        assert rc == 2
        assert "no experiment" in capsys.readouterr().err

    def test_unconverged_truncation_exit_three(self, tmp_path, capsys):
        with pytest.warns(UserWarning):
            rc = main([
                "spinflip", "--out", str(tmp_path), "--n-max", "2",
                "--samples", "5",
                "--config", str(_write_cfg(tmp_path, coupling=TWO_PI * 0.5e6)),
            ])
        assert rc == 3
        assert "convergence" in capsys.readouterr().err

    def test_plot_written(self, tmp_path, capsys):
        rc = main([
            "noise-verify", "--out", str(tmp_path), "--realizations", "20",
            "--samples", "11", "--plot",
        ])
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        pngs = [line for line in out if line.endswith(".png")]
        assert len(pngs) == 2
        for p in pngs:
            assert os.path.getsize(p) > 0


def _write_cfg(tmp_path, **fields):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"experiment": "spinflip", **fields}))
    return path
