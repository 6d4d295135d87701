"""CLI and experiment-driver tests: config validation, file outputs,
schemas, and byte-identical reruns."""

import filecmp
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from fmanneal import cli
from fmanneal import experiments as exp


def run_cli(*argv) -> int:
    return cli.main(list(argv))


def data_files(out_dir):
    """All output files except the manifest (whose wall time may differ)."""
    return sorted(
        p.relative_to(out_dir)
        for p in Path(out_dir).rglob("*")
        if p.is_file() and p.name != "manifest.json"
    )


def assert_identical_trees(a, b):
    files_a, files_b = data_files(a), data_files(b)
    assert files_a == files_b
    for rel in files_a:
        assert filecmp.cmp(a / rel, b / rel, shallow=False), f"{rel} differs between reruns"


class TestConfigValidation:
    def test_unknown_key_rejected(self):
        with pytest.raises(exp.ConfigError, match="unknown key"):
            exp.SurfaceConfig.from_mapping({"objective": "h1", "typo_key": 1})

    def test_unknown_key_via_cli(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text(yaml.safe_dump({"objektive": "h1"}))
        assert run_cli("surface", "--config", str(cfg), "--out", str(tmp_path / "o")) == 2

    def test_non_mapping_config(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("- 1\n- 2\n")
        assert run_cli("surface", "--config", str(cfg), "--out", str(tmp_path / "o")) == 2

    def test_surface_requires_2d_objective(self, tmp_path):
        cfg = exp.SurfaceConfig(objective="h3")
        with pytest.raises(exp.ConfigError, match="2-variable"):
            exp.run_surface(cfg, tmp_path)

    def test_dump_steps_validated(self, tmp_path):
        cfg = exp.SurfaceConfig(n_steps=2, dump_steps=(5,))
        with pytest.raises(exp.ConfigError, match="dump_steps"):
            exp.run_surface(cfg, tmp_path)


class TestOracleAndAnneal:
    @pytest.fixture()
    def penalty_file(self, tmp_path):
        from fmanneal.encoding import GridSpace, format_qubo_text, penalty_qubo

        path = tmp_path / "pen.qubo"
        path.write_text(format_qubo_text(penalty_qubo(GridSpace(((0.0, 1.0, 2),)), 1.0)))
        return path

    def test_oracle_penalty(self, penalty_file, capsys):
        assert run_cli("oracle", str(penalty_file)) == 0
        out = capsys.readouterr().out
        assert "bits: 10" in out
        assert "energy: 0.0" in out

    def test_oracle_offset_only(self, tmp_path, capsys):
        f = tmp_path / "o.qubo"
        f.write_text("2 3.0\n")
        assert run_cli("oracle", str(f)) == 0
        out = capsys.readouterr().out
        assert "bits: 00" in out and "energy: 3.0" in out

    def test_oracle_malformed(self, tmp_path, capsys):
        f = tmp_path / "bad.qubo"
        f.write_text("2 0.0\n0 zzz 1.0\n")
        assert run_cli("oracle", str(f)) == 2
        assert "line 2" in capsys.readouterr().err

    def test_oracle_size_guard(self, tmp_path, capsys):
        f = tmp_path / "big.qubo"
        f.write_text("30 0.0\n")
        assert run_cli("oracle", str(f)) == 2
        assert "24" in capsys.readouterr().err

    def test_anneal_writes_csv(self, penalty_file, tmp_path):
        out = tmp_path / "ann"
        assert run_cli("anneal", str(penalty_file), "--out", str(out), "--reads", "6", "--sweeps", "50") == 0
        lines = (out / "samples.csv").read_text().strip().splitlines()
        assert lines[0] == "bits,energy,count"
        total = sum(int(l.split(",")[2]) for l in lines[1:])
        assert total == 6

    def test_anneal_beta_flags_must_pair(self, penalty_file, capsys):
        assert run_cli("anneal", str(penalty_file), "--beta-start", "0.1") == 2
        assert "beta" in capsys.readouterr().err


class TestSimulateBubble:
    def test_outputs_and_schema(self, tmp_path):
        assert run_cli("simulate-bubble", "--out", str(tmp_path / "b")) == 0
        lines = (tmp_path / "b" / "trajectory.csv").read_text().strip().splitlines()
        assert lines[0] == "t_us,r_um"
        assert len(lines) == 202  # header + 201 samples
        manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert manifest["command"] == "simulate-bubble"
        assert manifest["config"]["n_out"] == 201

    def test_accepts_overrides(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(yaml.safe_dump({"amplitude": 0.0, "n_out": 11, "t_end": 1.0e-6}))
        assert run_cli("simulate-bubble", "--config", str(cfg), "--out", str(tmp_path / "b")) == 0
        lines = (tmp_path / "b" / "trajectory.csv").read_text().strip().splitlines()
        assert len(lines) == 12
        radii = [float(l.split(",")[1]) for l in lines[1:]]
        assert all(abs(r / 3.2 - 1) < 1e-6 for r in radii)  # zero drive: equilibrium


def tiny_surface_cfg(tmp_path, **extra):
    doc = {
        "n_init": 6,
        "n_steps": 2,
        "reads_per_step": 4,
        "rank": 3,
        "n_updates": 30,
        "dump_steps": [1, 2],
        "seed": 3,
    }
    doc.update(extra)
    path = tmp_path / "surface.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


class TestSurfaceCommand:
    def test_outputs(self, tmp_path):
        cfg = tiny_surface_cfg(tmp_path)
        out = tmp_path / "s"
        assert run_cli("surface", "--config", str(cfg), "--out", str(out)) == 0
        names = {p.name for p in out.iterdir()}
        assert {"true_surface.csv", "fm_surface_step01.csv", "fm_surface_step02.csv",
                "points_step01.csv", "points_step02.csv", "manifest.json"} <= names
        true_rows = (out / "true_surface.csv").read_text().strip().splitlines()
        assert len(true_rows) == 1 + 101 * 101
        # minimum of the true grid is at indices (50, 50) with value 0
        for row in true_rows[1:]:
            i, j, y1, y2, v = row.split(",")
            if i == "50" and j == "50":
                assert float(v) == 0.0
                break
        else:
            pytest.fail("grid point (50, 50) missing")

    def test_lambda_flag_changes_surface(self, tmp_path):
        cfg = tiny_surface_cfg(tmp_path)
        out0, out1 = tmp_path / "a", tmp_path / "b"
        assert run_cli("surface", "--config", str(cfg), "--out", str(out0), "--lambda-sr", "0.0") == 0
        assert run_cli("surface", "--config", str(cfg), "--out", str(out1), "--lambda-sr", "0.1") == 0
        a = (out0 / "fm_surface_step02.csv").read_text()
        b = (out1 / "fm_surface_step02.csv").read_text()
        assert a != b

    def test_points_schema(self, tmp_path):
        cfg = tiny_surface_cfg(tmp_path)
        out = tmp_path / "s"
        run_cli("surface", "--config", str(cfg), "--out", str(out))
        rows = (out / "points_step01.csv").read_text().strip().splitlines()
        assert rows[0] == "kind,i,j,y1,y2,value"
        kinds = [r.split(",")[0] for r in rows[1:]]
        assert kinds.count("known") == 6
        assert kinds.count("new") == 4


class TestBenchH2Command:
    def test_summary_and_pairs(self, tmp_path):
        cfg = tmp_path / "bench.yaml"
        cfg.write_text(
            yaml.safe_dump(
                {"n_samples": [5, 10], "lambdas": [0.0, 1.0], "ranks": [2],
                 "n_test": 50, "n_updates": 25, "seeds": [0]}
            )
        )
        out = tmp_path / "h2"
        assert run_cli("bench-h2", "--config", str(cfg), "--out", str(out)) == 0
        rows = (out / "summary.csv").read_text().strip().splitlines()
        assert rows[0] == "seed,rank,lambda_sr,n_samples,r2_paper"
        assert len(rows) == 1 + 4  # 2 lambdas x 2 sample counts
        pair_files = list(out.glob("pairs_*.csv"))
        assert len(pair_files) == 4
        body = pair_files[0].read_text().strip().splitlines()
        assert body[0] == "truth,prediction"
        assert len(body) == 1 + 50

    def test_standard_r2_flag_adds_column(self, tmp_path):
        cfg = tmp_path / "bench.yaml"
        cfg.write_text(
            yaml.safe_dump(
                {"n_samples": [5], "lambdas": [0.0], "ranks": [2],
                 "n_test": 30, "n_updates": 10, "seeds": [1]}
            )
        )
        out = tmp_path / "h2"
        assert run_cli("bench-h2", "--config", str(cfg), "--out", str(out), "--standard-r2") == 0
        rows = (out / "summary.csv").read_text().strip().splitlines()
        assert rows[0].endswith(",r2_standard")


class TestOptimizeCommand:
    def test_outputs_counrespond(self, tmp_path):
        cfg = tmp_path / "opt.yaml"
        cfg.write_text(
            yaml.safe_dump(
                {"objective": "h1", "seeds": [0, 1], "n_init": 5, "n_steps": 2,
                 "reads_per_step": 3, "rank": 3, "n_updates": 25,
                 "sampler": "boltzmann", "beta": 20.0, "lambda_sr": 0.1,
                 "success_tolerance": 0.5}
            )
        )
        out = tmp_path / "opt"
        assert run_cli("optimize", "--config", str(cfg), "--out", str(out)) == 0
        for variant in ("fsr", "naive"):
            rows = (out / variant / "evaluations.csv").read_text().strip().splitlines()
            assert rows[0] == "trial_seed,step,value"
            assert len(rows) == 1 + 2 * (5 + 2 * 3)  # 2 trials x (init + 2 steps x 3 reads)
            counts = (out / variant / "success_counts.csv").read_text().strip().splitlines()
            assert counts[0] == "step,count"
            assert len(counts) == 1 + 3
            vals = [int(r.split(",")[1]) for r in counts[1:]]
            assert vals == sorted(vals)
            assert (out / variant / "dataset_seed0.json").exists()

    def test_dataset_round_trip(self, tmp_path):
        from fmanneal.engine import Dataset

        cfg = tmp_path / "opt.yaml"
        cfg.write_text(
            yaml.safe_dump(
                {"objective": "h1", "seeds": [4], "n_init": 4, "n_steps": 1,
                 "reads_per_step": 2, "rank": 2, "n_updates": 10,
                 "sampler": "boltzmann", "compare_naive": False}
            )
        )
        out = tmp_path / "opt"
        assert run_cli("optimize", "--config", str(cfg), "--out", str(out)) == 0
        ds = Dataset.load(out / "fsr" / "dataset_seed4.json")
        assert len(ds) == 6
        assert ds.steps == [0, 0, 0, 0, 1, 1]


class TestDeterministicReruns:
    def test_surface_rerun_byte_identical(self, tmp_path):
        cfg = tiny_surface_cfg(tmp_path)
        a, b = tmp_path / "r1", tmp_path / "r2"
        assert run_cli("surface", "--config", str(cfg), "--out", str(a)) == 0
        assert run_cli("surface", "--config", str(cfg), "--out", str(b)) == 0
        assert_identical_trees(a, b)

    def test_optimize_rerun_byte_identical(self, tmp_path):
        cfg = tmp_path / "opt.yaml"
        cfg.write_text(
            yaml.safe_dump(
                {"objective": "h1", "seeds": [0], "n_init": 4, "n_steps": 2,
                 "reads_per_step": 3, "rank": 3, "n_updates": 20,
                 "sampler": "simulated_annealing", "sweeps": 100}
            )
        )
        a, b = tmp_path / "r1", tmp_path / "r2"
        assert run_cli("optimize", "--config", str(cfg), "--out", str(a)) == 0
        assert run_cli("optimize", "--config", str(cfg), "--out", str(b)) == 0
        assert_identical_trees(a, b)
