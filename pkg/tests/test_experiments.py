import csv
import json

import numpy as np
import pytest

from robustpricing import ConfigError, ExperimentConfig, run_experiment
from robustpricing.cli import main

TINY = {
    "dataset": {"source": "synthetic", "id": 1, "train_size": 120, "test_size": 12},
    "train": {"rounds": 8, "validation_fraction": 0.0},
    "bootstrap": {"n_bootstrap": 3},
    "alphas": [0.0, 0.5],
    "kappas": [1.0],
    "solvers": ["exact", "heuristic"],
    "replications": 50,
    "seeds": [1, 2],
}


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_tiny(tmp_path, name, **overrides):
    doc = {**TINY, **overrides, "output_dir": str(tmp_path / name)}
    config = ExperimentConfig.from_dict(doc)
    summary = run_experiment(config)
    return doc, summary


class TestRunExperiment:
    def test_bundle_contents(self, tmp_path):
        doc, summary = run_tiny(tmp_path, "run")
        out = tmp_path / "run"
        assert (out / "results.csv").exists()
        assert (out / "timings.csv").exists()
        assert (out / "aggregate.json").exists()
        assert (out / "plotdata" / "revenue_vs_alpha_kappa1.0.csv").exists()
        assert (out / "models" / "model_seed1.json").exists()
        assert (out / "uncertainty" / "uncertainty_seed1_kappa1.0.csv").exists()
        rows = read_rows(out / "results.csv")
        # 2 seeds x 2 alphas x 1 kappa x 2 solvers
        assert len(rows) == 8
        assert summary["n_rows"] == 8
        timing = read_rows(out / "timings.csv")
        assert {r["run_id"] for r in timing} == {r["run_id"] for r in rows}

    def test_zero_alpha_cells_match_nominal(self, tmp_path):
        _, _ = run_tiny(tmp_path, "zero", alphas=[0.0])
        rows = read_rows(tmp_path / "zero" / "results.csv")
        for row in rows:
            assert float(row["worst_case"]) == pytest.approx(float(row["nominal"]), abs=1e-9)

    def test_reruns_are_byte_identical(self, tmp_path):
        run_tiny(tmp_path, "a")
        run_tiny(tmp_path, "b")
        for name in ("results.csv", "uncertainty/uncertainty_seed1_kappa1.0.csv",
                     "models/model_seed1.json", "aggregate.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_policies_never_beat_the_oracle_baseline(self, tmp_path):
        run_tiny(tmp_path, "dom")
        for row in read_rows(tmp_path / "dom" / "results.csv"):
            assert float(row["expected_revenue"]) <= float(row["optimal_revenue"]) + 1e-9

    def test_aggregate_shape(self, tmp_path):
        _, summary = run_tiny(tmp_path, "agg")
        agg = json.loads((tmp_path / "agg" / "aggregate.json").read_text())
        assert len(agg["cells"]) == 4  # 2 alphas x 1 kappa x 2 solvers
        for cell in agg["cells"]:
            assert cell["n_seeds"] == 2
            assert cell["worst_case_mean"] is not None
        assert agg["baselines"]["optimal_mean"] is not None
        assert summary["aggregate"]["cells"] == agg["cells"]

    def test_price_change_constraint_is_respected(self, tmp_path):
        run_tiny(tmp_path, "pc", price_change={"beta": 0.1}, alphas=[0.5])
        for row in read_rows(tmp_path / "pc" / "results.csv"):
            assert row["feasible"] == "1"

    def test_invalid_configs_fail_before_work(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, "alphas": [1.5]})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, "solvers": ["simplex"]})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, "seeds": []})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({k: v for k, v in TINY.items() if k != "dataset"})


class TestCli:
    def write_config(self, tmp_path, name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    def test_stagewise_pipeline(self, tmp_path):
        out = tmp_path / "stages"
        gen_train = self.write_config(
            tmp_path, "gen_train.json", {"dataset_id": 1, "n_rows": 150, "seed": 3, "role": "train"}
        )
        assert main(["generate", "--config", gen_train, "--out", str(out / "train")]) == 0
        gen_test = self.write_config(
            tmp_path, "gen_test.json", {"dataset_id": 1, "n_rows": 10, "seed": 3, "role": "test"}
        )
        assert main(["generate", "--config", gen_test, "--out", str(out / "test")]) == 0

        train_cfg = self.write_config(
            tmp_path,
            "train.json",
            {"data": str(out / "train" / "dataset.csv"), "train": {"rounds": 6}, "seed": 3},
        )
        assert main(["train", "--config", train_cfg, "--out", str(out)]) == 0

        unc_cfg = self.write_config(
            tmp_path,
            "unc.json",
            {
                "train_data": str(out / "train" / "dataset.csv"),
                "consumers": str(out / "test" / "dataset.csv"),
                "model": str(out / "model.json"),
                "bootstrap": {"n_bootstrap": 3},
                "kappa": 1.0,
                "seed": 3,
            },
        )
        assert main(["uncertainty", "--config", unc_cfg, "--out", str(out)]) == 0

        solve_cfg = self.write_config(
            tmp_path,
            "solve.json",
            {
                "consumers": str(out / "test" / "dataset.csv"),
                "uncertainty": str(out / "uncertainty.csv"),
                "grid": {"path": str(out / "grid.json")},
                "alpha": 0.5,
                "solver": "exact",
            },
        )
        assert main(["solve", "--config", solve_cfg, "--out", str(out)]) == 0
        solution = json.loads((out / "solution.json").read_text())
        assert len(solution["choice"]) == 10
        assert solution["worst_case"] <= solution["nominal"] + 1e-9

        eval_cfg = self.write_config(
            tmp_path,
            "eval.json",
            {
                "solution": str(out / "solution.json"),
                "consumers": str(out / "test" / "dataset.csv"),
                "generator": str(out / "test" / "generator.json"),
                "grid": {"path": str(out / "grid.json")},
                "replications": 100,
                "seed": 3,
            },
        )
        assert main(["evaluate", "--config", eval_cfg, "--out", str(out)]) == 0
        evaluation = json.loads((out / "evaluation.json").read_text())
        assert evaluation["expected_revenue"] <= evaluation["optimal_revenue"] + 1e-9

    def test_experiment_subcommand(self, tmp_path):
        cfg = self.write_config(tmp_path, "exp.json", TINY)
        assert main(["experiment", "--config", cfg, "--out", str(tmp_path / "expout")]) == 0
        assert (tmp_path / "expout" / "results.csv").exists()

    def test_seed_override_changes_outputs(self, tmp_path):
        doc = {"dataset_id": 1, "n_rows": 20, "seed": 1, "role": "train"}
        cfg = self.write_config(tmp_path, "g.json", doc)
        main(["generate", "--config", cfg, "--out", str(tmp_path / "s1")])
        main(["generate", "--config", cfg, "--out", str(tmp_path / "s1b")])
        main(["generate", "--config", cfg, "--out", str(tmp_path / "s2"), "--seed", "2"])
        a = (tmp_path / "s1" / "dataset.csv").read_bytes()
        b = (tmp_path / "s1b" / "dataset.csv").read_bytes()
        c = (tmp_path / "s2" / "dataset.csv").read_bytes()
        assert a == b
        assert a != c

    def test_bad_config_reports_error(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, "bad.json", {"dataset_id": 99, "n_rows": 5})
        assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_solution_matches_library_result(self, tmp_path):
        """The staged solve and an in-process solve agree bit for bit."""
        import robustpricing as rp
        from robustpricing.bootstrap import read_uncertainty_csv
        from robustpricing.synthetic import read_dataset_csv

        out = tmp_path / "x"
        main(["generate", "--config", self.write_config(
            tmp_path, "gt.json", {"dataset_id": 5, "n_rows": 100, "seed": 8, "role": "train"}
        ), "--out", str(out / "train")])
        main(["generate", "--config", self.write_config(
            tmp_path, "ge.json", {"dataset_id": 5, "n_rows": 8, "seed": 8, "role": "test"}
        ), "--out", str(out / "test")])
        main(["train", "--config", self.write_config(
            tmp_path, "tr.json",
            {"data": str(out / "train" / "dataset.csv"), "train": {"rounds": 5}, "seed": 8},
        ), "--out", str(out)])
        main(["uncertainty", "--config", self.write_config(
            tmp_path, "un.json",
            {
                "train_data": str(out / "train" / "dataset.csv"),
                "consumers": str(out / "test" / "dataset.csv"),
                "model": str(out / "model.json"),
                "bootstrap": {"n_bootstrap": 3},
                "seed": 8,
            },
        ), "--out", str(out)])
        main(["solve", "--config", self.write_config(
            tmp_path, "so.json",
            {
                "consumers": str(out / "test" / "dataset.csv"),
                "uncertainty": str(out / "uncertainty.csv"),
                "grid": {"path": str(out / "grid.json")},
                "alpha": 1.0,
                "solver": "heuristic",
            },
        ), "--out", str(out)])
        solution = json.loads((out / "solution.json").read_text())

        estimate, qhat = read_uncertainty_csv(out / "uncertainty.csv")
        consumers = read_dataset_csv(out / "test" / "dataset.csv")
        grid_prices = json.loads((out / "grid.json").read_text())["prices"]
        grid = rp.PriceGrid(np.tile(grid_prices, (len(consumers), 1)))
        inst = rp.PricingInstance(
            grid, rp.PredictionMatrix(qhat), estimate.delta,
            rp.RobustBudget.from_alpha(1.0, len(consumers)),
        )
        report = rp.heuristic_solve(inst)
        assert solution["choice"] == [int(j) for j in report.assignment.choice]
        assert solution["worst_case"] == pytest.approx(report.worst_case_value, abs=1e-12)
