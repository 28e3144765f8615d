"""End-to-end runs of the command line entry point"""
import asyncio

import pandas as pd
import pytest
import yaml

from main import main
from src.core.config_manager import AppConfig
from src.core.harvest import load_harvest_csv, synthesize_user
from src.core.predictor import load_model

SMALL = """\
# one short user
simulation.training_days = 1
predictor.n_trees = 3
predictor.max_depth = 3
debug.log_file = log/test.log
"""


def run(*argv) -> int:
    return asyncio.run(main(list(argv)))


@pytest.fixture
def small_config(quiet_cwd):
    path = quiet_cwd / "small.conf"
    path.write_text(SMALL)
    return str(path)


class TestGenData:

    def test_harvest_file_reads_back(self, quiet_cwd):
        assert run("gen-data", "--seed", "7", "--users", "1", "--days", "3", "--out", "data") == 0
        harvest = load_harvest_csv(quiet_cwd / "data" / "user_00" / "harvest.csv")
        config = AppConfig()
        expected = synthesize_user(7, 0, 3, config.harvest, config.climate, config.template_for(0))
        assert len(harvest) == 72
        assert harvest.values == expected.harvest.values
        assert (quiet_cwd / "data" / "user_00" / "irradiance.csv").exists()
        assert (quiet_cwd / "data" / "user_00" / "activity.csv").exists()

    def test_snapshot_records_the_run(self, quiet_cwd):
        run("gen-data", "--seed", "7", "--users", "2", "--days", "2", "--out", "data")
        snapshot = yaml.safe_load((quiet_cwd / "data" / "config_snapshot.yaml").read_text())
        assert snapshot["command"] == "gen-data"
        assert snapshot["seed"] == 7
        assert snapshot["config"]["simulation"]["users"] == 2
        assert snapshot["arguments"] == {"users": 2, "days": 2}


class TestUsage:

    @pytest.mark.parametrize("argv", [
        ["fly"],
        ["gen-data", "--out", "data", "--colour", "blue"],
        ["simulate", "--policy", "greedy", "--out", "runs"],
        ["sweep-amin", "--values", "high,low", "--out", "runs"],
        [],
    ])
    def test_usage_errors(self, quiet_cwd, argv):
        assert run(*argv) == 2

    def test_help(self, quiet_cwd):
        assert run("--help") == 0

    def test_configuration_error_names_the_key(self, quiet_cwd, capsys):
        path = quiet_cwd / "bad.conf"
        path.write_text("planner.a_min = 0.99\n")
        assert run("--config", str(path), "gen-data", "--out", "data") == 2
        assert "planner.a_min" in capsys.readouterr().err

    def test_unknown_policy_in_list(self, small_config):
        assert run("compare", "--config", small_config, "--policies", "adaem,greedy", "--out", "runs") == 2

    def test_missing_data_directory(self, small_config):
        assert run("simulate", "--config", small_config, "--policy", "oracle",
                   "--data", "nowhere", "--out", "runs") == 2


class TestExperiments:

    def test_infeasible_days_are_data(self, quiet_cwd):
        path = quiet_cwd / "dark.conf"
        path.write_text(SMALL + (
            "planner.critical_activities = [sleep, work, exercise, leisure, other]\n"
            "harvest.area_m2 = 1.0e-9\n"
        ))
        status = run("simulate", "--config", str(path), "--policy", "oracle",
                     "--users", "1", "--days", "2", "--out", "runs/oracle")
        assert status == 0
        daily = pd.read_csv(quiet_cwd / "runs" / "oracle" / "daily.csv")
        assert len(daily) == 2
        assert daily["infeasible"].sum() >= 1
        assert sorted(p.name for p in (quiet_cwd / "runs" / "oracle" / "plans").iterdir()) == [
            "oracle_user00_day001.csv", "oracle_user00_day002.csv",
        ]
        assert (quiet_cwd / "runs" / "oracle" / "config_snapshot.yaml").exists()

    def test_compare_is_reproducible(self, small_config, quiet_cwd):
        for out in ("runs/a", "runs/b"):
            assert run("compare", "--config", small_config, "--policies", "adaem,oracle",
                       "--ideal-predictions", "--users", "1", "--days", "2", "--out", out) == 0
        for name in ("daily.csv", "metrics_monthly.csv", "violations_hist.csv", "savings_vs_oracle.csv"):
            first = (quiet_cwd / "runs" / "a" / name).read_bytes()
            assert first == (quiet_cwd / "runs" / "b" / name).read_bytes()
        monthly = pd.read_csv(quiet_cwd / "runs" / "a" / "metrics_monthly.csv")
        assert list(monthly.columns) == ["policy", "user", "month", "metric", "min", "q1", "median", "q3", "max"]

    def test_train_then_simulate(self, quiet_cwd):
        path = quiet_cwd / "train.conf"
        path.write_text(SMALL.replace("training_days = 1", "training_days = 3"))
        assert run("--config", str(path), "gen-data", "--seed", "5", "--users", "1", "--days", "4",
                   "--out", "data") == 0
        assert run("--config", str(path), "train", "--data", "data", "--out", "models/harvest.model",
                   "--trees", "4", "--depth", "3") == 0
        model = load_model(quiet_cwd / "models" / "harvest.model")
        assert len(model.trees) == 4
        assert run("simulate", "--config", str(path), "--data", "data", "--model", "models/harvest.model",
                   "--policy", "adaem", "--out", "runs/adaem") == 0
        daily = pd.read_csv(quiet_cwd / "runs" / "adaem" / "daily.csv")
        assert daily["day"].tolist() == [3]
        snapshot = yaml.safe_load((quiet_cwd / "runs" / "adaem" / "config_snapshot.yaml").read_text())
        assert any(key.endswith("harvest.model") for key in snapshot["inputs"])

    def test_sweep(self, small_config, quiet_cwd):
        assert run("sweep-amin", "--config", small_config, "--values", "0.80,0.90", "--policies", "oracle",
                   "--users", "1", "--days", "1", "--out", "runs/sweep") == 0
        sweep = pd.read_csv(quiet_cwd / "runs" / "sweep" / "sweep_amin.csv")
        assert sweep["a_min"].tolist() == [0.80, 0.90]
