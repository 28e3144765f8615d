"""
Command Line Interface for the energy management toolkit
"""
import asyncio
import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from ..core.config_manager import AppConfig, ConfigManager
from ..core.errors import ConfigError, TraceFormatError
from ..core.harvest import UserTraces, load_user_traces, save_user_traces, synthesize_user
from ..core.metrics import MetricTables, compute_metrics
from ..core.planner import save_plan_csv
from ..core.predictor import (
    TreeEnsemble,
    build_dataset,
    evaluate_mae,
    fit_arrays,
    load_model,
    save_model,
)
from ..core.simulation import ExperimentResult, run_experiment
from ..utils.file_utils import (
    ensure_output_dir,
    format_duration,
    format_energy,
    hash_inputs,
    list_user_dirs,
    user_dir,
    write_config_snapshot,
)

logger = logging.getLogger(__name__)


class CLIHandler:
    """Handles command line operations"""

    def __init__(self, config_manager: ConfigManager, console: Optional[Console] = None):
        self.config_manager = config_manager
        self.console = console or Console()

    def _config(self, **sections) -> AppConfig:
        """Loaded configuration with command-line overrides applied per section"""
        config = self.config_manager.get_config()
        for section, values in sections.items():
            values = {k: v for k, v in values.items() if v is not None}
            if values:
                config = self.config_manager.update_config(section, **values)
        return config

    def _load_traces(self, data_dir: Optional[str], config: AppConfig, days: int) -> List[UserTraces]:
        """Traces from a gen-data directory, or synthesized when no directory is given"""
        sim = config.simulation
        if data_dir is None:
            return [
                synthesize_user(sim.seed, user, sim.training_days + days,
                                config.harvest, config.climate, config.template_for(user))
                for user in range(sim.users)
            ]
        found = list_user_dirs(data_dir)
        if not found:
            raise TraceFormatError(f"No user_NN directories under {data_dir}")
        return [load_user_traces(directory, user, config.harvest) for user, directory in found]

    async def gen_data(self, out_dir: str, seed: Optional[int] = None, users: Optional[int] = None,
                       days: Optional[int] = None) -> int:
        """
        Write synthetic irradiance, activity and harvest CSVs per user

        Args:
            out_dir: Output directory; one user_NN directory per user
            seed: Random seed (config simulation.seed when None)
            users: Number of users
            days: Days per user, training days included
        """
        config = self._config(simulation={"seed": seed, "users": users})
        sim = config.simulation
        days = days if days is not None else sim.training_days + sim.days
        out = ensure_output_dir(out_dir)

        started = time.perf_counter()
        for user in range(sim.users):
            traces = await asyncio.to_thread(
                synthesize_user, sim.seed, user, days,
                config.harvest, config.climate, config.template_for(user),
            )
            save_user_traces(traces, user_dir(out, user))
            self.console.print(
                f"✅ user {user:02d}: {days} days, "
                f"{format_energy(traces.harvest.total_j())} harvested"
            )

        write_config_snapshot(
            out, config.to_dict(), sim.seed, "gen-data",
            extra={"users": sim.users, "days": days},
        )
        self.console.print(f"💾 Traces written to {out} in {format_duration(time.perf_counter() - started)}")
        return 0

    async def train(self, data_dir: str, model_path: str, trees: Optional[int] = None,
                    depth: Optional[int] = None) -> int:
        """
        Fit the harvest predictor on every user's training days

        Prints the held-out MAE next to the persistence baseline.
        """
        config = self._config(predictor={"n_trees": trees, "max_depth": depth})
        traces = self._load_traces(data_dir, config, config.simulation.days)
        per_day = config.schedule.intervals_per_day
        stop = config.simulation.training_days * per_day
        if stop < 1:
            raise ConfigError("the predictor needs at least one training day", key="simulation.training_days")

        windows = [(user_traces, min(stop, len(user_traces.harvest))) for user_traces in traces]
        # Pooled mean target, the climatology the fitted model records
        climatology = float(np.mean(np.concatenate([u.harvest.values[:end] for u, end in windows])))
        features, targets = [], []
        for user_traces, end in windows:
            X, y = build_dataset(
                user_traces.harvest.values, user_traces.schedule, 0, end, config.feature_layout, climatology,
            )
            features.append(X)
            targets.append(y)

        started = time.perf_counter()
        model = await asyncio.to_thread(
            fit_arrays, np.vstack(features), np.concatenate(targets),
            config.ensemble_params, config.feature_layout,
        )
        path = Path(model_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_model(model, path)

        table = Table(title="Held-out one-step MAE (J)")
        table.add_column("user", justify="right")
        table.add_column("tree ensemble", justify="right")
        table.add_column("persistence", justify="right")
        for user_traces in traces:
            end = len(user_traces.harvest)
            if end <= stop:
                continue
            model_mae, persistence_mae = evaluate_mae(
                model, user_traces.harvest.values, user_traces.schedule, stop, end
            )
            table.add_row(str(user_traces.user), f"{model_mae:.3f}", f"{persistence_mae:.3f}")
        self.console.print(table)

        write_config_snapshot(
            path.parent, config.to_dict(), config.predictor.seed, "train",
            inputs=hash_inputs([data_dir], root=data_dir) if data_dir else {},
            extra={"model": str(path)},
        )
        self.console.print(f"✅ Model written to {path} in {format_duration(time.perf_counter() - started)}")
        return 0

    async def run_policies(
        self,
        command: str,
        out_dir: str,
        policies: Sequence[str],
        data_dir: Optional[str] = None,
        model_path: Optional[str] = None,
        overrides: Optional[Dict[str, Dict]] = None,
        write_plans: bool = False,
    ) -> int:
        """Shared body of simulate and compare"""
        config = self._config(**(overrides or {}))
        result = await self._experiment(config, policies, data_dir, model_path)
        out = ensure_output_dir(out_dir)
        tables = compute_metrics(result)

        if command == "simulate":
            tables.daily.to_csv(out / "daily.csv", index=False, float_format="%.10g")
        else:
            tables.write_csv(out)
        if write_plans:
            self._write_plans(result, out / "plans")

        inputs = [p for p in (data_dir, model_path) if p]
        write_config_snapshot(
            out, config.to_dict(), config.simulation.seed, command,
            inputs=hash_inputs(inputs),
            extra={"policies": list(policies), "trace_hashes": _hash_table(result)},
        )
        self._print_summary(tables)
        self.console.print(f"💾 Results written to {out}")
        return 0

    async def simulate(self, out_dir: str, policy: str, data_dir: Optional[str] = None,
                       model_path: Optional[str] = None, overrides: Optional[Dict[str, Dict]] = None) -> int:
        return await self.run_policies("simulate", out_dir, [policy], data_dir, model_path,
                                       overrides, write_plans=True)

    async def compare(self, out_dir: str, policies: Sequence[str], data_dir: Optional[str] = None,
                      model_path: Optional[str] = None, overrides: Optional[Dict[str, Dict]] = None) -> int:
        return await self.run_policies("compare", out_dir, policies, data_dir, model_path, overrides)

    async def sweep_amin(self, out_dir: str, values: Sequence[float], policies: Sequence[str],
                         data_dir: Optional[str] = None, model_path: Optional[str] = None,
                         overrides: Optional[Dict[str, Dict]] = None) -> int:
        """
        Charging energy distribution as a function of the minimum accuracy

        Writes sweep_amin.csv with one row per (a_min, policy).
        """
        base = self._config(**(overrides or {}))
        out = ensure_output_dir(out_dir)
        rows = []
        for a_min in values:
            config = replace(base, planner=replace(base.planner, a_min=float(a_min)))
            config.validate()
            result = await self._experiment(config, policies, data_dir, model_path)
            daily = compute_metrics(result).daily
            for policy, group in daily.groupby("policy", sort=True):
                charging = group["charging_j"]
                rows.append({
                    "a_min": a_min,
                    "policy": policy,
                    "min": charging.min(),
                    "q1": charging.quantile(0.25),
                    "median": charging.median(),
                    "q3": charging.quantile(0.75),
                    "max": charging.max(),
                    "mean_accuracy": group["mean_accuracy"].mean(),
                    "days": len(group),
                })
            self.console.print(f"✅ a_min={a_min:.2f} done")

        sweep = pd.DataFrame(rows)
        sweep.to_csv(out / "sweep_amin.csv", index=False, float_format="%.10g")

        table = Table(title="Median daily charging energy (J) by minimum accuracy")
        table.add_column("a_min", justify="right")
        for policy in policies:
            table.add_column(policy, justify="right")
        for a_min, group in sweep.groupby("a_min", sort=True):
            medians = dict(zip(group["policy"], group["median"]))
            table.add_row(f"{a_min:.2f}", *[f"{medians.get(p, float('nan')):.1f}" for p in policies])
        self.console.print(table)

        write_config_snapshot(
            out, base.to_dict(), base.simulation.seed, "sweep-amin",
            inputs=hash_inputs([p for p in (data_dir, model_path) if p]),
            extra={"values": [float(v) for v in values], "policies": list(policies)},
        )
        return 0

    async def _experiment(self, config: AppConfig, policies: Sequence[str], data_dir: Optional[str],
                          model_path: Optional[str]) -> ExperimentResult:
        sim = config.simulation
        traces = self._load_traces(data_dir, config, sim.days)
        model: Optional[TreeEnsemble] = load_model(model_path) if model_path else None
        if model is not None and model.n_features != config.feature_layout.dimension:
            raise ConfigError(
                f"model has {model.n_features} features, configuration implies {config.feature_layout.dimension}",
                key="predictor",
            )

        started = time.perf_counter()
        with self.console.status(f"Simulating {', '.join(policies)} for {len(traces)} users..."):
            result = await asyncio.to_thread(
                lambda: run_experiment(config, policies=list(policies), user_traces=traces, model=model, jobs=sim.jobs)
            )
        self.console.print(
            f"⏱️  {len(result.days)} simulated days in {format_duration(time.perf_counter() - started)}"
        )
        return result

    def _write_plans(self, result: ExperimentResult, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        for (policy, user, day), plan in sorted(result.plans.items()):
            save_plan_csv(plan, directory / f"{policy}_user{user:02d}_day{day:03d}.csv")

    def _print_summary(self, tables: MetricTables) -> None:
        daily = tables.daily
        table = Table(title="Per-day medians")
        for column in ("policy", "charging (J)", "savings (J)", "accuracy", "min gap",
                       "days >= 2 violations", "infeasible days"):
            table.add_column(column, justify="left" if column == "policy" else "right")
        for policy, group in daily.groupby("policy", sort=True):
            table.add_row(
                policy,
                f"{group['charging_j'].median():.1f}",
                f"{group['savings_j'].median():.2f}",
                f"{group['mean_accuracy'].median():.3f}",
                f"{group['min_gap'].median():.0f}",
                str(int((group['violations'] >= 2).sum())),
                str(int(group['infeasible'].sum())),
            )
        self.console.print(table)


def _hash_table(result: ExperimentResult) -> Dict[str, str]:
    return {f"{policy}/user_{user:02d}": digest for (policy, user), digest in sorted(result.trace_hashes.items())}


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}")


def parse_name_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]
