"""
Experiment Metrics
Turns per-day simulation records into the monthly distributions, histograms
and plot-ready tables written by the CLI
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from .simulation import ExperimentResult

logger = logging.getLogger(__name__)

DAILY_COLUMNS = [
    "policy", "user", "day", "charging_j", "savings_j", "mean_accuracy", "min_gap", "violations",
    "energy_violations", "accuracy_violations", "critical_violations", "infeasible",
    "charging_intervals", "harvest_j", "overflow_j", "month", "date",
]
MONTHLY_METRICS = ["charging_j", "savings_j", "mean_accuracy", "min_gap"]
ACCURACY_BINS = np.round(np.linspace(0.0, 1.0, 41), 3)


@dataclass
class MetricTables:
    daily: pd.DataFrame
    monthly: pd.DataFrame
    violations_hist: pd.DataFrame
    accuracy_hist: pd.DataFrame
    long: pd.DataFrame
    savings_vs_oracle: Optional[pd.DataFrame] = None

    def write_csv(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """Write every table under out_dir; returns the written paths by table name"""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tables = {
            "daily": self.daily,
            "metrics_monthly": self.monthly,
            "violations_hist": self.violations_hist,
            "accuracy_hist": self.accuracy_hist,
            "metrics_long": self.long,
        }
        if self.savings_vs_oracle is not None:
            tables["savings_vs_oracle"] = self.savings_vs_oracle

        written = {}
        for name, frame in tables.items():
            path = out / f"{name}.csv"
            frame.to_csv(path, index=False, float_format="%.10g")
            written[name] = path
        logger.info(f"Wrote {len(written)} metric tables to {out}")
        return written


def daily_frame(result: ExperimentResult) -> pd.DataFrame:
    """One row per (policy, user, day)"""
    rows = [
        {
            "policy": d.policy,
            "user": d.user,
            "day": d.day,
            "charging_j": d.charging_energy_j,
            "savings_j": d.savings_j,
            "mean_accuracy": d.mean_accuracy,
            "min_gap": d.min_gap,
            "violations": d.violations.total,
            "energy_violations": d.violations.energy_violations,
            "accuracy_violations": d.violations.accuracy_violations,
            "critical_violations": d.violations.critical_charging_violations,
            "infeasible": int(d.infeasible),
            "charging_intervals": d.charging_intervals,
            "harvest_j": d.harvest_j,
            "overflow_j": d.overflow_j,
            "month": d.month,
            "date": d.date.strftime("%Y-%m-%d"),
        }
        for d in result.days
    ]
    frame = pd.DataFrame(rows, columns=DAILY_COLUMNS)
    return frame.sort_values(["policy", "user", "day"], kind="mergesort").reset_index(drop=True)


def monthly_distribution(daily: pd.DataFrame) -> pd.DataFrame:
    """Min, quartiles, median and max of each daily metric per policy, user and month"""
    long = daily.melt(
        id_vars=["policy", "user", "month"], value_vars=MONTHLY_METRICS, var_name="metric"
    )
    grouped = long.groupby(["policy", "user", "month", "metric"], sort=True)["value"]
    summary = pd.DataFrame({
        "min": grouped.min(),
        "q1": grouped.quantile(0.25),
        "median": grouped.median(),
        "q3": grouped.quantile(0.75),
        "max": grouped.max(),
    })
    return summary.reset_index()


def violations_histogram(daily: pd.DataFrame) -> pd.DataFrame:
    counts = daily.groupby(["policy", "violations"], sort=True).size()
    return counts.rename("day_count").reset_index().rename(columns={"violations": "violations_per_day"})


def accuracy_histogram(daily: pd.DataFrame) -> pd.DataFrame:
    """Days per policy in 0.025-wide bins of mean daily accuracy"""
    rows = []
    for policy, group in daily.groupby("policy", sort=True):
        counts, edges = np.histogram(group["mean_accuracy"].to_numpy(), bins=ACCURACY_BINS)
        for low, high, count in zip(edges[:-1], edges[1:], counts):
            if count:
                rows.append({"policy": policy, "accuracy_low": low, "accuracy_high": high,
                             "day_count": int(count)})
    return pd.DataFrame(rows, columns=["policy", "accuracy_low", "accuracy_high", "day_count"])


def long_format(daily: pd.DataFrame) -> pd.DataFrame:
    """Plot-ready (policy, user, day, month, metric, value) rows"""
    value_vars = MONTHLY_METRICS + ["violations", "charging_intervals"]
    long = daily.melt(
        id_vars=["policy", "user", "day", "month"], value_vars=value_vars, var_name="metric"
    )
    return long.sort_values(["policy", "user", "day", "metric"], kind="mergesort").reset_index(drop=True)


def compare_to_oracle(daily: pd.DataFrame, reference: str = "oracle") -> Optional[pd.DataFrame]:
    """Monthly medians of every policy next to the oracle's, with their ratios"""
    if reference not in set(daily["policy"]):
        return None
    medians = daily.groupby(["policy", "month"], sort=True)[["charging_j", "savings_j"]].median()
    oracle = medians.xs(reference, level="policy")
    frame = medians.reset_index().merge(
        oracle.reset_index().rename(columns={"charging_j": "oracle_charging_j", "savings_j": "oracle_savings_j"}),
        on="month",
    )
    frame = frame.rename(columns={"charging_j": "median_charging_j", "savings_j": "median_savings_j"})
    with np.errstate(divide="ignore", invalid="ignore"):
        frame["charging_ratio"] = np.where(
            frame["oracle_charging_j"] > 0, frame["median_charging_j"] / frame["oracle_charging_j"], np.nan
        )
        frame["savings_ratio"] = np.where(
            frame["oracle_savings_j"] > 0, frame["median_savings_j"] / frame["oracle_savings_j"], np.nan
        )
    return frame.sort_values(["policy", "month"], kind="mergesort").reset_index(drop=True)


def compute_metrics(result: ExperimentResult) -> MetricTables:
    daily = daily_frame(result)
    return MetricTables(
        daily=daily,
        monthly=monthly_distribution(daily),
        violations_hist=violations_histogram(daily),
        accuracy_hist=accuracy_histogram(daily),
        long=long_format(daily),
        savings_vs_oracle=compare_to_oracle(daily),
    )
