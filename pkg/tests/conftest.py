"""Shared fixtures for the test suite"""
import os
from datetime import datetime
from typing import Optional, Sequence

import pytest

from src.core.config_manager import AppConfig
from src.core.energy import ActivityLabel, EnergyAccuracyProfile, EnergyConfig
from src.core.harvest import ActivitySchedule


def make_schedule(
    labels: Sequence[ActivityLabel],
    outdoor: Optional[Sequence[bool]] = None,
    weekend: bool = False,
    per_day: int = 24,
) -> ActivitySchedule:
    """Schedule over the given labels; every day gets the same day type"""
    days = -(-len(labels) // per_day)
    return ActivitySchedule(
        labels=tuple(labels),
        outdoor=tuple(outdoor) if outdoor is not None else tuple([False] * len(labels)),
        weekend=tuple([weekend] * days),
        interval_seconds=86400.0 / per_day,
        start=datetime(2020, 1, 1),
        intervals_per_day=per_day,
    )


def small_app_config(**simulation) -> AppConfig:
    """Reference configuration scaled down for quick simulations"""
    data = {
        "predictor": {"n_trees": 5, "max_depth": 4},
        "planner": {"history_days": 7},
        "simulation": {"users": 2, "days": 5, "training_days": 7, "seed": 3, **simulation},
        "debug": {"log_file": ""},
    }
    return AppConfig.from_dict(data)


@pytest.fixture
def energy_config() -> EnergyConfig:
    return EnergyConfig()


@pytest.fixture
def profile() -> EnergyAccuracyProfile:
    return EnergyAccuracyProfile()


@pytest.fixture
def quiet_cwd(tmp_path, monkeypatch):
    """Run in an empty directory so log files and .env lookups stay out of the repo"""
    monkeypatch.chdir(tmp_path)
    for name in list(os.environ):
        if name.startswith("ADAEM_"):
            monkeypatch.delenv(name)
    return tmp_path
