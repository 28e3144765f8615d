"""
Energy Harvesting Sources
Light (PV) and motion harvest models, trace/schedule CSV ingestion and the
synthetic generators used for desk-scale experiments
"""
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .energy import ActivityLabel, MotionIntensities
from .errors import ConfigError, TraceFormatError

logger = logging.getLogger(__name__)

DEFAULT_START = datetime(2020, 1, 1)
INTERVALS_PER_DAY = 24
DAY_SECONDS = 86400.0

PathLike = Union[str, Path]


@dataclass(frozen=True)
class PvPanelConfig:
    """Linear PV model: irradiance x area x efficiency"""
    area_m2: float = 0.001
    efficiency: float = 0.10

    def __post_init__(self):
        if self.area_m2 <= 0:
            raise ConfigError(f"must be > 0, got {self.area_m2}", key="area_m2")
        if not 0.0 < self.efficiency <= 1.0:
            raise ConfigError(f"must be within (0, 1], got {self.efficiency}", key="efficiency")


@dataclass(frozen=True)
class HarvestTrace:
    """Per-interval harvested energy (J)"""
    values: Tuple[float, ...]
    interval_seconds: float = 3600.0
    start: datetime = DEFAULT_START

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, 'values', values)
        if not values:
            raise ValueError("Harvest trace needs at least one interval")
        if any(v < 0 or math.isnan(v) for v in values):
            raise ValueError("Harvested energy cannot be negative")

    def __len__(self) -> int:
        return len(self.values)

    def total_j(self) -> float:
        return float(sum(self.values))


@dataclass(frozen=True)
class ActivitySchedule:
    """Per-interval activity labels with location and per-day day-type flags"""
    labels: Tuple[ActivityLabel, ...]
    outdoor: Tuple[bool, ...]
    weekend: Tuple[bool, ...]
    interval_seconds: float = 3600.0
    start: datetime = DEFAULT_START
    intervals_per_day: int = INTERVALS_PER_DAY

    def __post_init__(self):
        object.__setattr__(self, 'labels', tuple(ActivityLabel.parse(label) for label in self.labels))
        object.__setattr__(self, 'outdoor', tuple(bool(o) for o in self.outdoor))
        object.__setattr__(self, 'weekend', tuple(bool(w) for w in self.weekend))
        if len(self.outdoor) != len(self.labels):
            raise ValueError("Location flags must align with activity labels")
        expected_days = math.ceil(len(self.labels) / self.intervals_per_day)
        if len(self.weekend) != expected_days:
            raise ValueError(f"Expected {expected_days} day-type flags, got {len(self.weekend)}")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def days(self) -> int:
        return len(self.weekend)

    def is_weekend(self, t: int) -> bool:
        return self.weekend[t // self.intervals_per_day]

    def slice_days(self, first_day: int, last_day: int) -> 'ActivitySchedule':
        """Whole days [first_day, last_day)"""
        per_day = self.intervals_per_day
        a, b = first_day * per_day, last_day * per_day
        offset = pd.Timedelta(seconds=self.interval_seconds * a)
        return ActivitySchedule(
            labels=self.labels[a:b],
            outdoor=self.outdoor[a:b],
            weekend=self.weekend[first_day:last_day],
            interval_seconds=self.interval_seconds,
            start=self.start + offset,
            intervals_per_day=per_day,
        )


@dataclass(frozen=True)
class ScheduleTemplate:
    """Daily routine used by the synthetic activity generator (hours of day)"""
    sleep_length: int = 8
    work_start: int = 9
    work_length: int = 8
    exercise_start: int = 17
    exercise_length: int = 2
    jitter: int = 1
    leisure_probability: float = 0.5
    outdoor_exercise_probability: float = 0.6
    outdoor_leisure_probability: float = 0.2
    weekend_days: Tuple[int, ...] = (5, 6)
    intervals_per_day: int = INTERVALS_PER_DAY

    def validate(self) -> None:
        per_day = self.intervals_per_day
        if self.exercise_length < 1:
            raise ConfigError(f"must be >= 1, got {self.exercise_length}", key="exercise_length")
        if self.jitter < 0:
            raise ConfigError(f"must be >= 0, got {self.jitter}", key="jitter")
        if self.sleep_length - self.jitter < 0:
            raise ConfigError("sleep block shorter than its jitter", key="sleep_length")
        longest = self.sleep_length + self.work_length + self.exercise_length + 2 * self.jitter
        if longest > per_day:
            raise ConfigError(
                f"sleep, work and exercise blocks need up to {longest} intervals, day has {per_day}",
                key="exercise_length",
            )
        if self.exercise_start - self.jitter < 0 or \
                self.exercise_start + self.jitter + self.exercise_length > per_day:
            raise ConfigError(
                f"exercise block starting at {self.exercise_start} (+/-{self.jitter}) "
                f"with length {self.exercise_length} leaves the day",
                key="exercise_start",
            )
        for key in ("leisure_probability", "outdoor_exercise_probability", "outdoor_leisure_probability"):
            value = getattr(self, key)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"must be within [0, 1], got {value}", key=key)


@dataclass(frozen=True)
class ClimateConfig:
    """Seasonal clear-sky model with per-day cloudiness"""
    peak_irradiance_w_m2: float = 1000.0
    mean_day_length_h: float = 12.0
    day_length_amplitude_h: float = 3.0
    solar_noon_h: float = 12.0
    seasonal_mean: float = 0.75
    seasonal_amplitude: float = 0.25
    cloudiness_low: float = 0.3
    cloudiness_high: float = 1.0
    start_date: str = "2020-01-01"

    def validate(self) -> None:
        if not 0.0 <= self.cloudiness_low <= self.cloudiness_high <= 1.0:
            raise ConfigError(
                f"cloudiness range [{self.cloudiness_low}, {self.cloudiness_high}] must lie in [0, 1]",
                key="cloudiness_low",
            )
        if self.seasonal_amplitude > self.seasonal_mean:
            raise ConfigError("seasonal amplitude exceeds its mean", key="seasonal_amplitude")
        shortest = self.mean_day_length_h - self.day_length_amplitude_h
        longest = self.mean_day_length_h + self.day_length_amplitude_h
        if not (0 < shortest and longest < 24):
            raise ConfigError("day length leaves [0, 24] hours", key="day_length_amplitude_h")


@dataclass(frozen=True)
class HarvestConfig:
    """Harvester parameters of the wearable"""
    area_m2: float = 0.001
    efficiency: float = 0.10
    indoor_fraction: float = 0.01
    motion_baseline_w: float = 13e-6
    harvesters: int = 1
    work_intensity: float = 0.3
    leisure_intensity: float = 0.2

    @property
    def panel(self) -> PvPanelConfig:
        return PvPanelConfig(area_m2=self.area_m2, efficiency=self.efficiency)

    @property
    def intensities(self) -> MotionIntensities:
        return MotionIntensities(work=self.work_intensity, leisure=self.leisure_intensity)

    def validate(self) -> None:
        PvPanelConfig(area_m2=self.area_m2, efficiency=self.efficiency)
        MotionIntensities(work=self.work_intensity, leisure=self.leisure_intensity)
        if not 0.0 <= self.indoor_fraction <= 1.0:
            raise ConfigError(f"must be within [0, 1], got {self.indoor_fraction}", key="indoor_fraction")
        if self.motion_baseline_w < 0:
            raise ConfigError(f"must be >= 0, got {self.motion_baseline_w}", key="motion_baseline_w")
        if self.harvesters < 0:
            raise ConfigError(f"must be >= 0, got {self.harvesters}", key="harvesters")


def pv_energy(irradiance_w_m2: float, panel: PvPanelConfig, interval_seconds: float) -> float:
    """Energy (J) collected by the panel over one interval"""
    if irradiance_w_m2 < 0:
        raise ValueError(f"Irradiance cannot be negative: {irradiance_w_m2}")
    return irradiance_w_m2 * panel.area_m2 * panel.efficiency * interval_seconds


def motion_energy(
    label: ActivityLabel,
    interval_seconds: float,
    baseline_w: float = 13e-6,
    intensities: Optional[MotionIntensities] = None,
    harvesters: int = 1,
) -> float:
    """Energy (J) from the motion harvesters over one interval"""
    if baseline_w < 0:
        raise ValueError(f"Baseline power cannot be negative: {baseline_w}")
    intensities = intensities or MotionIntensities()
    return intensities.of(label) * baseline_w * interval_seconds * harvesters


def combine_harvest(pv: HarvestTrace, motion: HarvestTrace) -> HarvestTrace:
    """Element-wise sum of two aligned traces"""
    if len(pv) != len(motion):
        raise ValueError(f"Trace lengths differ: {len(pv)} vs {len(motion)}")
    if pv.interval_seconds != motion.interval_seconds:
        raise ValueError(
            f"Interval durations differ: {pv.interval_seconds} vs {motion.interval_seconds}"
        )
    return HarvestTrace(
        tuple(a + b for a, b in zip(pv.values, motion.values)),
        pv.interval_seconds,
        pv.start,
    )


def pv_trace(
    irradiance_w_m2: Sequence[float],
    outdoor: Sequence[bool],
    panel: PvPanelConfig,
    interval_seconds: float = 3600.0,
    indoor_fraction: float = 0.01,
    start: datetime = DEFAULT_START,
) -> HarvestTrace:
    """PV harvest gated by location: indoor intervals see a fraction of the irradiance"""
    if len(irradiance_w_m2) != len(outdoor):
        raise ValueError(f"Irradiance/location lengths differ: {len(irradiance_w_m2)} vs {len(outdoor)}")
    values = [
        pv_energy(ghi if is_outdoor else ghi * indoor_fraction, panel, interval_seconds)
        for ghi, is_outdoor in zip(irradiance_w_m2, outdoor)
    ]
    return HarvestTrace(tuple(values), interval_seconds, start)


def motion_trace(schedule: ActivitySchedule, harvest_config: HarvestConfig) -> HarvestTrace:
    values = [
        motion_energy(
            label,
            schedule.interval_seconds,
            harvest_config.motion_baseline_w,
            harvest_config.intensities,
            harvest_config.harvesters,
        )
        for label in schedule.labels
    ]
    return HarvestTrace(tuple(values), schedule.interval_seconds, schedule.start)


def seasonal_scale(day_of_year, climate: ClimateConfig):
    """Peak irradiance multiplier over the year, largest at the June solstice"""
    phase = 2.0 * np.pi * (np.asarray(day_of_year, dtype=float) - 172.0) / 365.0
    return climate.seasonal_mean + climate.seasonal_amplitude * np.cos(phase)


def generate_irradiance(seed: int, days: int, climate: Optional[ClimateConfig] = None) -> pd.Series:
    """
    Hourly synthetic global horizontal irradiance

    Clear-sky bell between sunrise and sunset, scaled by season and by a
    per-day cloudiness factor.
    """
    if days < 1:
        raise ValueError(f"days must be >= 1, got {days}")
    climate = climate or ClimateConfig()
    climate.validate()
    rng = np.random.default_rng(seed)

    index = pd.date_range(pd.Timestamp(climate.start_date), periods=days * INTERVALS_PER_DAY, freq="h")
    day_of_year = index.dayofyear.to_numpy()
    hour_mid = index.hour.to_numpy() + 0.5

    day_length = climate.mean_day_length_h + climate.day_length_amplitude_h * np.sin(
        2.0 * np.pi * (day_of_year - 80.0) / 365.0
    )
    sunrise = climate.solar_noon_h - day_length / 2.0
    x = (hour_mid - sunrise) / day_length
    bell = np.where((x > 0.0) & (x < 1.0), np.sin(np.pi * np.clip(x, 0.0, 1.0)), 0.0)

    cloudiness = rng.uniform(climate.cloudiness_low, climate.cloudiness_high, size=days)
    values = (
        climate.peak_irradiance_w_m2
        * bell
        * seasonal_scale(day_of_year, climate)
        * np.repeat(cloudiness, INTERVALS_PER_DAY)
    )
    return pd.Series(np.maximum(values, 0.0), index=index, name="ghi_w_m2")


def generate_activity_schedule(
    seed: int,
    days: int,
    template: Optional[ScheduleTemplate] = None,
    start: datetime = DEFAULT_START,
) -> ActivitySchedule:
    """Synthetic daily routine with jittered sleep/work/exercise blocks"""
    if days < 1:
        raise ValueError(f"days must be >= 1, got {days}")
    template = template or ScheduleTemplate()
    template.validate()
    rng = np.random.default_rng(seed)
    per_day = template.intervals_per_day
    jitter = template.jitter

    labels: List[ActivityLabel] = []
    outdoor: List[bool] = []
    weekend: List[bool] = []

    for day in range(days):
        # Draw every random quantity up front so the stream does not depend on branches
        sleep_shift, work_shift, exercise_shift = rng.integers(-jitter, jitter + 1, size=3)
        exercise_outdoor_draw, leisure_outdoor_draw = rng.random(2)
        remainder_draws = rng.random(per_day)

        date = pd.Timestamp(start) + pd.Timedelta(days=day)
        is_weekend = date.weekday() in template.weekend_days
        weekend.append(is_weekend)

        day_labels = [
            ActivityLabel.LEISURE if draw < template.leisure_probability else ActivityLabel.OTHER
            for draw in remainder_draws
        ]
        sleep_end = template.sleep_length + int(sleep_shift)
        for hour in range(min(sleep_end, per_day)):
            day_labels[hour] = ActivityLabel.SLEEP
        if not is_weekend:
            work_from = template.work_start + int(work_shift)
            for hour in range(max(work_from, 0), min(work_from + template.work_length, per_day)):
                day_labels[hour] = ActivityLabel.WORK
        exercise_from = template.exercise_start + int(exercise_shift)
        for hour in range(exercise_from, exercise_from + template.exercise_length):
            day_labels[hour] = ActivityLabel.EXERCISE

        leisure_outdoor_probability = template.outdoor_leisure_probability * (2.0 if is_weekend else 1.0)
        exercise_outdoor = exercise_outdoor_draw < template.outdoor_exercise_probability
        leisure_outdoor = leisure_outdoor_draw < min(1.0, leisure_outdoor_probability)
        for label in day_labels:
            labels.append(label)
            outdoor.append(
                (label is ActivityLabel.EXERCISE and exercise_outdoor)
                or (label is ActivityLabel.LEISURE and leisure_outdoor)
            )

    return ActivitySchedule(
        labels=tuple(labels),
        outdoor=tuple(outdoor),
        weekend=tuple(weekend),
        interval_seconds=DAY_SECONDS / per_day,
        start=start,
        intervals_per_day=per_day,
    )


@dataclass(frozen=True, eq=False)
class UserTraces:
    """Everything the simulator needs about one user"""
    user: int
    irradiance: pd.Series
    schedule: ActivitySchedule
    pv: HarvestTrace
    motion: HarvestTrace
    harvest: Optional[HarvestTrace] = None

    def __post_init__(self):
        if self.harvest is None:
            object.__setattr__(self, 'harvest', combine_harvest(self.pv, self.motion))
        if len(self.harvest) != len(self.schedule):
            raise ValueError(
                f"User {self.user}: {len(self.harvest)} harvest intervals, {len(self.schedule)} activities"
            )

    @property
    def days(self) -> int:
        return self.schedule.days


def synthesize_user(
    seed: int,
    user: int,
    days: int,
    harvest_config: Optional[HarvestConfig] = None,
    climate: Optional[ClimateConfig] = None,
    template: Optional[ScheduleTemplate] = None,
) -> UserTraces:
    """
    Synthetic traces for one user

    All users share the weather of the seed; routines differ per user.
    """
    harvest_config = harvest_config or HarvestConfig()
    harvest_config.validate()
    climate = climate or ClimateConfig()
    template = template or ScheduleTemplate()
    start = pd.Timestamp(climate.start_date).to_pydatetime()

    weather_seed = int(np.random.SeedSequence([seed]).generate_state(1)[0])
    routine_seed = int(np.random.SeedSequence([seed, user + 1]).generate_state(1)[0])

    irradiance = generate_irradiance(weather_seed, days, climate)
    schedule = generate_activity_schedule(routine_seed, days, template, start=start)
    pv = pv_trace(
        irradiance.to_numpy(),
        schedule.outdoor,
        harvest_config.panel,
        schedule.interval_seconds,
        harvest_config.indoor_fraction,
        start,
    )
    logger.debug(f"Synthesized user {user}: {days} days, {pv.total_j():.1f} J of light harvest")
    return UserTraces(
        user=user,
        irradiance=irradiance,
        schedule=schedule,
        pv=pv,
        motion=motion_trace(schedule, harvest_config),
    )


def load_irradiance_csv(path: PathLike, interval_seconds: float = 3600.0) -> pd.Series:
    """
    Read a `timestamp,ghi_w_m2` file and average samples into intervals

    Raises:
        TraceFormatError: empty file, malformed row (with line number) or
        timestamps that do not increase
    """
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise TraceFormatError(f"Irradiance file {path} is empty")
    except pd.errors.ParserError as e:
        raise TraceFormatError(f"Cannot parse irradiance file {path}: {e}")

    if frame.shape[1] < 2 or frame.empty:
        raise TraceFormatError(f"Irradiance file {path} has no samples")

    stamps = pd.to_datetime(frame.iloc[:, 0], errors="coerce")
    values = pd.to_numeric(frame.iloc[:, 1], errors="coerce")
    bad = (stamps.isna() | values.isna()).to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise TraceFormatError(f"Malformed irradiance row: {frame.iloc[row].tolist()}", line=row + 2)
    negative = (values < 0).to_numpy()
    if negative.any():
        row = int(np.argmax(negative))
        raise TraceFormatError("Negative irradiance", line=row + 2)

    stamp_values = stamps.to_numpy()
    for row in range(1, len(stamp_values)):
        if stamp_values[row] <= stamp_values[row - 1]:
            raise TraceFormatError("Timestamps are not strictly increasing", line=row + 2)

    series = pd.Series(values.to_numpy(dtype=float), index=pd.DatetimeIndex(stamps), name="ghi_w_m2")
    resampled = series.resample(pd.Timedelta(seconds=interval_seconds)).mean()
    gaps = int(resampled.isna().sum())
    if gaps:
        logger.warning(f"{gaps} intervals of {path} have no samples; filled with 0 W/m2")
    return resampled.fillna(0.0)


def save_irradiance_csv(series: pd.Series, path: PathLike) -> None:
    frame = pd.DataFrame({
        "timestamp": series.index.strftime("%Y-%m-%dT%H:%M:%S"),
        "ghi_w_m2": series.to_numpy(),
    })
    frame.to_csv(path, index=False)


def save_activity_csv(schedule: ActivitySchedule, path: PathLike) -> None:
    stamps = pd.date_range(
        pd.Timestamp(schedule.start), periods=len(schedule), freq=pd.Timedelta(seconds=schedule.interval_seconds)
    )
    frame = pd.DataFrame({
        "timestamp": stamps.strftime("%Y-%m-%dT%H:%M:%S"),
        "activity": [label.value for label in schedule.labels],
        "location": ["outdoor" if o else "indoor" for o in schedule.outdoor],
        "daytype": ["weekend" if schedule.is_weekend(t) else "weekday" for t in range(len(schedule))],
    })
    frame.to_csv(path, index=False)


def load_activity_csv(path: PathLike, intervals_per_day: int = INTERVALS_PER_DAY) -> ActivitySchedule:
    """Read a `timestamp,activity,location,daytype` file"""
    try:
        frame = pd.read_csv(path, dtype=str)
    except pd.errors.EmptyDataError:
        raise TraceFormatError(f"Activity file {path} is empty")

    required = ["timestamp", "activity", "location", "daytype"]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise TraceFormatError(f"Activity file {path} lacks columns {missing}", line=1)
    if frame.empty:
        raise TraceFormatError(f"Activity file {path} has no rows")

    labels: List[ActivityLabel] = []
    outdoor: List[bool] = []
    weekend_by_interval: List[bool] = []
    for row, record in enumerate(frame.itertuples(index=False), start=2):
        try:
            labels.append(ActivityLabel.parse(record.activity))
        except ValueError as e:
            raise TraceFormatError(str(e), line=row)
        location = str(record.location).strip().lower()
        daytype = str(record.daytype).strip().lower()
        if location not in ("indoor", "outdoor"):
            raise TraceFormatError(f"Unknown location {record.location!r}", line=row)
        if daytype not in ("weekday", "weekend"):
            raise TraceFormatError(f"Unknown day type {record.daytype!r}", line=row)
        outdoor.append(location == "outdoor")
        weekend_by_interval.append(daytype == "weekend")

    stamps = pd.to_datetime(frame["timestamp"], errors="coerce")
    if stamps.isna().any():
        raise TraceFormatError("Malformed timestamp", line=int(np.argmax(stamps.isna().to_numpy())) + 2)
    interval_seconds = (
        float((stamps.iloc[1] - stamps.iloc[0]).total_seconds()) if len(stamps) > 1
        else DAY_SECONDS / intervals_per_day
    )
    return ActivitySchedule(
        labels=tuple(labels),
        outdoor=tuple(outdoor),
        weekend=tuple(weekend_by_interval[::intervals_per_day]),
        interval_seconds=interval_seconds,
        start=stamps.iloc[0].to_pydatetime(),
        intervals_per_day=intervals_per_day,
    )


def save_harvest_csv(trace: HarvestTrace, path: PathLike) -> None:
    frame = pd.DataFrame({
        "interval_index": np.arange(len(trace)),
        "harvest_j": np.asarray(trace.values, dtype=float),
    })
    frame.to_csv(path, index=False)


def load_harvest_csv(
    path: PathLike, interval_seconds: float = 3600.0, start: datetime = DEFAULT_START
) -> HarvestTrace:
    """Read an `interval_index,harvest_j` file"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise TraceFormatError(f"Harvest file {path} is empty")
    if list(frame.columns[:2]) != ["interval_index", "harvest_j"]:
        raise TraceFormatError(f"Harvest file {path} must start with interval_index,harvest_j", line=1)
    if frame.empty:
        raise TraceFormatError(f"Harvest file {path} has no rows")

    expected = np.arange(len(frame))
    indices = pd.to_numeric(frame["interval_index"], errors="coerce").to_numpy()
    mismatch = indices != expected
    if mismatch.any():
        raise TraceFormatError("interval_index must count up from 0", line=int(np.argmax(mismatch)) + 2)
    values = pd.to_numeric(frame["harvest_j"], errors="coerce").to_numpy(dtype=float)
    invalid = np.isnan(values) | (values < 0)
    if invalid.any():
        raise TraceFormatError("harvest_j must be a non-negative number", line=int(np.argmax(invalid)) + 2)
    return HarvestTrace(tuple(values.tolist()), interval_seconds, start)


IRRADIANCE_FILE = "irradiance.csv"
ACTIVITY_FILE = "activity.csv"
HARVEST_FILE = "harvest.csv"


def save_user_traces(traces: UserTraces, directory: PathLike) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_irradiance_csv(traces.irradiance, directory / IRRADIANCE_FILE)
    save_activity_csv(traces.schedule, directory / ACTIVITY_FILE)
    save_harvest_csv(traces.harvest, directory / HARVEST_FILE)


def load_user_traces(
    directory: PathLike, user: int, harvest_config: Optional[HarvestConfig] = None
) -> UserTraces:
    """
    Read one user's irradiance and activity files

    A harvest file next to them is used as-is; otherwise harvest is derived
    from irradiance, location and activity.
    """
    directory = Path(directory)
    harvest_config = harvest_config or HarvestConfig()
    for name in (IRRADIANCE_FILE, ACTIVITY_FILE):
        if not (directory / name).exists():
            raise TraceFormatError(f"{directory} lacks {name}")

    schedule = load_activity_csv(directory / ACTIVITY_FILE)
    irradiance = load_irradiance_csv(directory / IRRADIANCE_FILE, schedule.interval_seconds)
    aligned = irradiance.reindex(
        pd.date_range(pd.Timestamp(schedule.start), periods=len(schedule),
                      freq=pd.Timedelta(seconds=schedule.interval_seconds)),
        fill_value=0.0,
    )
    pv = pv_trace(
        aligned.to_numpy(),
        schedule.outdoor,
        harvest_config.panel,
        schedule.interval_seconds,
        harvest_config.indoor_fraction,
        schedule.start,
    )
    harvest = None
    if (directory / HARVEST_FILE).exists():
        harvest = load_harvest_csv(directory / HARVEST_FILE, schedule.interval_seconds, schedule.start)
    return UserTraces(
        user=user,
        irradiance=aligned.rename("ghi_w_m2"),
        schedule=schedule,
        pv=pv,
        motion=motion_trace(schedule, harvest_config),
        harvest=harvest,
    )
