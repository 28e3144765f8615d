"""
Harvest Predictor
Feature construction and a bagged ensemble of regression trees returning the
per-interval harvest mean and variance, plus the worst-case transform used by
the robust planner
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .energy import ACTIVITY_ORDER, ActivityLabel
from .errors import TraceFormatError, TrainingError
from .harvest import ActivitySchedule

logger = logging.getLogger(__name__)

MODEL_MAGIC = "# harvest-tree-ensemble v1"


@dataclass(frozen=True)
class FeatureLayout:
    """Shape of the feature vector: lags, same-hour lags of past days, side information"""
    recent: int = 3
    previous_days: int = 2
    intervals_per_day: int = 24

    @property
    def dimension(self) -> int:
        return self.recent + self.previous_days + 1 + len(ACTIVITY_ORDER) + 2

    @property
    def names(self) -> List[str]:
        return (
            [f"recent_{i + 1}" for i in range(self.recent)]
            + [f"previous_day_{d + 1}" for d in range(self.previous_days)]
            + ["derivative"]
            + [f"activity_{label.value}" for label in ACTIVITY_ORDER]
            + ["outdoor", "weekend"]
        )


@dataclass(frozen=True)
class FeatureVector:
    values: Tuple[float, ...]
    cold_start: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Forecast:
    mean_j: float
    variance_j2: float

    def __post_init__(self):
        if self.mean_j < 0 or self.variance_j2 < 0:
            raise ValueError(f"Forecast must be non-negative, got ({self.mean_j}, {self.variance_j2})")


@dataclass(frozen=True)
class EnsembleParams:
    """Bagging/tree-growing hyperparameters"""
    n_trees: int = 20
    max_depth: int = 6
    min_samples_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")


def build_features(
    history: Sequence[float],
    schedule: ActivitySchedule,
    t: int,
    layout: Optional[FeatureLayout] = None,
    fill: float = 0.0,
    side: Optional[Tuple[ActivityLabel, bool]] = None,
) -> FeatureVector:
    """
    Feature vector for interval t

    Only history[:t] is read. Slots before the start of the history (or not
    yet observed) read as `fill` and mark the vector as a cold start.
    `side` replaces the activity and location of interval t when they are
    not known yet.
    """
    if t < 0:
        raise ValueError(f"Interval index must be >= 0, got {t}")
    layout = layout or FeatureLayout()
    known = min(t, len(history))
    cold = False

    def lag(index: int) -> float:
        nonlocal cold
        if 0 <= index < known:
            return float(history[index])
        cold = True
        return fill

    recent = [lag(t - i) for i in range(1, layout.recent + 1)]
    previous = [lag(t - d * layout.intervals_per_day) for d in range(1, layout.previous_days + 1)]
    derivative = lag(t - 1) - lag(t - 2)

    activity, outdoor = side if side is not None else (schedule.labels[t], schedule.outdoor[t])
    one_hot = [0.0] * len(ACTIVITY_ORDER)
    one_hot[activity.slot] = 1.0
    flags = [1.0 if outdoor else 0.0, 1.0 if schedule.is_weekend(t) else 0.0]

    return FeatureVector(tuple(recent + previous + [derivative] + one_hot + flags), cold_start=cold)


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Binary tree of axis-aligned splits; leaves have feature -1"""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'feature', np.asarray(self.feature, dtype=np.int64))
        object.__setattr__(self, 'threshold', np.asarray(self.threshold, dtype=float))
        object.__setattr__(self, 'left', np.asarray(self.left, dtype=np.int64))
        object.__setattr__(self, 'right', np.asarray(self.right, dtype=np.int64))
        object.__setattr__(self, 'value', np.asarray(self.value, dtype=float))

    @classmethod
    def leaf(cls, value: float) -> 'RegressionTree':
        return cls([-1], [0.0], [-1], [-1], [value])

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(int(self.left[node])), self.depth(int(self.right[node])))

    def predict_one(self, x: Sequence[float]) -> float:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return float(self.value[node])


@dataclass(frozen=True, eq=False)
class TreeEnsemble:
    """Fitted bagged trees; immutable and safe to share for prediction"""
    trees: Tuple[RegressionTree, ...]
    n_features: int
    params: EnsembleParams = EnsembleParams()
    layout: FeatureLayout = FeatureLayout()
    climatology_j: float = 0.0
    _tables: Tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'trees', tuple(self.trees))
        if not self.trees:
            raise TrainingError("Ensemble needs at least one tree")
        # Pad every tree to the same node count so all trees traverse together
        width = max(tree.n_nodes for tree in self.trees)
        count = len(self.trees)
        feature = np.full((count, width), -1, dtype=np.int64)
        threshold = np.zeros((count, width))
        left = np.zeros((count, width), dtype=np.int64)
        right = np.zeros((count, width), dtype=np.int64)
        value = np.zeros((count, width))
        for i, tree in enumerate(self.trees):
            n = tree.n_nodes
            feature[i, :n] = tree.feature
            threshold[i, :n] = tree.threshold
            left[i, :n] = np.maximum(tree.left, 0)
            right[i, :n] = np.maximum(tree.right, 0)
            value[i, :n] = tree.value
        object.__setattr__(self, '_tables', (feature, threshold, left, right, value))

    def tree_outputs(self, X: np.ndarray) -> np.ndarray:
        """Per-tree predictions, shape (n_trees, n_samples)"""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"Expected {self.n_features} features, got {X.shape[1]}")
        feature, threshold, left, right, value = self._tables
        rows = np.arange(len(self.trees))[:, None]
        samples = np.arange(X.shape[0])[None, :]
        nodes = np.zeros((len(self.trees), X.shape[0]), dtype=np.int64)
        while True:
            split_on = feature[rows, nodes]
            inner = split_on >= 0
            if not inner.any():
                break
            x = X[samples, np.where(inner, split_on, 0)]
            go_left = x <= threshold[rows, nodes]
            following = np.where(go_left, left[rows, nodes], right[rows, nodes])
            nodes = np.where(inner, following, nodes)
        return value[rows, nodes]


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int) -> Tuple[float, int, float]:
    """Greedy variance-reduction split; ties go to the lowest feature, then threshold"""
    n = len(y)
    best_gain, best_feature, best_threshold = 0.0, -1, 0.0
    total = y.sum()
    total_sq = np.dot(y, y)
    parent_sse = total_sq - total * total / n
    left_sizes = np.arange(1, n)
    size_ok = (left_sizes >= min_leaf) & (n - left_sizes >= min_leaf)
    if not size_ok.any():
        return best_gain, best_feature, best_threshold

    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        ys = y[order]
        valid = size_ok & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        left_sum = np.cumsum(ys)[:-1]
        left_sq = np.cumsum(ys * ys)[:-1]
        right_sum = total - left_sum
        right_sq = total_sq - left_sq
        sse = (left_sq - left_sum ** 2 / left_sizes) + (right_sq - right_sum ** 2 / (n - left_sizes))
        gain = np.where(valid, parent_sse - sse, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best_gain + 1e-12:
            best_gain, best_feature = float(gain[k]), f
            best_threshold = float((xs[k] + xs[k + 1]) / 2.0)
    return best_gain, best_feature, best_threshold


def _grow_tree(X: np.ndarray, y: np.ndarray, params: EnsembleParams) -> RegressionTree:
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def grow(indices: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[indices].mean()))

        if depth >= params.max_depth or len(indices) < 2 * params.min_samples_leaf:
            return node
        gain, split_feature, split_threshold = _best_split(X[indices], y[indices], params.min_samples_leaf)
        if split_feature < 0:
            return node

        goes_left = X[indices, split_feature] <= split_threshold
        feature[node] = split_feature
        threshold[node] = split_threshold
        left[node] = grow(indices[goes_left], depth + 1)
        right[node] = grow(indices[~goes_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return RegressionTree(feature, threshold, left, right, value)


def fit_arrays(
    X: np.ndarray,
    y: np.ndarray,
    params: Optional[EnsembleParams] = None,
    layout: Optional[FeatureLayout] = None,
) -> TreeEnsemble:
    params = params or EnsembleParams()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise TrainingError("Cannot fit a predictor on an empty dataset")
    if X.shape[0] != len(y):
        raise TrainingError(f"{X.shape[0]} feature rows but {len(y)} targets")
    if (y < 0).any():
        raise TrainingError("Harvest targets must be non-negative")

    rng = np.random.default_rng(params.seed)
    trees = []
    for _ in range(params.n_trees):
        sample = rng.integers(len(y), size=len(y))
        trees.append(_grow_tree(X[sample], y[sample], params))

    logger.info(
        f"Fitted {params.n_trees} trees on {len(y)} samples "
        f"(depth <= {params.max_depth}, leaf >= {params.min_samples_leaf})"
    )
    return TreeEnsemble(
        trees=tuple(trees),
        n_features=X.shape[1],
        params=params,
        layout=layout or FeatureLayout(),
        climatology_j=float(y.mean()),
    )


def fit(
    dataset: Sequence[Tuple[FeatureVector, float]],
    params: Optional[EnsembleParams] = None,
    layout: Optional[FeatureLayout] = None,
) -> TreeEnsemble:
    """Fit the ensemble on (features, target_j) pairs"""
    if not dataset:
        raise TrainingError("Cannot fit a predictor on an empty dataset")
    X = np.array([features.values for features, _ in dataset], dtype=float)
    y = np.array([target for _, target in dataset], dtype=float)
    return fit_arrays(X, y, params, layout)


def predict(model: TreeEnsemble, features: FeatureVector) -> Forecast:
    """Mean (floored at zero) and population variance of the tree outputs"""
    if len(features) != model.n_features:
        raise ValueError(f"Expected {model.n_features} features, got {len(features)}")
    outputs = model.tree_outputs(np.asarray(features.values)[None, :])[:, 0]
    return Forecast(mean_j=max(0.0, float(outputs.mean())), variance_j2=float(outputs.var()))


def worst_case(forecast: Forecast, k: float = 1.0) -> float:
    """Forecast mean minus k standard deviations, floored at zero"""
    if k < 0:
        raise ValueError(f"Robustness factor must be >= 0, got {k}")
    return max(0.0, forecast.mean_j - k * math.sqrt(forecast.variance_j2))


@dataclass(frozen=True)
class TypicalDay:
    """Most frequent activity and location per slot of the day"""
    labels: Tuple[ActivityLabel, ...]
    outdoor: Tuple[bool, ...]

    def at(self, t: int) -> Tuple[ActivityLabel, bool]:
        slot = t % len(self.labels)
        return self.labels[slot], self.outdoor[slot]

    @classmethod
    def repeat(cls, label: ActivityLabel, outdoor: bool, intervals_per_day: int = 24) -> 'TypicalDay':
        """The same activity and location all day"""
        return cls((label,) * intervals_per_day, (outdoor,) * intervals_per_day)


def typical_day(history: Optional[ActivitySchedule]) -> Optional[TypicalDay]:
    """
    Per-slot mode of past activity labels (lowest slot on ties) and majority
    location; None without one full day of history
    """
    if history is None:
        return None
    per_day = history.intervals_per_day
    full_days = len(history) // per_day
    if full_days == 0:
        return None

    codes = np.array([label.slot for label in history.labels[:full_days * per_day]]).reshape(full_days, per_day)
    counts = np.zeros((per_day, len(ACTIVITY_ORDER)), dtype=np.int64)
    np.add.at(counts, (np.tile(np.arange(per_day), full_days), codes.ravel()), 1)
    outdoor = np.array(history.outdoor[:full_days * per_day], dtype=float).reshape(full_days, per_day)
    return TypicalDay(
        labels=tuple(ACTIVITY_ORDER[code] for code in counts.argmax(axis=1)),
        outdoor=tuple(bool(share >= 0.5) for share in outdoor.mean(axis=0)),
    )


def forecast_horizon(
    model: TreeEnsemble,
    history: Sequence[float],
    schedule: ActivitySchedule,
    start: int,
    steps: int,
    expected: Optional[TypicalDay] = None,
    fill: Optional[float] = None,
) -> List[Forecast]:
    """
    Forecasts for intervals [start, start + steps)

    Unobserved lags inside the horizon take the means forecast for them.
    Activity and location are read from the schedule at `start` only; later
    intervals use `expected` (the schedule's own entries when it is None).
    Lags before the history start read as the model's climatology, as in
    training.
    """
    fill = model.climatology_j if fill is None else fill
    extended = [float(h) for h in history[:start]]
    forecasts = []
    for t in range(start, start + steps):
        side = expected.at(t) if expected is not None and t > start else None
        forecast = predict(model, build_features(extended, schedule, t, model.layout, fill, side))
        forecasts.append(forecast)
        extended.append(forecast.mean_j)
    return forecasts


def persistence_forecast(history: Sequence[float], t: int, intervals_per_day: int = 24) -> float:
    """Harvest of the same interval one day earlier (0 before the first day)"""
    index = t - intervals_per_day
    return float(history[index]) if 0 <= index < len(history) else 0.0


def build_dataset(
    harvest: Sequence[float],
    schedule: ActivitySchedule,
    start: int,
    stop: int,
    layout: Optional[FeatureLayout] = None,
    fill: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One-step-ahead training rows for intervals [start, stop)

    Lags before the history start read as `fill`, by default the mean target,
    which is the climatology a model fitted on these rows records.
    """
    layout = layout or FeatureLayout()
    y = np.asarray(harvest[start:stop], dtype=float)
    if fill is None:
        fill = float(y.mean()) if len(y) else 0.0
    rows = [build_features(harvest, schedule, t, layout, fill).values for t in range(start, stop)]
    X = np.array(rows, dtype=float).reshape(len(rows), layout.dimension)
    return X, y


def evaluate_mae(
    model: TreeEnsemble,
    harvest: Sequence[float],
    schedule: ActivitySchedule,
    start: int,
    stop: int,
) -> Tuple[float, float]:
    """Held-out one-step MAE of the ensemble and of the persistence baseline"""
    if stop <= start:
        raise ValueError("Empty evaluation window")
    X, y = build_dataset(harvest, schedule, start, stop, model.layout, model.climatology_j)
    predicted = np.maximum(model.tree_outputs(X).mean(axis=0), 0.0)
    persistence = np.array(
        [persistence_forecast(harvest, t, model.layout.intervals_per_day) for t in range(start, stop)]
    )
    return float(np.abs(predicted - y).mean()), float(np.abs(persistence - y).mean())


def save_model(model: TreeEnsemble, path: Union[str, Path]) -> None:
    """Flat text format; floats are written with repr so loading is bit-exact"""
    lines = [
        MODEL_MAGIC,
        f"n_features {model.n_features}",
        f"n_trees {len(model.trees)}",
        f"max_depth {model.params.max_depth}",
        f"min_samples_leaf {model.params.min_samples_leaf}",
        f"seed {model.params.seed}",
        f"recent {model.layout.recent}",
        f"previous_days {model.layout.previous_days}",
        f"intervals_per_day {model.layout.intervals_per_day}",
        f"climatology_j {model.climatology_j!r}",
    ]
    for index, tree in enumerate(model.trees):
        lines.append(f"tree {index} {tree.n_nodes}")
        for node in range(tree.n_nodes):
            lines.append(
                f"{node} {int(tree.feature[node])} {float(tree.threshold[node])!r} "
                f"{int(tree.left[node])} {int(tree.right[node])} {float(tree.value[node])!r}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: Union[str, Path]) -> TreeEnsemble:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != MODEL_MAGIC:
        raise TraceFormatError(f"{path} is not a tree ensemble file", line=1)

    header = {}
    cursor = 1
    while cursor < len(lines) and not lines[cursor].startswith("tree "):
        try:
            key, raw = lines[cursor].split()
        except ValueError:
            raise TraceFormatError(f"Malformed header entry {lines[cursor]!r}", line=cursor + 1)
        header[key] = raw
        cursor += 1

    try:
        params = EnsembleParams(
            n_trees=int(header["n_trees"]),
            max_depth=int(header["max_depth"]),
            min_samples_leaf=int(header["min_samples_leaf"]),
            seed=int(header["seed"]),
        )
        layout = FeatureLayout(
            recent=int(header["recent"]),
            previous_days=int(header["previous_days"]),
            intervals_per_day=int(header["intervals_per_day"]),
        )
        n_features = int(header["n_features"])
        climatology = float(header["climatology_j"])
    except KeyError as e:
        raise TraceFormatError(f"Model header lacks {e.args[0]}")

    trees = []
    for _ in range(params.n_trees):
        if cursor >= len(lines):
            raise TraceFormatError("Model file ends before all trees were read", line=cursor + 1)
        parts = lines[cursor].split()
        if len(parts) != 3 or parts[0] != "tree":
            raise TraceFormatError(f"Expected a tree header, got {lines[cursor]!r}", line=cursor + 1)
        n_nodes = int(parts[2])
        cursor += 1
        columns: List[List[float]] = [[], [], [], [], []]
        for node in range(n_nodes):
            fields = lines[cursor].split() if cursor < len(lines) else []
            if len(fields) != 6 or int(fields[0]) != node:
                raise TraceFormatError("Malformed node line", line=cursor + 1)
            columns[0].append(int(fields[1]))
            columns[1].append(float(fields[2]))
            columns[2].append(int(fields[3]))
            columns[3].append(int(fields[4]))
            columns[4].append(float(fields[5]))
            cursor += 1
        trees.append(RegressionTree(*columns))

    return TreeEnsemble(
        trees=tuple(trees),
        n_features=n_features,
        params=params,
        layout=layout,
        climatology_j=climatology,
    )
