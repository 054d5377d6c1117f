"""Stream evaluation: metrics, synthetic Gaussian data and scenario streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from .core import NEW_CLASS, Dataset, LabelIndex
from .stream import PredictionRecord

# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class WindowMetrics:
    start: int
    end: int
    n: int
    a_new: int
    a_old: int
    en_accuracy: float


@dataclass(frozen=True)
class DetectionMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_measure: float


def en_accuracy(records: Sequence[PredictionRecord]) -> WindowMetrics:
    """Fraction of emerging instances flagged new plus known ones classified right."""
    if not records:
        raise ValueError("empty window")
    a_new = a_old = 0
    for r in records:
        if r.expected is None:
            raise ValueError(f"record {r.index} has no ground truth")
        if r.expected == NEW_CLASS:
            a_new += r.predicted == NEW_CLASS
        else:
            a_old += r.predicted == r.expected
    n = len(records)
    return WindowMetrics(records[0].index, records[-1].index, n, a_new, a_old, (a_new + a_old) / n)


def windowed_en_accuracy(records: Sequence[PredictionRecord], window: int = 100) -> list[WindowMetrics]:
    """EN accuracy over consecutive non-overlapping windows (last may be short)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    return [en_accuracy(records[i:i + window]) for i in range(0, len(records), window)]


def detection_metrics(tp: int, fp: int, fn: int) -> DetectionMetrics:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return DetectionMetrics(tp, fp, fn, precision, recall, f)


def f_measure(records: Sequence[PredictionRecord]) -> DetectionMetrics:
    """Precision/recall/F of flagging emerging-class instances as new."""
    tp = fp = fn = 0
    for r in records:
        if r.expected is None:
            raise ValueError(f"record {r.index} has no ground truth")
        flagged = r.predicted == NEW_CLASS
        emerging = r.expected == NEW_CLASS
        tp += flagged and emerging
        fp += flagged and not emerging
        fn += emerging and not flagged
    return detection_metrics(tp, fp, fn)


def detection_phases(
    records: Sequence[PredictionRecord], boundaries: Sequence[int], new_periods: Sequence[bool] | None = None
) -> list[tuple[int, int]]:
    """``(start, stop)`` slices from each period start up to its first update.

    The instance that triggers the update is included. A period without an
    update contributes all of its instances. Periods flagged as having no
    emerging class are skipped.
    """
    n = len(records)
    edges = list(boundaries) + [n]
    phases = []
    for p, (start, stop) in enumerate(zip(edges[:-1], edges[1:])):
        if new_periods is not None and not new_periods[p]:
            continue
        end = stop
        for j in range(start, stop):
            if records[j].model_updated:
                end = j + 1
                break
        if end > start:
            phases.append((start, end))
    return phases


# -- synthetic data ------------------------------------------------------------


def square_means(separation: float) -> np.ndarray:
    return np.array([[0.0, 0.0], [separation, 0.0], [0.0, separation], [separation, separation]])


def grid_means(n_classes: int, separation: float, dimension: int = 2) -> np.ndarray:
    """Class means on a square lattice in the first two axes, spacing ``separation``."""
    if dimension < 2:
        raise ValueError("grid layout needs dimension >= 2")
    side = int(np.ceil(np.sqrt(n_classes)))
    means = np.zeros((n_classes, dimension))
    k = np.arange(n_classes)
    means[:, 0] = separation * (k % side)
    means[:, 1] = separation * (k // side)
    return means


def gaussian_classes(counts: Sequence[int], means: np.ndarray, rng: np.random.Generator) -> Dataset:
    """Isotropic unit-variance Gaussian classes labelled ``1..len(means)``."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    X = [rng.normal(size=(c, means.shape[1])) + m for c, m in zip(counts, means)]
    y = np.repeat(np.arange(1, len(means) + 1), counts)
    return Dataset(np.vstack(X), y)


def generate_synthetic(n: int = 20000, separation: float = 5.0, rng: np.random.Generator | None = None) -> Dataset:
    """Four overlapping 2-D Gaussians at the corners of a square of side ``separation``.

    Classes get ``n // 4`` points each; the remainder goes to the first classes.
    """
    if n < 4:
        raise ValueError("n must be >= 4")
    rng = rng if rng is not None else np.random.default_rng()
    counts = [n // 4 + (k < n % 4) for k in range(4)]
    return gaussian_classes(counts, square_means(separation), rng)


def generate_grid(
    n_per_class: int, n_classes: int, separation: float = 5.0, dimension: int = 2,
    rng: np.random.Generator | None = None,
) -> Dataset:
    """Many Gaussian classes on a lattice; used where streams need more classes."""
    rng = rng if rng is not None else np.random.default_rng()
    return gaussian_classes([n_per_class] * n_classes, grid_means(n_classes, separation, dimension), rng)


# -- scenarios -----------------------------------------------------------------


@dataclass
class Period:
    """One stretch of the stream, drawn uniformly over ``classes``.

    ``new`` lists the classes of ``classes`` that emerge in this period.
    Labels are scenario-level class names, bound to data classes per trial.
    """

    classes: list[int]
    new: list[int]
    size: int


@dataclass
class StreamScenario:
    train_classes: list[int]
    train_per_class: int
    periods: list[Period]
    buffer_size: int = 250

    def __post_init__(self) -> None:
        known = set(self.train_classes)
        if self.train_per_class < 1 or not self.train_classes:
            raise ValueError("scenario needs training classes and a positive size")
        for i, p in enumerate(self.periods):
            if p.size < 1:
                raise ValueError(f"period {i} has non-positive size")
            if not set(p.new) <= set(p.classes):
                raise ValueError(f"period {i}: new classes must be part of the period's classes")
            if set(p.new) & known:
                raise ValueError(f"period {i}: new class already known")
            if set(p.classes) - set(p.new) - known:
                raise ValueError(f"period {i}: known classes must have appeared before")
            known |= set(p.new)

    @property
    def labels(self) -> list[int]:
        out = list(self.train_classes)
        for p in self.periods:
            out += [c for c in p.new if c not in out]
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "train_classes": self.train_classes,
            "train_per_class": self.train_per_class,
            "periods": [{"classes": p.classes, "new": p.new, "size": p.size} for p in self.periods],
            "buffer_size": self.buffer_size,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> StreamScenario:
        periods = [Period(list(p["classes"]), list(p["new"]), int(p["size"])) for p in data["periods"]]
        return cls(list(data["train_classes"]), int(data["train_per_class"]), periods, int(data.get("buffer_size", 250)))


def two_period(train_per_class: int = 500, sizes: tuple[int, int] = (1000, 1500), buffer_size: int = 250) -> StreamScenario:
    """Two known classes, then one new class per period."""
    return StreamScenario(
        [1, 2], train_per_class,
        [Period([1, 2, 3], [3], sizes[0]), Period([1, 2, 3, 4], [4], sizes[1])],
        buffer_size,
    )


def long_stream(n_periods: int = 12, period_size: int = 1000, train_per_class: int = 500, buffer_size: int = 250) -> StreamScenario:
    """Each period: the two most recent classes plus one new class."""
    periods = [Period([k, k + 1, k + 2], [k + 2], period_size) for k in range(1, n_periods + 1)]
    return StreamScenario([1, 2], train_per_class, periods, buffer_size)


def multi_new(n_periods: int = 3, period_size: int = 2000, train_per_class: int = 500, buffer_size: int = 250) -> StreamScenario:
    """Each period: the previous two classes plus two classes emerging together."""
    periods = []
    for k in range(n_periods):
        old = [2 * k + 1, 2 * k + 2]
        new = [2 * k + 3, 2 * k + 4]
        periods.append(Period(old + new, new, period_size))
    return StreamScenario([1, 2], train_per_class, periods, buffer_size)


def control(train_per_class: int = 500, size: int = 1000, buffer_size: int = 250) -> StreamScenario:
    """No emerging class at all: pure classification."""
    return StreamScenario([1, 2], train_per_class, [Period([1, 2], [], size)], buffer_size)


SCENARIOS = {"two_period": two_period, "long_stream": long_stream, "multi_new": multi_new, "control": control}


@dataclass
class ScenarioStream:
    train: Dataset
    labels: LabelIndex
    items: list[tuple[np.ndarray, int]]
    boundaries: list[int]
    new_periods: list[bool]
    binding: dict[int, int] = field(default_factory=dict)

    def __iter__(self) -> Iterator[tuple[np.ndarray, int]]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)


def bind_classes(scenario: StreamScenario, data_classes: Sequence[int], rng: np.random.Generator) -> dict[int, int]:
    """Assign each scenario label a data class, chosen at random.

    Unused data classes are preferred; once exhausted, a class is reused
    when no label bound to it appears in the current or previous period.
    """
    data_classes = list(data_classes)
    binding: dict[int, int] = {}
    for c in scenario.train_classes:
        free = [d for d in data_classes if d not in binding.values()]
        if not free:
            raise ValueError("not enough data classes for the initial training set")
        binding[c] = int(free[rng.integers(len(free))])
    prev: set[int] = set(scenario.train_classes)
    for p in scenario.periods:
        in_use = {binding[c] for c in (set(p.classes) | prev) if c in binding}
        for c in p.new:
            free = [d for d in data_classes if d not in in_use]
            fresh = [d for d in free if d not in binding.values()]
            free = fresh or free
            if not free:
                raise ValueError("not enough data classes to keep concurrent classes distinct")
            binding[c] = int(free[rng.integers(len(free))])
            in_use.add(binding[c])
        prev = set(p.classes)
    return binding


def build_scenario_stream(scenario: StreamScenario, data: Dataset, rng: np.random.Generator) -> ScenarioStream:
    """Slice ``data`` into a training set and a labelled instance stream.

    Every period draws each instance's class uniformly from the period's
    classes; instances are taken without replacement from the data.
    """
    binding = bind_classes(scenario, data.classes(), rng)
    pools = {c: list(rng.permutation(np.nonzero(data.y == c)[0])) for c in data.classes()}

    def draw(label: int, k: int) -> np.ndarray:
        pool = pools[binding[label]]
        if len(pool) < k:
            raise ValueError(f"data class {binding[label]} has too few instances left for class {label}")
        taken, pools[binding[label]] = pool[:k], pool[k:]
        return data.X[np.array(taken, dtype=np.int64)]

    labels = LabelIndex()
    Xs, ys = [], []
    for c in scenario.train_classes:
        Xs.append(draw(c, scenario.train_per_class))
        ys += [labels.intern(c)] * scenario.train_per_class
    train = Dataset(np.vstack(Xs), np.array(ys))

    items: list[tuple[np.ndarray, int]] = []
    boundaries = []
    for p in scenario.periods:
        boundaries.append(len(items))
        picks = np.array(p.classes)[rng.integers(len(p.classes), size=p.size)]
        counts = {c: int(np.sum(picks == c)) for c in p.classes}
        rows = {c: iter(draw(c, counts[c])) for c in p.classes if counts[c]}
        items += [(next(rows[int(c)]), int(c)) for c in picks]
    return ScenarioStream(train, labels, items, boundaries, [bool(p.new) for p in scenario.periods], binding)


def mean_and_2se(values: Sequence[float]) -> tuple[float, float]:
    """Mean and two standard errors (0 for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(2 * v.std(ddof=1) / np.sqrt(v.size))
