"""Shared types: datasets, class ids, distance and seeded randomness."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Iterator, Sequence

import numpy as np

#: Label emitted for instances of an emerging (unseen) class. Known class
#: ids are dense positive integers ``1..m``.
NEW_CLASS = -1


def as_instance(x: Sequence[float] | np.ndarray, dimension: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite 1-D float array, checking its dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"instance must be a non-empty 1-D vector, got shape {arr.shape}")
    if dimension is not None and arr.size != dimension:
        raise ValueError(f"dimension mismatch: expected {dimension}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("instance contains non-finite values")
    return arr


def distance(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Euclidean distance between two instances of equal dimension."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.dot(diff, diff)))


@dataclass(frozen=True)
class Dataset:
    """Labelled instances stored as a feature matrix and a label vector.

    Attributes:
        X: Array of shape ``(n, d)``.
        y: Integer class ids of shape ``(n,)``; never ``NEW_CLASS``.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[1] < 1:
            raise ValueError("dimension must be >= 1")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y shape {y.shape} does not match {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        if np.any(y == NEW_CLASS):
            raise ValueError("training labels must be known class ids")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def unlabeled(cls, X: np.ndarray, label: int) -> Dataset:
        """Wrap ``X`` with every instance assigned ``label``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(X, np.full(X.shape[0], label, dtype=np.int64))

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def take(self, idx: np.ndarray) -> Dataset:
        return Dataset(self.X[idx], self.y[idx])

    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.y))


def make_rng(seed: int | np.random.SeedSequence | np.random.Generator | None) -> np.random.Generator:
    """Build a PCG64 generator; passing a Generator returns it unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child generators from ``rng``.

    Children come from the parent's bit-generator seed sequence, so the
    result depends only on the parent's seed and how many spawns preceded.
    """
    return rng.spawn(n)


def subsample_indices(n: int, psi: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``min(psi, n)`` items drawn uniformly without replacement."""
    if n < 1:
        raise ValueError("cannot subsample an empty collection")
    if psi < 1:
        raise ValueError(f"psi must be >= 1, got {psi}")
    if psi >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=psi, replace=False))


def subsample(data: Dataset, psi: int, rng: np.random.Generator) -> Dataset:
    """Draw ``min(psi, |data|)`` items uniformly without replacement."""
    return data.take(subsample_indices(len(data), psi, rng))


@dataclass
class LabelIndex:
    """Interns external labels (strings, ints) to dense class ids ``1..m``."""

    names: list[Hashable] = field(default_factory=list)

    def intern(self, label: Hashable) -> int:
        try:
            return self.names.index(label) + 1
        except ValueError:
            self.names.append(label)
            return len(self.names)

    def lookup(self, label: Hashable) -> int | None:
        try:
            return self.names.index(label) + 1
        except ValueError:
            return None

    def name(self, class_id: int) -> Hashable:
        if class_id == NEW_CLASS:
            return "NEW_CLASS"
        return self.names[class_id - 1]


def iter_csv_rows(
    path: str | Path, header: bool = False, dimension: int | None = None
) -> Iterator[tuple[np.ndarray, str | None]]:
    """Yield ``(features, label)`` pairs from a CSV file one row at a time.

    A row with ``dimension + 1`` columns carries a label in its last column;
    a row with exactly ``dimension`` columns is unlabelled. When
    ``dimension`` is None every row is assumed to be labelled.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if dimension is None or len(row) == dimension + 1:
                feats, label = row[:-1], row[-1].strip()
            elif len(row) == dimension:
                feats, label = row, None
            else:
                raise ValueError(
                    f"{path}:{lineno}: expected {dimension} or {dimension + 1} columns, got {len(row)}"
                )
            try:
                x = np.array([float(v) for v in feats])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if x.size == 0 or not np.all(np.isfinite(x)):
                raise ValueError(f"{path}:{lineno}: empty or non-finite features")
            yield x, label


def read_csv_dataset(
    path: str | Path, header: bool = False, labels: LabelIndex | None = None
) -> tuple[Dataset, LabelIndex]:
    """Load a labelled CSV (features then label column) into a Dataset."""
    labels = labels if labels is not None else LabelIndex()
    rows: list[np.ndarray] = []
    ys: list[int] = []
    for x, label in iter_csv_rows(path, header=header):
        if rows and x.size != rows[0].size:
            raise ValueError(f"{path}: inconsistent dimension {x.size} vs {rows[0].size}")
        rows.append(x)
        ys.append(labels.intern(label))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Dataset(np.vstack(rows), np.array(ys)), labels


def write_csv_dataset(path: str | Path, X: np.ndarray, labels: Iterable[Hashable]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for x, label in zip(X, labels):
            writer.writerow([repr(float(v)) for v in x] + [label])
