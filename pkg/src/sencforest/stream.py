"""Deployment loop: predict each instance, buffer new-class candidates, update."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Iterator

import numpy as np

from .core import NEW_CLASS, LabelIndex, as_instance, spawn
from .manager import ForestManager


@dataclass
class PredictionRecord:
    """Audit trail for one stream instance.

    ``predicted`` is a model class id or ``NEW_CLASS`` (-1). ``true_label``,
    ``expected`` and ``emerging`` are evaluation metadata: ``expected`` is
    the model id the true class is known under at prediction time (or
    ``NEW_CLASS`` if the class is not known yet), and ``emerging`` says the
    latter.
    """

    index: int
    predicted: int
    model_updated: bool = False
    true_label: Hashable | None = None
    expected: int | None = None
    emerging: bool | None = None
    n_forests: int = 1
    forest_labels: list[int] | None = None

    def to_json(self) -> str:
        out: dict[str, Any] = {"index": self.index, "predicted": self.predicted}
        if self.true_label is not None:
            out["true_label"] = self.true_label
            out["expected"] = self.expected
            out["emerging"] = self.emerging
        out["model_updated"] = self.model_updated
        out["n_forests"] = self.n_forests
        if self.forest_labels is not None:
            out["forest_labels"] = self.forest_labels
        return json.dumps(out, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> PredictionRecord:
        return cls(**json.loads(line))


class LabelTracker:
    """Evaluation-side map from true labels to model class ids.

    Seeded with the training labels. When the model absorbs a new class id,
    every true label seen since the previous update that the model does not
    currently know is mapped to that id, so several classes emerging in one
    period merge into one.
    """

    def __init__(self, labels: LabelIndex) -> None:
        self.to_model: dict[Hashable, int] = {name: i + 1 for i, name in enumerate(labels.names)}
        self._recent: list[Hashable] = []

    def observe(self, label: Hashable) -> None:
        if label not in self._recent:
            self._recent.append(label)

    def expected(self, label: Hashable, known: set[int]) -> int:
        cid = self.to_model.get(label)
        return cid if cid is not None and cid in known else NEW_CLASS

    def on_update(self, new_id: int, known_before: set[int]) -> None:
        for label in self._recent:
            if self.expected(label, known_before) == NEW_CLASS:
                self.to_model[label] = new_id
        self._recent.clear()


def inject_labels(
    buffer: list[np.ndarray],
    labels: list[Hashable | None],
    q: float,
    is_known,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[Hashable | None]]:
    """Reveal the true label of ``floor(q * len(buffer))`` random buffered items.

    Revealed items whose class is already known (``is_known(label)``) are
    dropped as false positives; everything else is kept.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    n_reveal = int(np.floor(q * len(buffer) + 1e-9))
    if n_reveal == 0:
        return list(buffer), list(labels)
    revealed = set(rng.choice(len(buffer), size=n_reveal, replace=False).tolist())
    keep = [
        i for i in range(len(buffer))
        if i not in revealed or labels[i] is None or not is_known(labels[i])
    ]
    return [buffer[i] for i in keep], [labels[i] for i in keep]


class StreamError(RuntimeError):
    def __init__(self, index: int, cause: Exception) -> None:
        super().__init__(f"instance {index}: {cause}")
        self.index = index


class StreamEngine:
    """Single-threaded orchestration of prediction, buffering and update.

    Args:
        manager: The forests to deploy.
        buffer_size: Number of new-class candidates that triggers an update.
        q: Fraction of buffered candidates whose true labels are revealed
            before an update (0 disables label use entirely).
        rng: Source of randomness for updates and label injection.
        labels: Training label index; needed to score records against true
            labels and for label injection.
        audit: Attach every forest's own prediction to each record.
    """

    def __init__(
        self,
        manager: ForestManager,
        buffer_size: int = 250,
        q: float = 0.0,
        rng: np.random.Generator | None = None,
        labels: LabelIndex | None = None,
        audit: bool = False,
    ) -> None:
        if buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {q}")
        self.manager = manager
        self.buffer_size = buffer_size
        self.q = q
        self.rng = rng if rng is not None else np.random.default_rng()
        self.tracker = LabelTracker(labels) if labels is not None else None
        self.audit = audit
        self.buffer: list[np.ndarray] = []
        self._buffer_labels: list[Hashable | None] = []
        self.index = 0
        self.updates: list[int] = []
        self.max_retained = 0

    @property
    def class_counter(self) -> int:
        return self.manager.class_counter

    def process_instance(self, x, true_label: Hashable | None = None) -> PredictionRecord:
        x = as_instance(x, self.manager.dimension)
        mgr = self.manager
        known = set(mgr.known_classes)
        record = PredictionRecord(self.index, NEW_CLASS, n_forests=len(mgr.slots))
        record.predicted = mgr.predict(x)
        if self.audit:
            record.forest_labels = [p.label for p in mgr.last_predictions]
        if true_label is not None and self.tracker is not None:
            self.tracker.observe(true_label)
            record.true_label = true_label
            record.expected = self.tracker.expected(true_label, known)
            record.emerging = record.expected == NEW_CLASS
        if record.predicted == NEW_CLASS:
            self.buffer.append(x)
            self._buffer_labels.append(true_label)
            self.max_retained = max(self.max_retained, len(self.buffer))
            if len(self.buffer) >= self.buffer_size:
                record.model_updated = self._flush(known)
        mgr.maybe_retire()
        self.index += 1
        return record

    def _flush(self, known: set[int]) -> bool:
        inject_rng, update_rng = spawn(self.rng, 2)
        buffer, labels = self.buffer, self._buffer_labels
        if self.q > 0 and self.tracker is not None:
            tracker = self.tracker
            buffer, labels = inject_labels(
                buffer, labels, self.q, lambda lab: tracker.expected(lab, known) != NEW_CLASS, inject_rng
            )
        self.buffer, self._buffer_labels = [], []
        if not buffer:
            return False
        new_id = self.manager.on_buffer_full(np.vstack(buffer), update_rng)
        if self.tracker is not None:
            self.tracker.on_update(new_id, known)
        self.updates.append(self.index)
        return True

    def run(self, source: Iterable) -> Iterator[PredictionRecord]:
        """Process ``source`` in order, yielding one record per instance.

        Items are either feature vectors or ``(features, true_label)`` pairs.
        """
        for item in source:
            if isinstance(item, tuple):
                x, label = item
            else:
                x, label = item, None
            try:
                yield self.process_instance(x, label)
            except Exception as exc:
                raise StreamError(self.index, exc) from exc


def run_stream(engine: StreamEngine, source: Iterable) -> list[PredictionRecord]:
    return list(engine.run(source))
