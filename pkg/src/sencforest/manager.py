"""Multiple forests: cross-forest voting, spawning, and retirement."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .core import NEW_CLASS, Dataset, spawn
from .forest import ForestPrediction, SencForest, build_forest


@dataclass
class ForestParams:
    """Hyper-parameters shared by every forest a manager creates."""

    z: int = 100
    psi: int = 200
    min_size: int = 10
    max_nodes: int = 300
    class_cap: int = 3
    max_forests: int = 3
    retire_window: int = 1000

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")


@dataclass
class _Slot:
    forest: SencForest
    uid: int
    created_at: int
    last_used: int = -1
    # known-class wins since the last model update
    period_uses: int = 0
    total_uses: int = 0


@dataclass
class ManagerEvent:
    kind: str  # "update", "spawn" or "retire"
    forest: int
    at: int
    class_id: int | None = None
    rule: int | None = None


class ForestManager:
    """Ordered set of forests with usage counters.

    At most one forest (the newest) is still growing. A forest counts as
    used when its prediction is the known class returned by
    :meth:`predict`. A non-growing forest with no use over the last
    ``retire_window`` predictions is retired; when a new forest must be
    spawned at capacity, the forest with the fewest uses since the previous
    model update goes.
    """

    def __init__(self, forests: list[SencForest], params: ForestParams, class_counter: int | None = None) -> None:
        if not forests:
            raise ValueError("manager needs at least one forest")
        self.params = params
        self.slots: list[_Slot] = []
        self.n_predictions = 0
        self._next_uid = 0
        self.events: list[ManagerEvent] = []
        self.last_predictions: list[ForestPrediction] = []
        for f in forests:
            self._append(f)
        known = [c for f in forests for c in f.known_classes]
        self.class_counter = class_counter if class_counter is not None else max(known)

    @classmethod
    def train(cls, data: Dataset, params: ForestParams | None = None, rng: np.random.Generator | None = None) -> ForestManager:
        params = params or ForestParams()
        forest = build_forest(data, params.z, params.psi, params.min_size, params.max_nodes, params.class_cap, rng)
        return cls([forest], params)

    def _append(self, forest: SencForest) -> None:
        self.slots.append(_Slot(forest, self._next_uid, self.n_predictions))
        self._next_uid += 1

    @property
    def forests(self) -> list[SencForest]:
        return [s.forest for s in self.slots]

    @property
    def forest_ids(self) -> list[int]:
        return [s.uid for s in self.slots]

    @property
    def known_classes(self) -> list[int]:
        return sorted({c for s in self.slots for c in s.forest.known_classes})

    @property
    def dimension(self) -> int:
        return self.slots[0].forest.dimension

    def growing_forest(self) -> SencForest | None:
        for s in self.slots:
            if s.forest.growing:
                return s.forest
        return None

    # -- prediction ----------------------------------------------------------

    def forest_predictions(self, x) -> list[ForestPrediction]:
        return [s.forest.predict(x) for s in self.slots]

    def predict(self, x) -> int:
        """Final label for ``x`` and usage bookkeeping for the winning forest."""
        preds = self.forest_predictions(x)
        self.last_predictions = preds
        label, winner = combine_predictions(preds)
        if winner is not None:
            slot = self.slots[winner]
            slot.last_used = self.n_predictions
            slot.period_uses += 1
            slot.total_uses += 1
        self.n_predictions += 1
        return label

    # -- maintenance ---------------------------------------------------------

    def maybe_retire(self) -> list[int]:
        """Retire idle non-growing forests; returns the retired forest ids."""
        window = self.params.retire_window
        retired = []
        for slot in list(self.slots):
            if len(self.slots) == 1:
                break
            if slot.forest.growing:
                continue
            idle_since = max(slot.last_used + 1, slot.created_at)
            if self.n_predictions - idle_since >= window:
                self._retire(slot, rule=1)
                retired.append(slot.uid)
        return retired

    def _retire(self, slot: _Slot, rule: int) -> None:
        self.slots.remove(slot)
        self.events.append(ManagerEvent("retire", slot.uid, self.n_predictions, rule=rule))

    def on_buffer_full(self, buffer: np.ndarray, rng: np.random.Generator) -> int:
        """Absorb a full buffer as the next class id; returns that id.

        The growing forest is updated in place if there is one; otherwise a
        new forest is trained on the buffer alone, retiring one forest first
        if the manager is at capacity.
        """
        buffer = np.atleast_2d(np.asarray(buffer, dtype=float))
        if buffer.shape[0] == 0:
            raise ValueError("buffer is empty")
        new_id = self.class_counter + 1
        grow_rng, build_rng = spawn(rng, 2)
        target = next((s for s in self.slots if s.forest.growing), None)
        if target is not None:
            target.forest.update(buffer, new_id, grow_rng)
            self.events.append(ManagerEvent("update", target.uid, self.n_predictions, class_id=new_id))
        else:
            p = self.params
            if len(self.slots) >= p.max_forests:
                self.maybe_retire()
            if len(self.slots) >= p.max_forests:
                least = min(self.slots, key=lambda s: s.period_uses)
                self._retire(least, rule=2)
            forest = build_forest(
                Dataset.unlabeled(buffer, new_id), p.z, p.psi, p.min_size, p.max_nodes, p.class_cap, build_rng
            )
            self._append(forest)
            self.events.append(ManagerEvent("spawn", self.slots[-1].uid, self.n_predictions, class_id=new_id))
        self.class_counter = new_id
        for s in self.slots:
            s.period_uses = 0
        return new_id

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": asdict(self.params),
            "class_counter": self.class_counter,
            "n_predictions": self.n_predictions,
            "next_uid": self._next_uid,
            "slots": [
                {
                    "uid": s.uid,
                    "created_at": s.created_at,
                    "last_used": s.last_used,
                    "period_uses": s.period_uses,
                    "total_uses": s.total_uses,
                    "forest": s.forest.to_dict(),
                }
                for s in self.slots
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ForestManager:
        params = ForestParams(**data["params"])
        forests = [SencForest.from_dict(s["forest"]) for s in data["slots"]]
        mgr = cls(forests, params, class_counter=data["class_counter"])
        mgr.n_predictions = data["n_predictions"]
        mgr._next_uid = data["next_uid"]
        for slot, s in zip(mgr.slots, data["slots"]):
            slot.uid = s["uid"]
            slot.created_at = s["created_at"]
            slot.last_used = s["last_used"]
            slot.period_uses = s["period_uses"]
            slot.total_uses = s["total_uses"]
        return mgr


def combine_predictions(preds: list[ForestPrediction]) -> tuple[int, int | None]:
    """Resolve per-forest predictions into ``(label, winning forest index)``.

    NEW_CLASS only when every forest says so; otherwise the known-class
    prediction with the highest confidence, earliest forest on ties.
    """
    best = None
    for i, p in enumerate(preds):
        if p.label != NEW_CLASS and (best is None or p.confidence > preds[best].confidence):
            best = i
    if best is None:
        return NEW_CLASS, None
    return preds[best].label, best
