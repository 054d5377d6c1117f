"""An ensemble of SENC trees: build, vote, and absorb one new class at a time."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import NEW_CLASS, Dataset, as_instance, spawn, subsample, subsample_indices
from .tree import SencTree, build_tree


@dataclass(frozen=True)
class ForestPrediction:
    label: int
    confidence: float


class _Packed:
    """All trees of a forest laid out as ``(z, max_nodes)`` arrays.

    Used for fast per-instance prediction: every tree is descended at once
    with vectorised indexing. Rebuilt whenever the forest changes.
    """

    def __init__(self, trees: list[SencTree]) -> None:
        z = len(trees)
        width = max(t.n_nodes for t in trees)
        d = trees[0].dimension
        self.feature = np.zeros((z, width), dtype=np.int64)
        self.threshold = np.zeros((z, width))
        self.left = np.full((z, width), -1, dtype=np.int64)
        self.right = np.full((z, width), -1, dtype=np.int64)
        self.depth = np.zeros((z, width), dtype=np.int64)
        self.label = np.zeros((z, width), dtype=np.int64)
        self.anomaly = np.zeros((z, width), dtype=bool)
        self.center = np.zeros((z, width, d))
        self.radius = np.zeros((z, width))
        for t, tree in enumerate(trees):
            n = tree.n_nodes
            self.left[t, :n] = tree.left
            self.right[t, :n] = tree.right
            self.depth[t, :n] = tree.depth
            for i in range(n):
                if tree.feature[i] >= 0:
                    self.feature[t, i] = tree.feature[i]
                    self.threshold[t, i] = tree.threshold[i]
                else:
                    self.label[t, i] = tree.leaf_label(i)
                    self.anomaly[t, i] = tree.depth[i] < tree.tau_hat
                    self.center[t, i] = tree.center[i]
                    self.radius[t, i] = tree.radius[i]
        self.rows = np.arange(z)

    def leaves(self, x: np.ndarray) -> np.ndarray:
        rows = self.rows
        node = np.zeros(rows.size, dtype=np.int64)
        while True:
            left = self.left[rows, node]
            internal = left >= 0
            if not internal.any():
                return node
            go_left = x[self.feature[rows, node]] <= self.threshold[rows, node]
            node = np.where(internal, np.where(go_left, left, self.right[rows, node]), node)

    def votes(self, x: np.ndarray) -> np.ndarray:
        rows = self.rows
        node = self.leaves(x)
        diff = x - self.center[rows, node]
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        outlying = self.anomaly[rows, node] & (dist > self.radius[rows, node])
        return np.where(outlying, NEW_CLASS, self.label[rows, node])


def resolve_votes(votes: np.ndarray) -> ForestPrediction:
    """Plurality over tree votes; known classes beat NEW_CLASS on ties, then smallest id."""
    votes = np.asarray(votes, dtype=np.int64)
    labels, counts = np.unique(votes, return_counts=True)
    best = counts.max()
    tied = labels[counts == best]
    known = tied[tied != NEW_CLASS]
    label = int(known.min()) if known.size else NEW_CLASS
    return ForestPrediction(label, float(best) / votes.size)


class SencForest:
    """``z`` SENC trees over independent subsamples plus class bookkeeping.

    A forest absorbs emerging classes via :meth:`update` until it knows
    ``class_cap`` classes; after that it stops growing.
    """

    def __init__(
        self,
        trees: list[SencTree],
        psi: int,
        known_classes: list[int],
        class_cap: int,
    ) -> None:
        if not trees:
            raise ValueError("a forest needs at least one tree")
        if len({t.dimension for t in trees}) != 1:
            raise ValueError("all trees must share a dimension")
        self.trees = trees
        self.psi = psi
        self.known_classes = sorted(known_classes)
        self.class_cap = class_cap
        self._packed: _Packed | None = None

    @property
    def z(self) -> int:
        return len(self.trees)

    @property
    def dimension(self) -> int:
        return self.trees[0].dimension

    @property
    def growing(self) -> bool:
        return len(self.known_classes) < self.class_cap

    def _pack(self) -> _Packed:
        if self._packed is None:
            self._packed = _Packed(self.trees)
        return self._packed

    def votes(self, x) -> np.ndarray:
        """One vote per tree (class id or ``NEW_CLASS``)."""
        return self._pack().votes(as_instance(x, self.dimension))

    def predict(self, x) -> ForestPrediction:
        return resolve_votes(self.votes(x))

    def average_path_length(self, x) -> float:
        """Mean root-to-leaf depth of ``x`` over the trees; lower is more anomalous."""
        packed = self._pack()
        node = packed.leaves(as_instance(x, self.dimension))
        return float(packed.depth[packed.rows, node].mean())

    def update(self, buffer: np.ndarray, new_label: int, rng: np.random.Generator) -> list[int]:
        """Absorb the buffered instances as class ``new_label``.

        Each tree draws its own subsample of the buffer, routes it, and grows
        every leaf that received instances; thresholds are then recomputed.
        Returns the number of buffered instances used by each tree.
        """
        if not self.growing:
            raise RuntimeError("forest has reached its class cap; spawn a new forest instead")
        buffer = np.atleast_2d(np.asarray(buffer, dtype=float))
        if buffer.shape[0] == 0:
            raise ValueError("update needs a non-empty buffer")
        if buffer.shape[1] != self.dimension:
            raise ValueError(f"dimension mismatch: expected {self.dimension}, got {buffer.shape[1]}")
        if new_label in self.known_classes or new_label == NEW_CLASS:
            raise ValueError(f"label {new_label} is not a new class id")
        used = []
        for tree, child in zip(self.trees, spawn(rng, self.z)):
            idx = subsample_indices(buffer.shape[0], self.psi, child)
            batch = buffer[idx]
            leaves = np.array([tree.route(row)[0] for row in batch])
            for leaf in np.unique(leaves):
                members = batch[leaves == leaf]
                tree.grow_leaf(int(leaf), Dataset.unlabeled(members, new_label), child)
            tree.tau_hat = tree.compute_threshold()
            used.append(len(idx))
        self.known_classes = sorted(self.known_classes + [new_label])
        self._packed = None
        return used

    def to_dict(self) -> dict[str, Any]:
        return {
            "psi": self.psi,
            "class_cap": self.class_cap,
            "known_classes": list(self.known_classes),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SencForest:
        trees = [SencTree.from_dict(t) for t in data["trees"]]
        return cls(trees, data["psi"], data["known_classes"], data["class_cap"])


def build_forest(
    data: Dataset,
    z: int = 100,
    psi: int = 200,
    min_size: int = 10,
    max_nodes: int = 300,
    class_cap: int = 3,
    rng: np.random.Generator | None = None,
) -> SencForest:
    """Train ``z`` trees, each on its own size-``psi`` subsample of ``data``.

    The training data is not retained by the returned forest.
    """
    if len(data) == 0:
        raise ValueError("cannot build a forest on an empty dataset")
    for name, value in (("z", z), ("psi", psi), ("min_size", min_size), ("max_nodes", max_nodes), ("class_cap", class_cap)):
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")
    rng = rng if rng is not None else np.random.default_rng()
    trees = [build_tree(subsample(data, psi, child), min_size, max_nodes, child) for child in spawn(rng, z)]
    return SencForest(trees, psi, data.classes(), class_cap)

