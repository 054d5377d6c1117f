"""A single completely random tree with class frequencies and anomaly balls.

Nodes live in flat per-attribute lists indexed by node id. Leaves carry the
build-set size, per-class counts, the centroid of the build set and the
radius of the smallest centroid-centred ball covering it. A per-tree path
length threshold splits leaves into anomaly regions (shallow) and normal
regions (deep); instances that reach an anomaly leaf but fall outside its
ball are voted as an emerging class.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from .core import NEW_CLASS, Dataset, as_instance

#: Threshold value meaning "this tree has no anomaly regions".
NO_ANOMALY = -math.inf

# Two standard-deviation gaps closer than this are treated as tied.
_TIE_TOL = 1e-9


def threshold_from_path_lengths(path_lengths) -> float:
    """Path-length cut minimising the gap between the two sides' std devs.

    The sorted lengths are split at every boundary between two distinct
    values; each split is scored by ``|std(left) - std(right)|`` (population
    std, so a singleton side has std 0). The cut is placed halfway across the
    winning boundary, earliest boundary on ties. With fewer than two distinct
    lengths there is nothing to separate and ``NO_ANOMALY`` is returned.
    """
    L = np.sort(np.asarray(path_lengths, dtype=float))
    n = L.size
    if n < 2 or L[0] == L[-1]:
        return NO_ANOMALY
    # boundary k sits between L[k-1] and L[k]; left side has k items
    k = np.nonzero(L[1:] > L[:-1])[0] + 1
    s1 = np.cumsum(L)
    s2 = np.cumsum(L * L)
    nl = k.astype(float)
    nr = n - nl
    sl1, sl2 = s1[k - 1], s2[k - 1]
    sr1, sr2 = s1[-1] - sl1, s2[-1] - sl2
    var_l = np.maximum(sl2 / nl - (sl1 / nl) ** 2, 0.0)
    var_r = np.maximum(sr2 / nr - (sr1 / nr) ** 2, 0.0)
    gap = np.abs(np.sqrt(var_l) - np.sqrt(var_r))
    best = int(np.nonzero(gap <= gap.min() + _TIE_TOL)[0][0])
    b = k[best]
    return float((L[b - 1] + L[b]) / 2.0)


class SencTree:
    """Node arena plus the per-tree path length threshold ``tau_hat``.

    Internal nodes have ``feature[i] >= 0``; leaves have ``feature[i] == -1``
    and carry ``size``, ``class_freq``, ``center`` and ``radius``. The
    ``depth`` of a node is its number of edges from the root.
    """

    def __init__(self, dimension: int, min_size: int, max_nodes: int) -> None:
        if dimension < 1 or min_size < 1 or max_nodes < 1:
            raise ValueError("dimension, min_size and max_nodes must be >= 1")
        self.dimension = dimension
        self.min_size = min_size
        self.max_nodes = max_nodes
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.depth: list[int] = []
        self.size: list[int] = []
        self.class_freq: list[dict[int, int] | None] = []
        self.center: list[np.ndarray | None] = []
        self.radius: list[float] = []
        self.tau_hat: float = NO_ANOMALY

    # -- structure -----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def leaves(self) -> list[int]:
        return [i for i, f in enumerate(self.feature) if f < 0]

    def leaf_path_lengths(self) -> list[int]:
        return [self.depth[i] for i in self.leaves()]

    def is_anomaly_leaf(self, leaf: int) -> bool:
        return self.depth[leaf] < self.tau_hat

    def leaf_label(self, leaf: int) -> int:
        """Majority class of a leaf, smallest id on ties."""
        freq = self.class_freq[leaf]
        best = max(freq.values())
        return min(c for c, v in freq.items() if v == best)

    def _new_node(self, depth: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.depth.append(depth)
        self.size.append(0)
        self.class_freq.append(None)
        self.center.append(None)
        self.radius.append(0.0)
        return len(self.feature) - 1

    def _make_leaf(self, node: int, X: np.ndarray, y: np.ndarray) -> None:
        labels, counts = np.unique(y, return_counts=True)
        center = X.mean(axis=0)
        diff = X - center
        self.feature[node] = -1
        self.left[node] = self.right[node] = -1
        self.size[node] = int(X.shape[0])
        self.class_freq[node] = {int(c): int(v) for c, v in zip(labels, counts)}
        self.center[node] = center
        self.radius[node] = float(np.sqrt(np.einsum("ij,ij->i", diff, diff).max()))

    def _grow(self, node: int, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> None:
        """Build a completely random subtree over ``(X, y)`` rooted at ``node``."""
        stack = [(node, X, y)]
        while stack:
            i, Xi, yi = stack.pop()
            if Xi.shape[0] < self.min_size or self.n_nodes + 2 > self.max_nodes:
                self._make_leaf(i, Xi, yi)
                continue
            lo = Xi.min(axis=0)
            hi = Xi.max(axis=0)
            splittable = np.nonzero(lo < hi)[0]
            if splittable.size == 0:
                self._make_leaf(i, Xi, yi)
                continue
            q = int(splittable[rng.integers(splittable.size)])
            p = float(rng.uniform(lo[q], hi[q]))
            if not lo[q] < p < hi[q]:
                p = float((lo[q] + hi[q]) / 2.0)
            go_left = Xi[:, q] <= p
            left = self._new_node(self.depth[i] + 1)
            right = self._new_node(self.depth[i] + 1)
            self.feature[i] = q
            self.threshold[i] = p
            self.left[i] = left
            self.right[i] = right
            self.size[i] = 0
            self.class_freq[i] = None
            self.center[i] = None
            self.radius[i] = 0.0
            stack.append((right, Xi[~go_left], yi[~go_left]))
            stack.append((left, Xi[go_left], yi[go_left]))

    # -- queries -------------------------------------------------------------

    def route(self, x) -> tuple[int, int]:
        """Descend to a leaf (``x[q] <= p`` goes left); return ``(leaf, depth)``."""
        x = as_instance(x, self.dimension)
        feature, threshold, left, right = self.feature, self.threshold, self.left, self.right
        node = 0
        while feature[node] >= 0:
            node = left[node] if x[feature[node]] <= threshold[node] else right[node]
        return node, self.depth[node]

    def compute_threshold(self) -> float:
        return threshold_from_path_lengths(self.leaf_path_lengths())

    def vote(self, x) -> int:
        """Class id voted for ``x``, or ``NEW_CLASS`` for an outlying anomaly."""
        x = as_instance(x, self.dimension)
        leaf, depth = self.route(x)
        if depth < self.tau_hat:
            diff = x - self.center[leaf]
            if math.sqrt(float(np.dot(diff, diff))) > self.radius[leaf]:
                return NEW_CLASS
        return self.leaf_label(leaf)

    def pseudo_instances(self, leaf: int) -> Dataset:
        """Copies of the leaf centre, one per recorded training instance."""
        if not self.is_leaf(leaf):
            raise ValueError(f"node {leaf} is not a leaf")
        freq = self.class_freq[leaf]
        y = np.repeat(np.array(list(freq), dtype=np.int64), list(freq.values()))
        X = np.tile(self.center[leaf], (y.size, 1))
        return Dataset(X, y)

    # -- update --------------------------------------------------------------

    def grow_leaf(self, leaf: int, new: Dataset, rng: np.random.Generator) -> None:
        """Replace ``leaf`` by a subtree built on its pseudo instances plus ``new``.

        The caller guarantees every instance of ``new`` routes to ``leaf``.
        When the node budget is spent the leaf stays a leaf whose statistics
        cover the combined set.
        """
        if not self.is_leaf(leaf):
            raise ValueError(f"node {leaf} is not a leaf")
        if len(new) == 0:
            raise ValueError("grow_leaf needs at least one new instance")
        if new.dimension != self.dimension:
            raise ValueError(f"dimension mismatch: expected {self.dimension}, got {new.dimension}")
        pseudo = self.pseudo_instances(leaf)
        X = np.vstack([pseudo.X, new.X])
        y = np.concatenate([pseudo.y, new.y])
        self._grow(leaf, X, y, rng)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                nodes.append([i, self.depth[i], self.feature[i], self.threshold[i], self.left[i], self.right[i]])
            else:
                freq = sorted(self.class_freq[i].items())
                nodes.append([i, self.depth[i], self.size[i], freq, self.center[i].tolist(), self.radius[i]])
        return {
            "dimension": self.dimension,
            "min_size": self.min_size,
            "max_nodes": self.max_nodes,
            "tau_hat": None if self.tau_hat == NO_ANOMALY else self.tau_hat,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SencTree:
        tree = cls(data["dimension"], data["min_size"], data["max_nodes"])
        for entry in data["nodes"]:
            i = tree._new_node(entry[1])
            if i != entry[0]:
                raise ValueError("node ids must be contiguous and ordered")
            if isinstance(entry[3], list):
                tree.size[i] = int(entry[2])
                tree.class_freq[i] = {int(c): int(v) for c, v in entry[3]}
                tree.center[i] = np.array(entry[4], dtype=float)
                tree.radius[i] = float(entry[5])
            else:
                tree.feature[i] = int(entry[2])
                tree.threshold[i] = float(entry[3])
                tree.left[i] = int(entry[4])
                tree.right[i] = int(entry[5])
        tau = data["tau_hat"]
        tree.tau_hat = NO_ANOMALY if tau is None else float(tau)
        return tree


def build_tree(data: Dataset, min_size: int, max_nodes: int, rng: np.random.Generator) -> SencTree:
    """Grow a completely random tree on ``data`` and set its threshold.

    A node becomes a leaf when it holds fewer than ``min_size`` instances,
    when no attribute takes two distinct values in it, or when splitting
    would push the node count past ``max_nodes``.
    """
    if len(data) == 0:
        raise ValueError("cannot build a tree on an empty dataset")
    tree = SencTree(data.dimension, min_size, max_nodes)
    root = tree._new_node(0)
    tree._grow(root, data.X, data.y, rng)
    tree.tau_hat = tree.compute_threshold()
    return tree
