"""Versioned JSON container for a trained model and its label names."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .core import LabelIndex
from .manager import ForestManager

MODEL_FORMAT = "sencforest-model/1"


def dump_model(manager: ForestManager, labels: LabelIndex) -> str:
    blob = {"format": MODEL_FORMAT, "labels": list(labels.names), "manager": manager.to_dict()}
    return json.dumps(blob, separators=(",", ":"), sort_keys=True)


def load_model_text(text: str) -> tuple[ForestManager, LabelIndex]:
    blob = json.loads(text)
    if blob.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {blob.get('format')!r}")
    return ForestManager.from_dict(blob["manager"]), LabelIndex(list(blob["labels"]))


def save_model(path: str | Path, manager: ForestManager, labels: LabelIndex) -> None:
    Path(path).write_text(dump_model(manager, labels))


def load_model(path: str | Path) -> tuple[ForestManager, LabelIndex]:
    return load_model_text(Path(path).read_text())


def model_summary(manager: ForestManager) -> dict[str, Any]:
    """Tree counts, leaf counts, anomaly-leaf counts and threshold spread per forest."""
    forests = []
    for uid, forest in zip(manager.forest_ids, manager.forests):
        leaves = [len(t.leaves()) for t in forest.trees]
        anomalous = [sum(t.is_anomaly_leaf(i) for i in t.leaves()) for t in forest.trees]
        taus = np.array([t.tau_hat for t in forest.trees])
        finite = taus[np.isfinite(taus)]
        forests.append({
            "id": uid,
            "trees": forest.z,
            "known_classes": forest.known_classes,
            "growing": forest.growing,
            "avg_leaves": float(np.mean(leaves)),
            "avg_anomaly_leaves": float(np.mean(anomalous)),
            "trees_without_anomaly_regions": int(taus.size - finite.size),
            "tau_hat": {
                "mean": float(finite.mean()) if finite.size else None,
                "min": float(finite.min()) if finite.size else None,
                "max": float(finite.max()) if finite.size else None,
            },
        })
    return {"n_forests": len(forests), "class_counter": manager.class_counter, "forests": forests}
