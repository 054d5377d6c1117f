"""End-to-end trials: data, training, streaming and evaluation from one config."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import Dataset, read_csv_dataset
from .evalsim import (
    SCENARIOS,
    StreamScenario,
    build_scenario_stream,
    detection_phases,
    en_accuracy,
    f_measure,
    generate_grid,
    generate_synthetic,
    mean_and_2se,
    windowed_en_accuracy,
)
from .manager import ForestManager, ForestParams
from .stream import PredictionRecord, StreamEngine

logger = logging.getLogger(__name__)

CONFIG_SCHEMA = "sencforest-run/1"


@dataclass
class RunConfig:
    """Everything needed to reproduce a simulation.

    ``q`` is a percentage (0-100) of buffered instances whose labels are
    revealed before each update. ``scenario`` is either ``{"name": ...,
    **kwargs}`` naming a built-in scenario or a full scenario mapping.
    ``data`` selects the data source: ``synthetic``, ``grid`` or ``csv``.
    """

    z: int = 100
    psi: int = 200
    min_size: int = 10
    max_nodes: int = 300
    class_cap: int = 3
    max_forests: int = 3
    retire_window: int = 1000
    q: float = 0.0
    trials: int = 10
    seed: int = 0
    window: int = 100
    scenario: dict[str, Any] = field(
        default_factory=lambda: {"name": "two_period", "train_per_class": 1000, "sizes": [2000, 3000], "buffer_size": 500}
    )
    data: dict[str, Any] = field(default_factory=lambda: {"kind": "synthetic", "n": 20000, "separation": 5.0})

    def __post_init__(self) -> None:
        if not 0.0 <= self.q <= 100.0:
            raise ValueError(f"q must lie in [0, 100], got {self.q}")
        if self.trials < 1 or self.window < 1:
            raise ValueError("trials and window must be >= 1")
        self.forest_params()

    def forest_params(self) -> ForestParams:
        return ForestParams(self.z, self.psi, self.min_size, self.max_nodes, self.class_cap, self.max_forests, self.retire_window)

    def build_scenario(self) -> StreamScenario:
        spec = dict(self.scenario)
        name = spec.pop("name", None)
        if name is None:
            return StreamScenario.from_dict(spec)
        if name not in SCENARIOS:
            raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
        if "sizes" in spec:
            spec["sizes"] = tuple(spec["sizes"])
        return SCENARIOS[name](**spec)

    def load_data(self, rng: np.random.Generator) -> Dataset:
        spec = dict(self.data)
        kind = spec.pop("kind", "synthetic")
        if kind == "synthetic":
            return generate_synthetic(spec.get("n", 20000), spec.get("separation", 5.0), rng)
        if kind == "grid":
            return generate_grid(spec["n_per_class"], spec["n_classes"], spec.get("separation", 5.0), spec.get("dimension", 2), rng)
        if kind == "csv":
            data, _ = read_csv_dataset(spec["path"], header=spec.get("header", False))
            return data
        raise ValueError(f"unknown data kind {kind!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"schema": CONFIG_SCHEMA, **asdict(self)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        data = dict(data)
        schema = data.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ValueError(f"unsupported config schema {schema!r}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class TrialResult:
    trial: int
    records: list[PredictionRecord]
    summary: dict[str, Any]
    windows: list[dict[str, Any]]


def summarize(
    records: list[PredictionRecord],
    boundaries: list[int],
    new_periods: list[bool],
    window: int,
) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    """Overall EN accuracy, per-phase F-measure and the per-window series."""
    overall = en_accuracy(records)
    phases = []
    for start, stop in detection_phases(records, boundaries, new_periods):
        m = f_measure(records[start:stop])
        phases.append({"start": start, "stop": stop, "precision": m.precision, "recall": m.recall, "f_measure": m.f_measure})
    windows = [asdict(w) for w in windowed_en_accuracy(records, window)]
    summary = {
        "n_instances": len(records),
        "en_accuracy": overall.en_accuracy,
        "a_new": overall.a_new,
        "a_old": overall.a_old,
        "phases": phases,
        "mean_f_measure": float(np.mean([p["f_measure"] for p in phases])) if phases else None,
        "updates": [r.index for r in records if r.model_updated],
        "forests_at_period_start": [records[b].n_forests for b in boundaries if b < len(records)],
    }
    return summary, windows


def run_trial(config: RunConfig, trial: int) -> TrialResult:
    """One seeded trial: slice data, train, stream and score."""
    seq = np.random.SeedSequence([config.seed, trial])
    data_rng, scenario_rng, model_rng, engine_rng = (np.random.default_rng(s) for s in seq.spawn(4))
    scenario = config.build_scenario()
    data = config.load_data(data_rng)
    stream = build_scenario_stream(scenario, data, scenario_rng)
    manager = ForestManager.train(stream.train, config.forest_params(), model_rng)
    engine = StreamEngine(manager, scenario.buffer_size, config.q / 100.0, engine_rng, stream.labels, audit=True)
    records = []
    forest_trace = []
    for record in engine.run(stream):
        records.append(record)
        if record.model_updated:
            forest_trace.append(len(manager.slots))
    summary, windows = summarize(records, stream.boundaries, stream.new_periods, config.window)
    summary["trial"] = trial
    summary["forests_after_update"] = forest_trace
    summary["events"] = [asdict(e) for e in manager.events]
    summary["max_forests_seen"] = max(max(r.n_forests for r in records), len(manager.slots)) if records else len(manager.slots)
    summary["max_buffer"] = engine.max_retained
    for w in windows:
        w["trial"] = trial
    return TrialResult(trial, records, summary, windows)


def aggregate(results: list[TrialResult]) -> dict[str, Any]:
    acc_mean, acc_2se = mean_and_2se([r.summary["en_accuracy"] for r in results])
    fs = [r.summary["mean_f_measure"] for r in results if r.summary["mean_f_measure"] is not None]
    f_mean, f_2se = mean_and_2se(fs)
    n_phases = max((len(r.summary["phases"]) for r in results), default=0)
    per_phase = []
    for k in range(n_phases):
        vals = [r.summary["phases"][k]["f_measure"] for r in results if len(r.summary["phases"]) > k]
        m, se = mean_and_2se(vals)
        per_phase.append({"phase": k, "f_measure_mean": m, "f_measure_2se": se, "n": len(vals)})
    return {
        "trials": len(results),
        "en_accuracy_mean": acc_mean,
        "en_accuracy_2se": acc_2se,
        "f_measure_mean": f_mean if fs else None,
        "f_measure_2se": f_2se if fs else None,
        "per_phase_f_measure": per_phase,
    }


def simulate(config: RunConfig) -> tuple[list[TrialResult], dict[str, Any]]:
    results = []
    for t in range(config.trials):
        result = run_trial(config, t)
        logger.info("trial %d: EN_Accuracy=%.4f F=%s updates=%s", t, result.summary["en_accuracy"],
                    result.summary["mean_f_measure"], result.summary["updates"])
        results.append(result)
    return results, aggregate(results)


def write_records(path: str | Path, records: list[PredictionRecord]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_records(path: str | Path) -> list[PredictionRecord]:
    with open(path) as fh:
        return [PredictionRecord.from_json(line) for line in fh if line.strip()]


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_outputs(out_dir: str | Path, config: RunConfig, results: list[TrialResult], agg: dict[str, Any]) -> None:
    """Write config, per-trial records, per-window metrics and the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(_dump(config.to_dict()))
    for r in results:
        write_records(out / f"records_trial{r.trial:02d}.jsonl", r.records)
    windows = [w for r in results for w in r.windows]
    with open(out / "windows.jsonl", "w") as fh:
        for w in windows:
            fh.write(json.dumps(w, sort_keys=True) + "\n")
    with open(out / "windows.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "start", "end", "n", "a_new", "a_old", "en_accuracy"])
        for w in windows:
            writer.writerow([w["trial"], w["start"], w["end"], w["n"], w["a_new"], w["a_old"], repr(w["en_accuracy"])])
    summary = {"aggregate": agg, "trials": [r.summary for r in results]}
    (out / "summary.json").write_text(_dump(summary))
