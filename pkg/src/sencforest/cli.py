"""Command line: ``sencforest {train,stream,simulate,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import iter_csv_rows, read_csv_dataset
from .evalsim import detection_phases, en_accuracy, f_measure, windowed_en_accuracy
from .experiment import RunConfig, read_records, simulate, summarize, write_outputs, write_records
from .manager import ForestManager
from .model_io import load_model, model_summary, save_model
from .stream import StreamEngine

logger = logging.getLogger("sencforest")


def _config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "q_labels", None) is not None:
        overrides["q"] = args.q_labels
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "scenario", None):
        overrides["scenario"] = _scenario_arg(args.scenario)
    if overrides:
        config = RunConfig.from_dict({**config.to_dict(), **overrides})
    return config


def _scenario_arg(value: str) -> dict:
    path = Path(value)
    if path.exists():
        return json.loads(path.read_text())
    return {"name": value}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_train(args: argparse.Namespace) -> int:
    config = _config(args)
    data, labels = read_csv_dataset(args.dataset, header=args.header)
    rng = np.random.default_rng(config.seed)
    manager = ForestManager.train(data, config.forest_params(), rng)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, manager, labels)
    summary = model_summary(manager)
    summary["n_train"] = len(data)
    summary["labels"] = list(labels.names)
    text = _dump(summary)
    Path(str(out) + ".summary.json").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_stream(args: argparse.Namespace) -> int:
    config = _config(args)
    manager, labels = load_model(args.model)
    buffer_size = args.buffer_size if args.buffer_size is not None else 250
    engine = StreamEngine(manager, buffer_size, config.q / 100.0, np.random.default_rng(config.seed), labels)
    source = iter_csv_rows(args.stream, header=args.header, dimension=manager.dimension)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = list(engine.run(source))
    write_records(out / "records.jsonl", records)
    metrics: dict = {"n_instances": len(records), "updates": engine.updates, "n_forests": len(manager.slots)}
    if records and all(r.expected is not None for r in records):
        summary, windows = summarize(records, [0], [True], config.window)
        metrics.update(summary)
        metrics["windows"] = windows
    (out / "metrics.json").write_text(_dump(metrics))
    save_model(out / "model_final.json", manager, labels)
    sys.stdout.write(_dump({k: v for k, v in metrics.items() if k != "windows"}))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config(args)
    results, agg = simulate(config)
    write_outputs(args.out, config, results, agg)
    sys.stdout.write(_dump(agg))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    records = read_records(args.records)
    if not records or any(r.expected is None for r in records):
        raise ValueError("records carry no ground truth; nothing to report")
    boundaries = [int(b) for b in args.boundaries.split(",")] if args.boundaries else [0]
    overall = en_accuracy(records)
    phases = []
    for start, stop in detection_phases(records, boundaries):
        m = f_measure(records[start:stop])
        phases.append({"start": start, "stop": stop, "precision": m.precision, "recall": m.recall, "f_measure": m.f_measure})
    report = {
        "n_instances": len(records),
        "en_accuracy": overall.en_accuracy,
        "phases": phases,
        "updates": [r.index for r in records if r.model_updated],
        "windows": [w.__dict__ for w in windowed_en_accuracy(records, args.window)],
    }
    text = _dump(report)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sencforest", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="run config JSON (model parameters, scenario, seed)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a model on a labelled CSV")
    common(p)
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stream", help="run a trained model over a CSV stream")
    common(p)
    p.add_argument("model")
    p.add_argument("stream")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--header", action="store_true")
    p.add_argument("--buffer-size", type=int)
    p.add_argument("--q-labels", type=float, help="percent of buffered labels revealed (0-100)")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("simulate", help="generate data, train, stream and evaluate over trials")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scenario", help="built-in scenario name or scenario JSON file")
    p.add_argument("--trials", type=int)
    p.add_argument("--q-labels", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="recompute metrics from a records file")
    p.add_argument("records")
    p.add_argument("--boundaries", help="comma-separated period start indices")
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"sencforest: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
