"""Emerging new class detection and classification in data streams with
completely random trees."""

from .core import NEW_CLASS, Dataset, LabelIndex, distance, make_rng, subsample
from .evalsim import en_accuracy, f_measure, generate_synthetic
from .forest import ForestPrediction, SencForest, build_forest
from .manager import ForestManager, ForestParams
from .stream import PredictionRecord, StreamEngine, run_stream
from .tree import NO_ANOMALY, SencTree, build_tree

__version__ = "0.1.0"

__all__ = [
    "NEW_CLASS",
    "NO_ANOMALY",
    "Dataset",
    "ForestManager",
    "ForestParams",
    "ForestPrediction",
    "LabelIndex",
    "PredictionRecord",
    "SencForest",
    "SencTree",
    "StreamEngine",
    "build_forest",
    "build_tree",
    "distance",
    "en_accuracy",
    "f_measure",
    "generate_synthetic",
    "make_rng",
    "run_stream",
    "subsample",
]
