"""
Using a few true labels to clean the buffer
===========================================

Before each update, the true labels of Q% of the buffered candidates are
revealed. Candidates that turn out to belong to a known class are false
alarms and are dropped, so the new class is learned from cleaner data.
"""

import numpy as np

from sencforest import ForestManager, ForestParams, StreamEngine, en_accuracy, run_stream
from sencforest.evalsim import build_scenario_stream, generate_synthetic, two_period

# overlapping classes produce plenty of false alarms
separation = 3.5

for q in (0.0, 0.5, 1.0):
    accuracies = []
    for trial in range(5):
        rng = np.random.default_rng([11, trial])
        data = generate_synthetic(20000, separation, rng)
        stream = build_scenario_stream(two_period(), data, rng)
        manager = ForestManager.train(stream.train, ForestParams(), rng)
        engine = StreamEngine(manager, 250, q=q, rng=rng, labels=stream.labels)
        accuracies.append(en_accuracy(run_stream(engine, stream)).en_accuracy)
    print(f"Q = {q:4.0%}: mean EN_Accuracy {np.mean(accuracies):.3f} over {len(accuracies)} trials")
