"""
Detecting and absorbing emerging classes in a two-period stream
===============================================================

Train on two Gaussian classes, then stream a mixture in which a third
class appears, followed by a fourth. The model flags the newcomers,
collects them in a buffer and grows its trees to learn them.
"""

import numpy as np

from sencforest import ForestManager, ForestParams, StreamEngine, en_accuracy, f_measure, run_stream
from sencforest.evalsim import build_scenario_stream, generate_synthetic, two_period

rng = np.random.default_rng(2024)

# four unit-variance Gaussians on the corners of a 5x5 square
data = generate_synthetic(20000, separation=5.0, rng=rng)

# 500 training instances for each of two classes; then 1000 instances over
# three classes and 1500 over four, with a buffer of 250 candidates
scenario = two_period()
stream = build_scenario_stream(scenario, data, rng)
print(f"training set: {len(stream.train)} instances, stream: {len(stream)} instances")

manager = ForestManager.train(stream.train, ForestParams(), rng)
print(f"initial forest knows classes {manager.known_classes}")

# true labels go along for scoring only; the model never sees them
engine = StreamEngine(manager, scenario.buffer_size, rng=rng, labels=stream.labels)
records = run_stream(engine, stream)

for index in engine.updates:
    print(f"model update triggered by instance {index}")
print(f"known classes at the end: {manager.known_classes}")

# the first period, up to its update, is where detection is measured
first = records[: engine.updates[0] + 1]
m = f_measure(first)
print(f"detection in the first period: precision {m.precision:.3f}, recall {m.recall:.3f}, F {m.f_measure:.3f}")
print(f"EN_Accuracy over the whole stream: {en_accuracy(records).en_accuracy:.3f}")
