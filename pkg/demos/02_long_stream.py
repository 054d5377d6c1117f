"""
A long stream under a fixed memory budget
=========================================

Twelve periods, each bringing one new class. A forest absorbs at most
three classes; later classes go to freshly grown forests, and at most
three forests are kept, so idle or little-used forests are retired.
"""

import numpy as np

from sencforest import ForestManager, ForestParams, StreamEngine
from sencforest.evalsim import build_scenario_stream, generate_grid, long_stream

rng = np.random.default_rng(7)

# 14 Gaussian classes on a grid, enough for two initial classes plus twelve new ones
data = generate_grid(n_per_class=1600, n_classes=14, separation=5.0, dimension=2, rng=rng)
scenario = long_stream()
stream = build_scenario_stream(scenario, data, rng)

params = ForestParams(class_cap=3, max_forests=3)
manager = ForestManager.train(stream.train, params, rng)
engine = StreamEngine(manager, scenario.buffer_size, rng=rng, labels=stream.labels)

for record in engine.run(stream):
    if record.model_updated:
        period = record.index // 1000 + 1
        print(f"period {period:2d}: update at {record.index:5d}, "
              f"{len(manager.slots)} forests, known classes {manager.known_classes}")

# every spawn and retirement, in order
for event in manager.events:
    if event.kind != "update":
        rule = f" (rule {event.rule})" if event.rule else ""
        print(f"{event.kind:6s} forest {event.forest} at instance {event.at}{rule}")
