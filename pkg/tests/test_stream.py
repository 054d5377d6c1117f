import numpy as np
import pytest

from sencforest.core import NEW_CLASS, LabelIndex
from sencforest.evalsim import build_scenario_stream, generate_synthetic, two_period
from sencforest.manager import ForestManager, ForestParams
from sencforest.stream import PredictionRecord, StreamEngine, StreamError, inject_labels, run_stream

from conftest import blobs

SMALL = ForestParams(z=20, psi=100, min_size=5, max_nodes=100)


def _engine(buffer_size=20, q=0.0, seed=0, labels=True):
    r = np.random.default_rng(seed)
    data = blobs(r, 200)
    mgr = ForestManager.train(data, SMALL, r)
    return StreamEngine(mgr, buffer_size, q, np.random.default_rng(seed + 1), LabelIndex([1, 2]) if labels else None)


def test_known_prediction_leaves_buffer_alone():
    engine = _engine()
    rec = engine.process_instance([0.0, 0.0], 1)
    assert rec.predicted == 1 and rec.expected == 1 and not rec.emerging
    assert engine.buffer == [] and engine.updates == []


def test_flush_exactly_at_capacity():
    engine = _engine(buffer_size=20)
    far = np.random.default_rng(3).normal(size=(20, 2)) * 0.3 + [3.0, 15.0]
    records = [engine.process_instance(x, 3) for x in far]
    assert all(r.predicted == NEW_CLASS for r in records)
    assert [r.model_updated for r in records] == [False] * 19 + [True]
    assert engine.buffer == [] and engine.updates == [19]
    assert engine.class_counter == 3
    assert engine.max_retained == 20
    # the emerging class is known from now on
    after = engine.process_instance([3.0, 15.0], 3)
    assert after.expected == 3 and after.predicted == 3


def test_inject_labels_examples():
    r = np.random.default_rng(0)
    buf = [np.array([float(i), 0.0]) for i in range(250)]
    labels = [3] * 240 + [1] * 10
    is_known = lambda lab: lab in (1, 2)  # noqa: E731
    assert inject_labels(buf, labels, 0.0, is_known, r)[1] == labels
    assert inject_labels(buf, [3] * 250, 1.0, is_known, r)[1] == [3] * 250
    kept, kept_labels = inject_labels(buf, labels, 1.0, is_known, r)
    assert len(kept) == 240 and set(kept_labels) == {3}
    with pytest.raises(ValueError):
        inject_labels(buf, labels, 1.5, is_known, r)


def test_inject_labels_partial_reveals_floor():
    r = np.random.default_rng(1)
    buf = [np.zeros(2)] * 9
    kept, _ = inject_labels(buf, [1] * 9, 0.5, lambda lab: True, r)
    assert len(kept) == 9 - 4


def test_full_injection_equals_no_injection_when_all_new():
    far = np.random.default_rng(3).normal(size=(60, 2)) * 0.3 + [3.0, 15.0]
    runs = []
    for q in (0.0, 1.0):
        engine = _engine(buffer_size=20, q=q)
        records = run_stream(engine, [(x, 3) for x in far])
        runs.append(([r.to_json() for r in records], engine.manager.to_dict()))
    assert runs[0] == runs[1]


def test_empty_source():
    assert run_stream(_engine(), []) == []


def test_unlabelled_source():
    engine = _engine(labels=False)
    records = run_stream(engine, [np.zeros(2), np.ones(2)])
    assert [r.true_label for r in records] == [None, None]


def test_error_carries_index():
    engine = _engine()
    with pytest.raises(StreamError) as info:
        run_stream(engine, [np.zeros(2), np.zeros(3)])
    assert info.value.index == 1


def _scenario_run(seed, q=0.0):
    r = np.random.default_rng(seed)
    stream = build_scenario_stream(two_period(), generate_synthetic(20000, 5.0, r), r)
    mgr = ForestManager.train(stream.train, ForestParams(z=30), r)
    engine = StreamEngine(mgr, 250, q, r, stream.labels)
    return engine, run_stream(engine, stream)


@pytest.mark.slow
def test_two_period_stream():
    engine, records = _scenario_run(0)
    assert len(records) == 2500
    assert len(engine.updates) >= 2
    assert engine.max_retained <= 250
    assert [r.index for r in records] == list(range(2500))


@pytest.mark.slow
def test_replay_is_identical():
    a = [r.to_json() for r in _scenario_run(4)[1]]
    b = [r.to_json() for r in _scenario_run(4)[1]]
    assert a == b


def test_record_json_round_trip():
    rec = PredictionRecord(3, NEW_CLASS, True, 7, NEW_CLASS, True, 2, [NEW_CLASS, NEW_CLASS])
    assert PredictionRecord.from_json(rec.to_json()) == rec


def test_engine_validation():
    mgr = _engine().manager
    with pytest.raises(ValueError):
        StreamEngine(mgr, 0)
    with pytest.raises(ValueError):
        StreamEngine(mgr, 10, q=2.0)
