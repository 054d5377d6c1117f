from __future__ import annotations

import numpy as np
import pytest

from sencforest.core import Dataset


def blobs(rng, n_per_class=100, centers=((0.0, 0.0), (6.0, 0.0)), scale=1.0):
    centers = np.asarray(centers, dtype=float)
    X = np.vstack([rng.normal(scale=scale, size=(n_per_class, centers.shape[1])) + c for c in centers])
    y = np.repeat(np.arange(1, len(centers) + 1), n_per_class)
    return Dataset(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_blobs(rng):
    return blobs(rng, 500)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[str, str] = {}


def report(criterion: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE[criterion] = f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}"
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:].split()[0])):
        terminalreporter.write_line(ACCEPTANCE[key])
