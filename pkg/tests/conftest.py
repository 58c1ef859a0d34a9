import time
from pathlib import Path

import numpy as np
import pytest

from grdsim.grd import GrdMatrix, build_grd, default_groups
from grdsim.trace import read_trace

DATA = Path(__file__).parent / "data"

_acceptance: dict[int, list] = {}
_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    num, title = marker.args
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    entry = _acceptance.setdefault(num, [title, status, 0.0])
    # several tests may share a criterion: report the worst outcome, total time
    if _RANK[status] > _RANK[entry[1]]:
        entry[1] = status
    entry[2] += rep.duration


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance, key=str):
        title, status, dur = _acceptance[num]
        terminalreporter.write_line(f"[{status}] criterion {num}: {title} ({dur:.2f}s)")


@pytest.fixture(scope="session")
def groups():
    return default_groups()


@pytest.fixture(scope="session")
def example_graph():
    return read_trace(DATA / "hupigon_example.scdep")


@pytest.fixture(scope="session")
def example_grd(example_graph, groups):
    return build_grd(example_graph, groups, "error")


@pytest.fixture
def timer():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start


def names(n):
    return tuple(f"G{i}" for i in range(n))


def grd(rows):
    """Small GrdMatrix from nested lists, with generic group names."""
    a = np.asarray(rows, dtype=np.int64)
    return GrdMatrix(a, names(a.shape[0]))


def random_weights(rng, n=30, density=None, high=20):
    if density is None:
        density = rng.uniform(0.01, 0.5)
    return rng.integers(1, high + 1, size=(n, n)) * (rng.random((n, n)) < density)
