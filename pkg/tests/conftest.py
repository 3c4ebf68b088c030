import sys

import numpy as np
import pytest

from rtomo.geometry import SceneGrid, WaveformConfig, make_cluster
from rtomo.operator import ClusterOperator

DEG = np.pi / 180


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_op():
    grid = SceneGrid(-1.0, 1.0, -0.8, 0.8, 8, 8)
    wf = WaveformConfig(5e9, 1e9, 4)
    return ClusterOperator(make_cluster(35 * DEG, 10 * DEG, 18 * DEG, 3, wf), grid)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    verdict = {True: "PASS", False: "FAIL", None: "SKIPPED"}
    for n, title in mod.CRITERIA.items():
        ok, detail = mod.RESULTS.get(n, (None, "not run"))
        terminalreporter.write_line(f"criterion {n} ({title}): {verdict[ok]} - {detail}")
