import re

import numpy as np
import pytest

from flexarm.dynamics import TwoLinkFixture, build_single_link, default_modal
from flexarm.fastctl import LqrWeights
from flexarm.sim import Reference, SimConfig, epsilon_sweep, run
from flexarm.slowctl import SlidingConfig

Q_DIAG = (150.0, 500.0, 1.0, 0.0)
R_WEIGHT = 2.0


@pytest.fixture(scope="session")
def plant():
    return build_single_link(viscous=0.004, coulomb=0.002)


@pytest.fixture(scope="session")
def weights():
    return LqrWeights.diagonal(Q_DIAG, R_WEIGHT)


@pytest.fixture(scope="session")
def sliding():
    return SlidingConfig(lam=10.0, beta=1.3)


@pytest.fixture(scope="session")
def default_runs(plant, weights, sliding):
    """16 s composite and slow-only runs on the default scenario, with wall times."""
    import time

    out = {}
    for c in ("composite", "slow-only"):
        t0 = time.perf_counter()
        tr = run(plant, Reference(), sliding, SimConfig(), c, weights)
        out[c] = (tr, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def sweep_rows(plant, weights, sliding):
    return epsilon_sweep(plant, [1, 4, 16, 64], Reference(), sliding, weights, SimConfig(horizon=4.0))


@pytest.fixture(scope="session")
def fixture_plant():
    return TwoLinkFixture(gravity=(0.5, 0.2))


# ---------------------------------------------------------------------------
# one summary line per acceptance criterion
# ---------------------------------------------------------------------------

_criteria = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or report.failed:
        _criteria[key] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), status in sorted(_criteria.items()):
        terminalreporter.write_line(f"criterion {num:2d} {name:32s} {status}")
