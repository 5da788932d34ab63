import numpy as np
import pytest

from qitomo.design import build_design
from qitomo.models import published_gateset, target_gateset
from qitomo.simulate import exact_dataset, simulate_design


@pytest.fixture(scope="session")
def target():
    return target_gateset()


@pytest.fixture(scope="session")
def design(target):
    return build_design(list(target.gates), target=target)


@pytest.fixture(scope="session")
def published():
    return published_gateset()


@pytest.fixture(scope="session")
def exact_target_data(target, design):
    return exact_dataset(target, design)


@pytest.fixture(scope="session")
def published_data(published, design):
    return simulate_design(published, design, 1024, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, in order, when the suite ran
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
