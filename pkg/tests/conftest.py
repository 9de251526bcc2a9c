import numpy as np
import pytest

from aztec2p.sampler import enumerate_tilings


@pytest.fixture(scope="session")
def enum4():
    return enumerate_tilings(4, 0.5)


@pytest.fixture(scope="session")
def enum4_uniform():
    return enumerate_tilings(4, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
