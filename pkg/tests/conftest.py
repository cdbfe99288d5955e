import numpy as np
import pytest

from vanillamc.problem import generate_ground_truth, sample_mask


@pytest.fixture
def small_problem():
    gt = generate_ground_truth(20, 15, 2, kappa=2.0, seed=3)
    return gt, sample_mask(20, 15, 0.5, seed=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
