import numpy as np
import pytest

from orey.kernels import CovarianceModel

BUILTINS = [
    CovarianceModel.fbm(0.3),
    CovarianceModel.fbm(0.7),
    CovarianceModel.sfbm(0.3),
    CovarianceModel.sfbm(0.7),
    CovarianceModel.bifbm(0.6, 0.5),
    CovarianceModel.bifbm(0.8, 0.9, horizon=2.5),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def within_se(estimate, target, se, k):
    return abs(estimate - target) <= k * se


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
