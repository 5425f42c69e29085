import numpy as np
import pytest
from scipy import special


def gaussian_copula_sample(n, corr, seed):
    """Draws from a Gaussian copula with correlation matrix `corr`."""
    corr = np.atleast_2d(corr)
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(np.zeros(corr.shape[0]), corr, size=n)
    return special.ndtr(x)


def pair_sample(n, theta, seed):
    return gaussian_copula_sample(n, [[1.0, theta], [theta, 1.0]], seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


#: PASS/FAIL lines recorded by the acceptance suite, echoed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
