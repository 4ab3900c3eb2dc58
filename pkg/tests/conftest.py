import math

import numpy as np
import pytest
from scipy import integrate

from harris.core import RngStream


@pytest.fixture
def rng():
    return RngStream(12345, 0)


def ex9_total_mass():
    """Nested quadrature of the ex9 density; the inner x2 integral is split at its 1/c scale."""

    def inner(x1):
        c = math.exp(2 * x1)
        s = 0.0
        for a, b in ((0.0, 1 / c), (1 / c, 40 / c), (40 / c, np.inf)):
            s += integrate.quad(lambda x2: math.exp(-x2 * c), a, b)[0]
        return 2 * s * (math.e / 2) * math.exp(x1)

    return integrate.quad(inner, 1, 60, limit=200)[0]


def batch_means_se(x, n_batches=50):
    x = np.asarray(x)
    b = len(x) // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return means.std(ddof=1) / math.sqrt(n_batches)


# one pass/fail line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
