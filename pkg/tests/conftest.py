import itertools
import math
import sys
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def enumerate_pmf(n, p1, p2, p11):
    """Joint pmf of (x, y) by brute force over all 4**n individual outcome sequences."""
    # cell order: (1,1), (1,0), (0,1), (0,0)
    probs = (p11, p1 - p11, p2 - p11, 1.0 - p1 - p2 + p11)
    dx = (1, 1, 0, 0)
    dy = (1, 0, 1, 0)
    table = defaultdict(float)
    for seq in itertools.product(range(4), repeat=n):
        pr = 1.0
        for c in seq:
            pr *= probs[c]
        table[(sum(dx[c] for c in seq), sum(dy[c] for c in seq))] += pr
    return table


def random_interior_triple(rng):
    while True:
        p1, p2 = rng.uniform(0.05, 0.95, size=2)
        lo, hi = max(0.0, p1 + p2 - 1.0), min(p1, p2)
        p11 = rng.uniform(lo, hi)
        cells = (p11, p1 - p11, p2 - p11, 1 - p1 - p2 + p11)
        if min(cells) > 1e-3:
            return float(p1), float(p2), float(p11)


def binom_pmf(k, n, p):
    return math.comb(n, k) * p**k * (1 - p) ** (n - k)


@pytest.fixture(scope="session")
def real_data():
    from margjoint.io import load_real_data

    return load_real_data().data


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _profile(data, p):
    from margjoint.binary_core import JointBinaryParams, log_likelihood

    return lambda t: log_likelihood(data, JointBinaryParams(p.p1, p.p2, t))


def fd_first(data, p):
    """Richardson-extrapolated central difference of the log-likelihood in p11."""
    f = _profile(data, p)
    h = 1e-3 * min(p.cells)

    def d(step):
        return (f(p.p11 + step) - f(p.p11 - step)) / (2 * step)

    return (4 * d(h / 2) - d(h)) / 3


def fd_second(data, p):
    """Richardson-extrapolated second central difference in p11."""
    f = _profile(data, p)
    h = 2e-2 * min(p.cells)
    f0 = f(p.p11)

    def d(step):
        return (f(p.p11 + step) - 2 * f0 + f(p.p11 - step)) / step**2

    return (4 * d(h / 2) - d(h)) / 3


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
