import itertools

import numpy as np
import pytest

from qplace.qap import SubPermutation


def random_flow(rng, m, density=0.5, integer=True):
    upper = np.triu(rng.random((m, m)) < density, k=1)
    if integer:
        w = upper * rng.integers(1, 4, size=(m, m))
    else:
        w = upper * rng.random((m, m))
    return (w + w.T).astype(float)


def grid_distance(h, w):
    pts = [(r, c) for r in range(h) for c in range(w)]
    return np.array([[abs(a - c) + abs(b - d) for (c, d) in pts] for (a, b) in pts], dtype=float)


def random_perm(rng, m, n):
    return SubPermutation(rng.choice(n, size=m, replace=False), n)


def brute_force_qap(F, D):
    """Minimum cost over every injective assignment (independent of the library cost)."""
    m, n = F.shape[0], D.shape[0]
    best = None
    for assign in itertools.permutations(range(n), m):
        c = sum(F[i][j] * D[assign[i]][assign[j]] for i in range(m) for j in range(m))
        if best is None or c < best:
            best = c
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    lines = [test_acceptance.RESULTS[k] for k in sorted(test_acceptance.RESULTS)]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
