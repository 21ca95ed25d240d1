import math

import numpy as np
import pytest


def brute_joint(p, policy, model3):
    """p(s', s) by explicit triple loop; model3 indexed [s, a, s']."""
    n_s, n_a = policy.shape
    out = [[0.0] * n_s for _ in range(n_s)]
    for s in range(n_s):
        for a in range(n_a):
            for t in range(n_s):
                out[t][s] += p[s] * policy[s][a] * model3[s][a][t]
    return np.array(out)


def plain_entropy(values):
    return -sum(v * math.log2(v) for v in np.ravel(values) if v > 0)


def random_simplex(rng, shape, concentration=1.0):
    x = rng.gamma(concentration, size=shape) + 1e-3
    return x / x.sum(axis=-1, keepdims=True)


def random_components(rng, n_s=4, n_a=4, concentration=1.0):
    p = random_simplex(rng, (n_s,), concentration)
    policy = random_simplex(rng, (n_s, n_a), concentration)
    model = random_simplex(rng, (n_s * n_a, n_s), concentration)
    return p, policy, model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
