import numpy as np
import pytest

from setconv.layer import init_params


def random_instance(rng, d_max=8, d_out_max=4, hidden_max=8, n_max=6, scale=1.0):
    """Random (X, params, anchor) with small dimensions and non-trivial biases."""
    d = int(rng.integers(1, d_max + 1))
    d_out = int(rng.integers(1, d_out_max + 1))
    hidden = int(rng.integers(1, hidden_max + 1))
    n = int(rng.integers(1, n_max + 1))
    params = init_params(d, d_out, hidden, rng)
    params.b1 = rng.normal(0, 0.3, hidden)
    params.b2 = rng.normal(0, 0.3, d_out)
    params.w = rng.normal(0, 1.0, (d, d_out))
    x = rng.normal(0, scale, (n, d))
    anchor = rng.normal(0, scale, d)
    return x, params, anchor


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
