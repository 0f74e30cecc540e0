import numpy as np
import pytest

from mvml.kernels import KernelConfig, gram, mean_distance_sigma
from mvml.multiview import GramStack


def random_psd(rng, n, rank=None):
    B = rng.normal(size=(n, rank or n))
    return B @ B.T


def random_pd(rng, n, floor=0.5):
    return random_psd(rng, n) + floor * np.eye(n)


def random_views(rng, n, dims=(3, 2)):
    return [rng.normal(size=(n, d)) for d in dims]


def gaussian_stack(views):
    return GramStack(tuple(gram(KernelConfig("gaussian", mean_distance_sigma(X)), X) for X in views))


def trace_is_monotone(trace, slack=1e-10):
    return bool(np.all(np.diff(np.asarray(trace)) <= slack))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
