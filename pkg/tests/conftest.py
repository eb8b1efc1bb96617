import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ftb import JetPoint, get_metric, to_indicatrix
from ftb.cli import sample_points

settings.register_profile(
    "ftb", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("ftb")

METRIC_NAMES = ["euclidean", "riemannian2d", "randers_const", "randers_var"]


def metric(name, **params):
    return get_metric(name, **params)


def points(n=2, count=10, seed=0):
    return sample_points(n, count, seed)


def indicatrix_points(F, count=10, seed=0):
    return [to_indicatrix(F, p) for p in sample_points(F.n, count, seed)]


@pytest.fixture(params=METRIC_NAMES)
def any_metric(request):
    return get_metric(request.param)


@pytest.fixture
def euclid():
    return get_metric("euclidean")


@pytest.fixture
def riem():
    return get_metric("riemannian2d")


@pytest.fixture
def rconst():
    return get_metric("randers_const")


@pytest.fixture
def rvar():
    return get_metric("randers_var")


def P(x, y):
    return JetPoint(tuple(x), tuple(y))


def close(a, b, tol):
    return float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float)))) < tol


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
