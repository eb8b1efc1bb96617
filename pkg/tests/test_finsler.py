import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftb import DegenerateMetricError, DomainError, FinslerFunction, fundamental_tensor, get_metric, list_metrics, to_indicatrix
from ftb import jet
from ftb.finsler import cartan_lowered, cholesky_pivots, homogeneity_report, randers_closed_form_g

from conftest import METRIC_NAMES, P, points


def test_registry():
    assert list_metrics() == sorted(METRIC_NAMES)
    with pytest.raises(KeyError, match="unknown metric"):
        get_metric("nope")


def test_euclidean_identity():
    ft = fundamental_tensor(get_metric("euclidean"), P([0.4, -0.2], [0.3, 1.7]))
    assert np.allclose(ft.g, np.eye(2), atol=1e-14)


def test_randers_example():
    ft = fundamental_tensor(get_metric("randers_const"), P([0, 0], [1, 0]))
    assert np.allclose(ft.g, [[1.21, 0], [0, 1.1]], atol=1e-12)


@pytest.mark.parametrize("b", [(0.1, 0.0), (0.3, -0.4), (-0.2, 0.5)])
def test_randers_matches_closed_form(b):
    F = get_metric("randers_const", b=b)
    for p in points(count=10, seed=3):
        assert np.allclose(fundamental_tensor(F, p).g, randers_closed_form_g(p.y, b), atol=1e-12)


def test_randers_rejects_large_drift():
    with pytest.raises(ValueError):
        get_metric("randers_const", b=(0.8, 0.8))


def test_metric_invariants(any_metric):
    F = any_metric
    for p in points(count=100, seed=5):
        ft = fundamental_tensor(F, p)
        g = ft.g
        assert np.max(np.abs(g - g.T)) < 1e-12
        assert np.all(np.linalg.eigvalsh(g) > 0)
        y = np.array(p.y)
        assert abs(y @ g @ y - F.value(p) ** 2) < 1e-10 * max(1.0, F.value(p) ** 2)
        assert np.allclose(g @ ft.g_inv, np.eye(2), atol=1e-10)
        g3 = cartan_lowered(F, p).g3
        for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
            assert np.max(np.abs(g3 - g3.transpose(perm))) < 1e-10
        assert np.max(np.abs(g3 @ y)) < 1e-10


@pytest.mark.parametrize("name", ["euclidean", "riemannian2d"])
def test_cartan_vanishes_for_quadratic(name):
    F = get_metric(name)
    for p in points(count=20, seed=1):
        assert np.max(np.abs(cartan_lowered(F, p).g3)) < 1e-10


def test_cartan_nonzero_for_randers(rconst):
    assert np.max(np.abs(cartan_lowered(rconst, P([0, 0], [1, 0.5])).g3)) > 1e-3


def test_homogeneity_clean(any_metric):
    for p in points(count=5, seed=2):
        rep = homogeneity_report(any_metric, p)
        assert not rep["flagged"]
        assert max(rep["defects"].values()) < 1e-10


def test_homogeneity_flags_quadratic_norm():
    bad = FinslerFunction("squared", 2, lambda x, y: y[0] * y[0] + y[1] * y[1])
    rep = homogeneity_report(bad, P([0, 0], [1.0, 0.5]))
    assert rep["flagged"]
    assert rep["defects"]["F"] > 0.1


def test_degenerate_metric_detected():
    bad = FinslerFunction("indefinite", 2, lambda x, y: jet.sqrt(y[0] * y[0] - 0.5 * y[1] * y[1]))
    with pytest.raises(DegenerateMetricError):
        fundamental_tensor(bad, P([0, 0], [1.0, 0.2]))


def test_cholesky_pivots():
    piv = cholesky_pivots(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert np.allclose(piv, [4.0, 2.0])
    assert cholesky_pivots(np.array([[1.0, 2.0], [2.0, 1.0]]))[-1] == pytest.approx(-3.0)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 5))
def test_positive_homogeneity(x1, x2, y1, y2, lam):
    if abs(y1) + abs(y2) < 0.1:
        return
    for name in METRIC_NAMES:
        F = get_metric(name)
        p, q = P([x1, x2], [y1, y2]), P([x1, x2], [lam * y1, lam * y2])
        assert F.value(q) == pytest.approx(lam * F.value(p), rel=1e-12)
        assert np.allclose(fundamental_tensor(F, q).g, fundamental_tensor(F, p).g, rtol=1e-9, atol=1e-12)


def test_to_indicatrix(any_metric):
    for p in points(count=20, seed=9):
        q = to_indicatrix(any_metric, p)
        assert abs(any_metric.value(q) - 1.0) < 1e-12
        ratio = np.array(q.y) / np.array(p.y)
        assert np.ptp(ratio) < 1e-12 and ratio[0] > 0


def test_to_indicatrix_failure():
    bad = FinslerFunction("negative", 2, lambda x, y: -jet.sqrt(y[0] * y[0] + y[1] * y[1]))
    with pytest.raises(DomainError):
        to_indicatrix(bad, P([0, 0], [1.0, 0.0]))


def test_dimension_mismatch():
    F = get_metric("euclidean", n=3)
    with pytest.raises(DomainError):
        fundamental_tensor(F, P([0, 0], [1, 0]))
