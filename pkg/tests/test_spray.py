"""Spray quantities against a hand-written Christoffel/Riemann oracle.

For ``g(x) = diag(1, exp(2 x^1))`` the only nonzero Christoffel symbols are
``Gamma^1_22 = -exp(2 x^1)`` and ``Gamma^2_12 = Gamma^2_21 = 1``.
"""

import numpy as np
import pytest

from ftb import jet
from ftb.finsler import get_metric
from ftb.frame import bracket, frame_jets
from ftb.spray import berwald_coeffs, delta_derivative, hv_curvature, nonlinear_connection, spray_coeffs, spray_jets

from conftest import METRIC_NAMES, P, points


def christoffel(x):
    """``Gam[k, i, j] = Gamma^k_ij`` of diag(1, exp(2 x^1))."""
    e = np.exp(2 * x[0])
    Gam = np.zeros((2, 2, 2))
    Gam[0, 1, 1] = -e
    Gam[1, 0, 1] = Gam[1, 1, 0] = 1.0
    return Gam


def christoffel_dx(x):
    """``dGam[m, k, i, j] = d Gamma^k_ij / dx^m``."""
    d = np.zeros((2, 2, 2, 2))
    d[0, 0, 1, 1] = -2 * np.exp(2 * x[0])
    return d


def riemann(x):
    """``Rm[k, l, i, j] = d_i Gamma^k_jl - d_j Gamma^k_il + Gamma^k_im Gamma^m_jl - Gamma^k_jm Gamma^m_il``."""
    G, dG = christoffel(x), christoffel_dx(x)
    return (
        np.einsum("ikjl->klij", dG)
        - np.einsum("jkil->klij", dG)
        + np.einsum("kim,mjl->klij", G, G)
        - np.einsum("kjm,mil->klij", G, G)
    )


def test_christoffel_oracle_is_sane():
    # Gauss curvature of diag(1, e^{2x}) is -1: R_1212 = K det g
    x = np.array([0.3, 0.0])
    Rm = riemann(x)
    g = np.diag([1.0, np.exp(2 * x[0])])
    R_low = np.einsum("ka,alij->klij", g, Rm)
    assert R_low[0, 1, 0, 1] == pytest.approx(-np.linalg.det(g))


@pytest.mark.parametrize("seed", [0, 1])
def test_spray_against_christoffel(riem, seed):
    for p in [P([0, 0], [1, 1])] + points(count=10, seed=seed):
        x, y = np.array(p.x), np.array(p.y)
        Gam = christoffel(x)
        assert np.allclose(spray_coeffs(riem, p), 0.5 * np.einsum("kij,i,j->k", Gam, y, y), atol=1e-12)
        assert np.allclose(nonlinear_connection(riem, p), np.einsum("jik,k->ij", Gam, y), atol=1e-12)
        assert np.allclose(berwald_coeffs(riem, p), np.einsum("kij->ijk", Gam), atol=1e-12)


def test_hv_curvature_against_riemann(riem):
    # [delta_i, delta_j] = R_ij^k d/dy^k gives R_ij^k = -R^k_lij y^l in this convention
    for p in [P([0, 0], [1, 0])] + points(count=10, seed=4):
        x, y = np.array(p.x), np.array(p.y)
        want = -np.einsum("klij,l->ijk", riemann(x), y)
        assert np.allclose(hv_curvature(riem, p), want, atol=1e-11)


@pytest.mark.parametrize("name", ["euclidean", "randers_const"])
def test_x_independent_metrics_have_trivial_spray(name):
    F = get_metric(name)
    for p in points(count=5, seed=2):
        s = spray_jets(F, p)
        for t in (s.Gi, s.N, s.B, s.R):
            assert np.max(np.abs(t.value)) < 1e-13


def test_randers_var_nontrivial(rvar):
    p = P([0.2, 0.4], [0.7, -1.1])
    B = berwald_coeffs(rvar, p)
    assert np.max(np.abs(B)) > 1e-3
    assert np.max(np.abs(B - B.transpose(1, 0, 2))) < 1e-10
    assert np.max(np.abs(hv_curvature(rvar, p))) > 1e-4


def test_spray_invariants(any_metric):
    for p in points(count=20, seed=7):
        s = spray_jets(any_metric, p)
        y = np.array(p.y)
        assert np.allclose(y @ s.N.value, 2 * s.Gi.value, atol=1e-12)
        R = s.R.value
        assert np.max(np.abs(R + R.transpose(1, 0, 2))) == 0.0


def test_spray_homogeneity(any_metric):
    for p in points(count=10, seed=8):
        for lam in (0.5, 3.0):
            q = P(p.x, [lam * v for v in p.y])
            assert np.allclose(spray_coeffs(any_metric, q), lam**2 * spray_coeffs(any_metric, p), atol=1e-12)
            assert np.allclose(nonlinear_connection(any_metric, q), lam * nonlinear_connection(any_metric, p), atol=1e-12)
            assert np.allclose(berwald_coeffs(any_metric, q), berwald_coeffs(any_metric, p), atol=1e-10)


def test_delta_derivative_examples(any_metric):
    p = P([0.3, -0.5], [0.8, 1.2])
    assert delta_derivative(lambda x, y: x[0], any_metric, p, 0) == pytest.approx(1.0)
    # F^2 is horizontally constant
    for i in range(2):
        assert abs(delta_derivative(any_metric.squared, any_metric, p, i)) < 1e-10
    if any_metric.name == "euclidean":
        assert delta_derivative(lambda x, y: y[0], any_metric, p, 0) == 0.0


@pytest.mark.parametrize("name", METRIC_NAMES)
def test_natural_bracket_identities(name):
    F = get_metric(name)
    for p in points(count=10, seed=11):
        fj = frame_jets(F, p)
        s = spray_jets(F, p)
        n = p.n
        hor = fj.hor
        ver = hor.alg.constant(np.hstack([np.zeros((n, n)), np.eye(n)]), hor.order)
        idx = [(i, j) for i in range(n) for j in range(n)]
        X = jet.stack([hor[i] for i, _ in idx])
        Y = jet.stack([hor[j] for _, j in idx])
        hh = bracket(X, Y).value.reshape(n, n, 2 * n)[..., n:]
        assert np.allclose(hh, s.R.value, atol=1e-8)
        Yv = jet.stack([ver[j] for _, j in idx])
        hv = bracket(X, Yv).value.reshape(n, n, 2 * n)[..., n:]
        assert np.allclose(hv, s.B.value, atol=1e-8)
