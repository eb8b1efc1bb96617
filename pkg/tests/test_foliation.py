import numpy as np
import pytest

from ftb.finsler import get_metric
from ftb.foliation import (
    FOLIATIONS,
    bundle_like_defect,
    cartan_frame,
    foliation,
    g_ab,
    liouville_not_bundle_like,
    orthogonality_defect,
    foliation_suite,
    totally_geodesic_defect,
    vprime_bundle_like_iff_riemannian,
)

from conftest import METRIC_NAMES, P, indicatrix_points, points


def test_lookup():
    assert foliation("VTM").tangent_blocks == ("pbar", "L")
    with pytest.raises(KeyError, match="unknown foliation"):
        foliation("HTM")


@pytest.mark.parametrize("name", METRIC_NAMES)
def test_generators_split_the_frame(name):
    F = get_metric(name)
    for p in points(count=10, seed=40):
        for fol in FOLIATIONS.values():
            t, c = fol.tangent(F, p), fol.complement(F, p)
            assert len(t) + len(c) == 2 * p.n
            M = np.array([v.components for v in t + c])
            assert np.linalg.matrix_rank(M) == 2 * p.n
            assert orthogonality_defect(F, p, fol) < 1e-10 * max(1.0, F.value(p) ** 2)


@pytest.mark.parametrize("name", METRIC_NAMES)
def test_vperp_bundle_like(name):
    F = get_metric(name)
    for p in points(count=10, seed=41):
        assert bundle_like_defect(F, p, FOLIATIONS["VPERP_TM"]) < 1e-8


def test_vprime_bundle_like_on_riemannian(riem):
    for p in points(count=10, seed=42):
        assert bundle_like_defect(riem, p, FOLIATIONS["VPRIME_TM"]) < 1e-8


def test_vprime_defect_is_twice_cartan(rconst):
    p = P([0, 0], [1, 0.5])
    d = bundle_like_defect(rconst, p, FOLIATIONS["VPRIME_TM"])
    w = 2 * np.max(np.abs(cartan_frame(rconst, p)))
    assert d > 1e-6
    assert d == pytest.approx(w, rel=1e-8)
    assert d == pytest.approx(0.085865, abs=1e-6)


def test_vprime_totally_geodesic_euclidean(euclid):
    p = P([0.2, 0.3], [1, 0])
    assert totally_geodesic_defect(euclid, p, FOLIATIONS["VPRIME_TM"]) == pytest.approx(1.0, abs=1e-12)


def test_rays_and_spray_lines(euclid):
    for p in indicatrix_points(euclid, count=5, seed=43):
        assert totally_geodesic_defect(euclid, p, FOLIATIONS["L"]) < 1e-10
        assert totally_geodesic_defect(euclid, p, FOLIATIONS["XI"]) < 1e-10


@pytest.mark.parametrize("name", METRIC_NAMES)
def test_rays_totally_geodesic_everywhere(name):
    F = get_metric(name)
    for p in points(count=5, seed=44):
        assert totally_geodesic_defect(F, p, FOLIATIONS["L"]) < 1e-8


@pytest.mark.parametrize("name", METRIC_NAMES)
def test_totally_geodesic_lower_bound(name):
    F = get_metric(name)
    for p in indicatrix_points(F, count=10, seed=45):
        lam = np.min(np.linalg.eigvalsh(g_ab(F, p)))
        for fol in ("VPRIME_TM", "VPERP_TM"):
            assert totally_geodesic_defect(F, p, FOLIATIONS[fol]) >= lam - 1e-6


def test_liouville_witness_euclidean(euclid):
    v = liouville_not_bundle_like(euclid, [P([0, 0], [1, 0])])
    assert v["verdict"] == "PASS"
    assert v["witness"]["pbar_witness"] == pytest.approx(2.0)


@pytest.mark.parametrize("name", METRIC_NAMES)
def test_foliation_suite_passes(name):
    F = get_metric(name)
    pts = points(count=10, seed=46)
    verdicts = foliation_suite(F, pts, indicatrix_points(F, count=10, seed=46))
    assert [v["claim"] for v in verdicts] == [
        "vperp_bundle_like",
        "vprime_bundle_like_iff_riemannian",
        "vertical_not_totally_geodesic",
        "liouville_not_bundle_like",
    ]
    for v in verdicts:
        assert v["verdict"] == "PASS", v
        assert "witness" in v


def test_cartan_witness_reproduced(rconst):
    v = vprime_bundle_like_iff_riemannian(rconst, points(count=10, seed=47))
    assert not v["riemannian"] and not v["bundle_like"]
    assert v["witness"]["value"] > 1e-6
    assert v["witness_relative_error"] < 1e-8


def test_suite_needs_points(euclid):
    with pytest.raises(ValueError):
        foliation_suite(euclid, [])


def test_suite_n3():
    F = get_metric("randers_var", n=3)
    pts = points(n=3, count=4, seed=48)
    ind = indicatrix_points(F, count=4, seed=48)
    for v in foliation_suite(F, pts, ind):
        assert v["verdict"] == "PASS", v
