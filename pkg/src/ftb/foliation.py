"""Bundle-like and totally-geodesic defects of the natural foliations of TM.

Each foliation is described by which blocks of the adapted frame span its
tangent distribution and which span the G-orthogonal complement.  Both
defect functionals are read off the Koszul connection expressed in the
adapted frame, so they inherit its accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .finsler import FinslerFunction, cartan_lowered, fundamental_tensor
from .frame import TangentVectorTM, frame_jets, frame_slices
from .jet import JetPoint
from .sasaki import check_indicatrix, koszul_connection, natural_metric_matrix

ZERO_TOLERANCE = 1e-8
POSITIVITY_THRESHOLD = 1e-6
CARTAN_ZERO = 1e-10
ORTHOGONALITY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class FoliationSpec:
    """A foliation given by adapted-frame blocks of its tangent space and complement."""

    name: str
    tangent_blocks: tuple[str, ...]
    complement_blocks: tuple[str, ...]

    def indices(self, n: int, which: str) -> list[int]:
        sl = frame_slices(n)
        blocks = self.tangent_blocks if which == "tangent" else self.complement_blocks
        return [i for b in blocks for i in range(2 * n)[sl[b]]]

    def tangent(self, F: FinslerFunction, p: JetPoint) -> list[TangentVectorTM]:
        return self._generators(F, p, "tangent")

    def complement(self, F: FinslerFunction, p: JetPoint) -> list[TangentVectorTM]:
        return self._generators(F, p, "complement")

    def _generators(self, F, p, which):
        fields = frame_jets(F, p).fields.value
        return [TangentVectorTM(fields[i], p) for i in self.indices(p.n, which)]


FOLIATIONS = {
    "L": FoliationSpec("L", ("L",), ("dbar", "xi", "pbar")),
    "XI": FoliationSpec("XI", ("xi",), ("dbar", "pbar", "L")),
    "L_PLUS_XI": FoliationSpec("L_PLUS_XI", ("xi", "L"), ("dbar", "pbar")),
    "VTM": FoliationSpec("VTM", ("pbar", "L"), ("dbar", "xi")),
    "VPRIME_TM": FoliationSpec("VPRIME_TM", ("pbar",), ("dbar", "xi", "L")),
    "VPERP_TM": FoliationSpec("VPERP_TM", ("dbar", "xi", "pbar"), ("L",)),
}


def foliation(name: str) -> FoliationSpec:
    try:
        return FOLIATIONS[name]
    except KeyError:
        raise KeyError(f"unknown foliation {name!r}; known: {', '.join(FOLIATIONS)}") from None


def frame_gram(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    """``G(f_A, f_B)`` for the adapted frame ``f``."""
    f = frame_jets(F, p).fields.value
    return f @ natural_metric_matrix(F, p) @ f.T


def orthogonality_defect(F: FinslerFunction, p: JetPoint, fol: FoliationSpec) -> float:
    G = frame_gram(F, p)
    t, c = fol.indices(p.n, "tangent"), fol.indices(p.n, "complement")
    return float(np.max(np.abs(G[np.ix_(t, c)])))


def symmetrized_pairing(F: FinslerFunction, p: JetPoint, X: list[int], Y: list[int], Z: list[int]) -> np.ndarray:
    """``G(nabla_X Y + nabla_Y X, Z)`` over frame indices, shape ``(|X|, |Y|, |Z|)``."""
    C = koszul_connection(F, p)
    G = frame_gram(F, p)
    sym = C[np.ix_(X, Y)] + C[np.ix_(Y, X)].transpose(1, 0, 2)
    return sym @ G[:, Z]


def bundle_like_defect(F: FinslerFunction, p: JetPoint, fol: FoliationSpec) -> float:
    """``max |G(nabla_X Y + nabla_Y X, Z)|``, X, Y complement and Z tangent generators."""
    c, t = fol.indices(p.n, "complement"), fol.indices(p.n, "tangent")
    return float(np.max(np.abs(symmetrized_pairing(F, p, c, c, t))))


def totally_geodesic_defect(F: FinslerFunction, p: JetPoint, fol: FoliationSpec) -> float:
    """Largest G-norm of the complement part of ``nabla_X Y`` over tangent generators."""
    t = fol.indices(p.n, "tangent")
    c = fol.indices(p.n, "complement")
    C = koszul_connection(F, p)[np.ix_(t, t)]  # adapted coefficients
    G = frame_gram(F, p)
    Gc = G[np.ix_(c, c)]
    # G-orthogonal projection onto span(c): solve Gc w = G(v, f_c)
    w = np.linalg.solve(Gc, (C @ G[:, c]).reshape(-1, len(c)).T).T
    norms = np.sqrt(np.maximum(np.einsum("mi,ij,mj->m", w, Gc, w), 0.0))
    return float(np.max(norms))


def second_fundamental_pbar(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    """L-coefficient of ``nabla_{pbar_a} pbar_b``, shape ``(n-1, n-1)``."""
    sl = frame_slices(p.n)
    return koszul_connection(F, p)[sl["pbar"], sl["pbar"], 2 * p.n - 1]


def g_ab(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    E = frame_jets(F, p).E.value
    return E @ fundamental_tensor(F, p).g @ E.T


def cartan_frame(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    """``g_abc = (1/2) E_a^i E_b^j E_c^k g_ijk`` from the lowered Cartan tensor."""
    E = frame_jets(F, p).E.value
    return 0.5 * np.einsum("ai,bj,ck,ijk->abc", E, E, E, cartan_lowered(F, p).g3)


# -- verdicts -------------------------------------------------------------


def _point(p: JetPoint) -> list:
    return [list(p.x), list(p.y)]


def _verdict(name: str, metric: str, passed: bool, **extra) -> dict:
    return {"verdict": "PASS" if passed else "FAIL", "claim": name, "metric": metric, **extra}


def vperp_bundle_like(
    F: FinslerFunction, points: list[JetPoint], zero: float = ZERO_TOLERANCE, positivity: float = POSITIVITY_THRESHOLD
) -> dict:
    """The orthogonal complement of L is bundle-like: defect zero everywhere."""
    fol = FOLIATIONS["VPERP_TM"]
    defects = [bundle_like_defect(F, p, fol) for p in points]
    k = int(np.argmax(defects))
    return _verdict(
        "vperp_bundle_like", F.name, defects[k] < zero,
        witness={"point": _point(points[k]), "value": defects[k]},
    )


def vprime_bundle_like_iff_riemannian(
    F: FinslerFunction, points: list[JetPoint], zero: float = ZERO_TOLERANCE, positivity: float = POSITIVITY_THRESHOLD
) -> dict:
    """V'TM is bundle-like exactly when the Cartan tensor vanishes.

    The defect is compared with ``2 max |g_abc|`` computed independently from
    :func:`ftb.finsler.cartan_lowered`.
    """
    fol = FOLIATIONS["VPRIME_TM"]
    defects = np.array([bundle_like_defect(F, p, fol) for p in points])
    cartan = np.array([float(np.max(np.abs(cartan_lowered(F, p).g3))) for p in points])
    predicted = np.array([2 * float(np.max(np.abs(cartan_frame(F, p)))) for p in points])
    riemannian = bool(np.max(cartan) < CARTAN_ZERO)
    k = int(np.argmax(defects))
    if riemannian:
        passed = bool(np.max(defects) < zero)
    else:
        passed = bool(defects[k] > positivity)
    # relative where the witness is genuinely positive, absolute otherwise
    diff = np.abs(defects - predicted)
    big = predicted > positivity
    agreement = float(np.max(np.where(big, diff / np.where(big, predicted, 1.0), diff)))
    return _verdict(
        "vprime_bundle_like_iff_riemannian", F.name, passed,
        riemannian=riemannian,
        bundle_like=bool(np.max(defects) < zero),
        max_cartan=float(np.max(cartan)),
        witness={"point": _point(points[k]), "value": float(defects[k]), "two_max_g_abc": float(predicted[k])},
        witness_relative_error=agreement,
    )


def vertical_not_totally_geodesic(
    F: FinslerFunction, points: list[JetPoint], zero: float = ZERO_TOLERANCE, positivity: float = POSITIVITY_THRESHOLD
) -> dict:
    """V'TM and its orthogonal extension are never totally geodesic (indicatrix points).

    Each defect must reach ``lambda_min(g_ab)`` and the L-part of
    ``nabla_{pbar_a} pbar_b`` must equal ``-g_ab / F^2``.
    """
    worst_margin = np.inf
    worst = None
    identity = 0.0
    for p in points:
        check_indicatrix(F, p)
        lam = float(np.min(np.linalg.eigvalsh(g_ab(F, p))))
        for name in ("VPRIME_TM", "VPERP_TM"):
            d = totally_geodesic_defect(F, p, FOLIATIONS[name])
            margin = d - lam
            if margin < worst_margin:
                worst_margin, worst = margin, {"point": _point(p), "foliation": name, "value": d, "lambda_min": lam}
        F2 = F.value(p) ** 2
        identity = max(identity, float(np.max(np.abs(second_fundamental_pbar(F, p) + g_ab(F, p) / F2))))
    passed = worst_margin >= -positivity and worst["value"] > positivity and identity < zero
    return _verdict(
        "vertical_not_totally_geodesic", F.name, bool(passed),
        witness=worst, second_fundamental_form_residual=identity,
    )


def liouville_not_bundle_like(
    F: FinslerFunction, points: list[JetPoint], zero: float = ZERO_TOLERANCE, positivity: float = POSITIVITY_THRESHOLD
) -> dict:
    """Foliations by L and by L + xi are never bundle-like.

    Witness: ``max |G(nabla_{pbar_a} pbar_b + nabla_{pbar_b} pbar_a, L)|``,
    expected to equal ``2 max |g_ab|``.
    """
    n = points[0].n
    sl = frame_slices(n)
    pb = list(range(2 * n)[sl["pbar"]])
    smallest = np.inf
    worst = None
    agreement = 0.0
    for p in points:
        w = float(np.max(np.abs(symmetrized_pairing(F, p, pb, pb, [2 * n - 1]))))
        expected = 2 * float(np.max(np.abs(g_ab(F, p))))
        agreement = max(agreement, abs(w - expected) / expected)
        for name in ("L", "L_PLUS_XI"):
            d = bundle_like_defect(F, p, FOLIATIONS[name])
            if d < smallest:
                smallest, worst = d, {"point": _point(p), "foliation": name, "value": d, "pbar_witness": w,
                                      "two_max_g_ab": expected}
    return _verdict(
        "liouville_not_bundle_like", F.name, bool(smallest > positivity),
        witness=worst, witness_relative_error=agreement,
    )


def foliation_suite(
    F: FinslerFunction,
    points: list[JetPoint],
    indicatrix_points: list[JetPoint] | None = None,
    zero: float = ZERO_TOLERANCE,
    positivity: float = POSITIVITY_THRESHOLD,
) -> list[dict]:
    """All four foliation verdicts for one metric.

    ``indicatrix_points`` (default: ``points``) feed the totally-geodesic
    check, which is stated on the level set F = 1.
    """
    if len(points) < 1:
        raise ValueError("foliation_suite needs at least one point")
    ind = points if indicatrix_points is None else indicatrix_points
    tol = {"zero": zero, "positivity": positivity}
    return [
        vperp_bundle_like(F, points, **tol),
        vprime_bundle_like_iff_riemannian(F, points, **tol),
        vertical_not_totally_geodesic(F, ind, **tol),
        liouville_not_bundle_like(F, points, **tol),
    ]
