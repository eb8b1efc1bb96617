"""Contact metric structure of the indicatrix bundle and its Sasakian obstruction.

On the level set ``IM = {F = 1}`` the structure is

* ``eta = y^i g_ij dx^j`` and ``xi = y^i delta/delta x^i``,
* ``D = ker eta ∩ ker (eta o J)``, spanned by the ``dbar_a`` and ``pbar_a``,
* ``phi = J`` on ``D`` and ``phi(xi) = 0``, i.e. ``phi(v) = J(v - eta(v) xi / F^2)``,
* ``Gbar``, the restriction of the Sasaki metric.

The connection ``tilde nabla`` uses the Levi-Civita connection of ``Gbar``,
obtained by removing the L-component of the ambient Koszul connection.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import jet
from .finsler import FinslerFunction, fundamental_tensor, metric_jets
from .frame import J_apply, TangentVectorTM, bracket, frame_jets, frame_slices
from .jet import Jet, JetPoint
from .sasaki import (
    SasakiJets,
    check_indicatrix,
    frame_coefficients,
    induced_nabla,
    inner,
    _as_field,
    natural_metric_matrix,
    sasaki_jets,
)
from .spray import spray_coeffs, spray_jets

IDENTITY_TOLERANCE = 1e-9
NIJENHUIS_ZERO = 1e-8
OBSTRUCTION_MARGIN = 1e-6


# -- structure tensors ----------------------------------------------------


@dataclass(frozen=True)
class ContactData:
    """Point values of the contact metric structure at a point of IM.

    Vectors are natural-basis components; ``phi`` acts on column vectors.
    """

    point: JetPoint
    eta: np.ndarray  # (2n,) covector
    xi: np.ndarray  # (2n,)
    L: np.ndarray  # (2n,) unit normal direction of IM (G(L, L) = F^2)
    phi: np.ndarray  # (2n, 2n)
    J: np.ndarray  # (2n, 2n)
    tangent_basis: np.ndarray  # rows span T(IM): [dbar, xi, pbar]
    D_basis: np.ndarray  # rows span D: [dbar, pbar]
    G: np.ndarray  # Sasaki metric in the natural basis

    @property
    def G_bar(self) -> np.ndarray:
        """Gram matrix of ``Gbar`` on :attr:`tangent_basis`."""
        B = self.tangent_basis
        return B @ self.G @ B.T

    def D_projector(self) -> np.ndarray:
        """G-orthogonal projector of T(IM) onto D, as a natural-basis matrix.

        On T(IM), ``v -> v - eta(v) xi`` (``xi`` is G-orthogonal to D and
        ``G(xi, xi) = eta(xi) = 1`` on IM).
        """
        return np.eye(len(self.xi)) - np.outer(self.xi, self.eta) / (self.eta @ self.xi)

    def metric(self, v, w) -> float:
        return float(v @ self.G @ w)


def eta_covector(F: FinslerFunction, p: JetPoint) -> Jet:
    """``eta`` as a jet covector field ``(g_ij y^j, 0)``."""
    m = metric_jets(F, p)
    n = p.n
    gy = m.gy.truncate(frame_jets(F, p).E.order)
    return jet.stack([gy, m.z.alg.constant(np.zeros(n), gy.order)], axis=0).reshape(2 * n)


def contact_structure(F: FinslerFunction, p: JetPoint) -> ContactData:
    check_indicatrix(F, p)
    fj = frame_jets(F, p)
    n = p.n
    N = spray_jets(F, p).N.value
    eta = eta_covector(F, p).value
    xi = fj.xi.value
    L = fj.L.value
    J = np.stack([J_apply(N, e) for e in np.eye(2 * n)], axis=1)
    F2 = F.value(p) ** 2
    phi = J @ (np.eye(2 * n) - np.outer(xi, eta) / F2)
    fields = fj.fields.value
    sl = frame_slices(n)
    tangent = fields[: 2 * n - 1]
    D = np.vstack([fields[sl["dbar"]], fields[sl["pbar"]]])
    return ContactData(p, eta, xi, L, phi, J, tangent, D, natural_metric_matrix(F, p))


def d_eta(F: FinslerFunction, p: JetPoint, X: Jet, Y: Jet) -> np.ndarray:
    """``d eta(X, Y) = X(eta(Y)) - Y(eta(X)) - eta([X, Y])`` for field batches."""
    w = eta_covector(F, p)
    eX = jet.einsum("mA,A->m", X, w)
    eY = jet.einsum("mA,A->m", Y, w)
    XeY = jet.einsum("mA,mA->m", X, eY.grad())
    YeX = jet.einsum("mA,mA->m", Y, eX.grad())
    return (XeY - YeX - jet.einsum("mA,A->m", bracket(X, Y), w.truncate(X.order - 1))).value


@dataclass
class ContactIdentityReport:
    metric: str
    point: JetPoint
    residuals: dict[str, float]
    d_eta_ratio: float  # d eta(X, Y) / Gbar(X, phi Y) on D-pairs
    d_eta_ratio_spread: float
    tolerance: float = IDENTITY_TOLERANCE

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.residuals.values())


def contact_identities(F: FinslerFunction, p: JetPoint, samples: int = 8, seed: int = 0) -> ContactIdentityReport:
    """Contact metric identities on random vectors tangent to IM."""
    cd = contact_structure(F, p)
    rng = np.random.default_rng(seed)
    B = cd.tangent_basis
    X = rng.normal(size=(samples, len(B))) @ B
    Y = rng.normal(size=(samples, len(B))) @ B
    G = cd.G
    eta, xi, phi = cd.eta, cd.xi, cd.phi
    eX, eY = X @ eta, Y @ eta
    pX, pY = X @ phi.T, Y @ phi.T
    res = {
        "eta(xi) = 1": abs(eta @ xi - 1.0),
        "phi(xi) = 0": float(np.max(np.abs(phi @ xi))),
        "eta o phi = 0": float(np.max(np.abs(pX @ eta))),
        "phi^2 = -Id + eta (x) xi": float(np.max(np.abs(pX @ phi.T - (-X + np.outer(eX, xi))))),
        "Gbar(phi X, phi Y) = Gbar(X, Y) - eta(X) eta(Y)": float(
            np.max(np.abs(np.einsum("mA,AB,mB->m", pX, G, pY) - np.einsum("mA,AB,mB->m", X, G, Y) + eX * eY))
        ),
        "D = ker eta ∩ ker eta o J": float(np.max(np.abs(np.concatenate([cd.D_basis @ eta, cd.D_basis @ cd.J.T @ eta])))),
    }
    # d eta against Gbar(X, phi Y) over D-frame pairs
    fj = frame_jets(F, p)
    sl = frame_slices(p.n)
    Dj = jet.stack([fj.fields[i] for i in list(range(2 * p.n))[sl["dbar"]] + list(range(2 * p.n))[sl["pbar"]]])
    k = Dj.shape[0]
    Xs = jet.stack([Dj[a] for a in range(k) for _ in range(k)])
    Ys = jet.stack([Dj[b] for _ in range(k) for b in range(k)])
    de = d_eta(F, p, Xs, Ys)
    gp = np.einsum("mA,AB,mB->m", Xs.value, G, Ys.value @ phi.T)
    mask = np.abs(gp) > 1e-8
    ratios = de[mask] / gp[mask]
    ratio = float(np.mean(ratios)) if ratios.size else float("nan")
    spread = float(np.ptp(ratios)) if ratios.size else float("nan")
    off = float(np.max(np.abs(de[~mask]))) if np.any(~mask) else 0.0
    res["d eta vanishes where Gbar(X, phi Y) does"] = off
    return ContactIdentityReport(F.name, p, res, ratio, spread)


# -- the connection tilde nabla --------------------------------------------


class _Structure:
    """Jet-level contact structure used to evaluate ``tilde nabla`` on field batches."""

    def __init__(self, F: FinslerFunction, p: JetPoint):
        self.F, self.p = F, p
        self.sj: SasakiJets = sasaki_jets(F, p)
        fj = frame_jets(F, p)
        self.fj = fj
        self.N = spray_jets(F, p).N
        self.eta = eta_covector(F, p)
        self.xi = fj.xi
        self.L = fj.L
        self.F2 = metric_jets(F, p).F2

    def eta_of(self, X: Jet) -> Jet:
        return jet.einsum("mA,A->m", X, self.eta)

    def phi(self, X: Jet) -> Jet:
        """``phi(X) = J(X - eta(X) xi / F^2)``."""
        c = self.eta_of(X) / self.F2
        return J_apply(self.N, X - jet.einsum("m,A->mA", c, self.xi))

    def nabla(self, X: Jet, Y: Jet) -> Jet:
        return induced_nabla(self.sj, self.L, X, Y)

    def G(self, X: Jet, Y: Jet) -> Jet:
        return inner(self.sj, X, Y)

    def lie_xi_G(self, X: Jet, Y: Jet) -> Jet:
        """``(L_xi Gbar)(X, Y) = xi(G(X, Y)) - G([xi, X], Y) - G(X, [xi, Y])``."""
        m = X.shape[0]
        Xi = self._xi_batch(m)
        gxy = self.G(X, Y)
        dxi = jet.einsum("mA,mA->m", Xi.truncate(gxy.order - 1), gxy.grad())
        return dxi - self.G(bracket(Xi, X), Y) - self.G(X, bracket(Xi, Y))

    def _xi_batch(self, m: int) -> Jet:
        c = self.xi.coef
        return Jet(self.xi.alg, np.broadcast_to(c, (m,) + c.shape), self.xi.order)

    def tilde_nabla(self, X: Jet, Y: Jet) -> np.ndarray:
        """Point values of ``tilde nabla_X Y`` for batches ``(m, 2n)``."""
        m = X.shape[0]
        Xi = self._xi_batch(m)
        eX = self.eta_of(X).value
        eY = self.eta_of(Y).value
        out = self.nabla(X, Y).value
        out = out - eX[:, None] * self.nabla(Y, Xi).value - eY[:, None] * self.nabla(X, Xi).value
        coeff = self.G(X, self.phi(Y)).value + 0.5 * self.lie_xi_G(X, Y).value
        return out + coeff[:, None] * self.xi.value[None, :]


def _batch(fields: Jet, pairs: list[tuple[int, int]]) -> tuple[Jet, Jet]:
    X = jet.stack([fields[a] for a, _ in pairs])
    Y = jet.stack([fields[b] for _, b in pairs])
    return X, Y


def _fields(F, p, labels_or_fields) -> Jet:
    return jet.stack([_as_field(F, p, v) for v in labels_or_fields])


def tilde_nabla(F: FinslerFunction, p: JetPoint, X, Y) -> TangentVectorTM:
    """``tilde nabla_X Y`` at a point of IM for frame labels or fields tangent to IM."""
    check_indicatrix(F, p)
    st = _Structure(F, p)
    Xf, Yf = _fields(F, p, [X]), _fields(F, p, [Y])
    return TangentVectorTM(st.tilde_nabla(Xf, Yf)[0], p)


def lie_derivative_metric(F: FinslerFunction, p: JetPoint, X, Y) -> float:
    """``(L_xi Gbar)(X, Y)`` via the bracket formula."""
    st = _Structure(F, p)
    Xf, Yf = _fields(F, p, [X]), _fields(F, p, [Y])
    return float(st.lie_xi_G(Xf, Yf).value[0])


def lie_derivative_metric_fd(F: FinslerFunction, p: JetPoint, X, Y, t: float = 1e-3, h: float = 1e-4) -> float:
    """``(L_xi G)(X, Y)`` as ``d/dt (Phi_t^* G)(X, Y)`` with ``Phi_t`` the flow of ``xi``.

    The flow is integrated with one classical Runge-Kutta step and its
    differential is taken by central differences; the outer ``t``-derivative
    gets one Richardson step.  Only point values of ``X`` and ``Y`` enter.
    """
    n = p.n
    v = _as_field(F, p, X).value
    w = _as_field(F, p, Y).value

    def xi_at(z):
        q = JetPoint.from_array(z)
        return np.concatenate([z[n:], -2.0 * spray_coeffs(F, q)])

    def flow(z, s):
        k1 = xi_at(z)
        k2 = xi_at(z + 0.5 * s * k1)
        k3 = xi_at(z + 0.5 * s * k2)
        k4 = xi_at(z + s * k3)
        return z + s * (k1 + 2 * k2 + 2 * k3 + k4) / 6

    def pulled_back(s):
        z0 = p.z
        zt = flow(z0, s)
        dv = (flow(z0 + h * v, s) - flow(z0 - h * v, s)) / (2 * h)
        dw = (flow(z0 + h * w, s) - flow(z0 - h * w, s)) / (2 * h)
        G = natural_metric_matrix(F, JetPoint.from_array(zt))
        return dv @ G @ dw

    d = lambda s: (pulled_back(s) - pulled_back(-s)) / (2 * s)
    return float((4 * d(t / 2) - d(t)) / 3)


# -- Sasakian obstruction -------------------------------------------------


@dataclass
class ObstructionReport:
    metric: str
    point: JetPoint
    labels: list[str]  # D-frame labels, rows/cols of the tables below
    components: np.ndarray  # [X, Y, :] adapted-frame coefficients of (tilde nabla_X phi) Y
    norms: np.ndarray  # [X, Y] Gbar-norm of (tilde nabla_X phi) Y
    max_component: float
    lambda_min: float
    flagged: dict
    xi_row: np.ndarray  # (tilde nabla_xi phi) Y over D, Gbar-norms
    xi_column: np.ndarray  # (tilde nabla_X phi) xi over D, Gbar-norms
    margin: float = OBSTRUCTION_MARGIN

    @property
    def obstructed(self) -> bool:
        return self.max_component >= self.lambda_min - self.margin and self.max_component > self.margin


def sasakian_obstruction(F: FinslerFunction, p: JetPoint) -> ObstructionReport:
    """``(tilde nabla_X phi) Y = tilde nabla_X (phi Y) - phi(tilde nabla_X Y)`` on D x D.

    The component of largest magnitude is flagged and compared with the
    entries of ``g_ab``.
    """
    check_indicatrix(F, p)
    st = _Structure(F, p)
    n = p.n
    sl = frame_slices(n)
    idx = list(range(2 * n))
    D = idx[sl["dbar"]] + idx[sl["pbar"]]
    allf = st.fj.fields
    labels_all = [f"dbar{a + 1}" for a in range(n - 1)] + ["xi"] + [f"pbar{a + 1}" for a in range(n - 1)] + ["L"]
    xi_i = idx[sl["xi"]][0]
    cd = contact_structure(F, p)

    def obstruction(pairs):
        X, Y = _batch(allf, pairs)
        first = st.tilde_nabla(X, st.phi(Y))
        second = st.tilde_nabla(X, Y) @ cd.phi.T
        return first - second

    k = len(D)
    pairs = [(a, b) for a in D for b in D]
    vals = obstruction(pairs)
    coeffs = frame_coefficients(F, p, vals).reshape(k, k, 2 * n)
    G = cd.G
    norms = np.sqrt(np.maximum(np.einsum("mA,AB,mB->m", vals, G, vals), 0)).reshape(k, k)
    E = st.fj.E.value
    gab = E @ fundamental_tensor(F, p).g @ E.T
    lam = float(np.min(np.linalg.eigvalsh(gab)))
    a, b, c = np.unravel_index(int(np.argmax(np.abs(coeffs))), coeffs.shape)
    val = float(coeffs[a, b, c])
    dist = np.abs(np.abs(val) - np.abs(gab))
    ga, gb = np.unravel_index(int(np.argmin(dist)), gab.shape)
    flagged = {
        "X": labels_all[D[a]],
        "Y": labels_all[D[b]],
        "component": labels_all[c],
        "value": val,
        "closest_g_ab": [int(ga) + 1, int(gb) + 1],
        "g_ab_value": float(gab[ga, gb]),
        "difference_up_to_sign": float(dist[ga, gb]),
        "ratio_to_g_ab": val / float(gab[ga, gb]),
    }
    row = obstruction([(xi_i, b) for b in D])
    col = obstruction([(a, xi_i) for a in D])
    nrm = lambda v: np.sqrt(np.maximum(np.einsum("mA,AB,mB->m", v, G, v), 0))
    return ObstructionReport(
        F.name, p, [labels_all[i] for i in D], coeffs, norms, float(np.max(np.abs(coeffs))), lam, flagged,
        nrm(row), nrm(col),
    )


# -- Nijenhuis tensor -------------------------------------------------------

_KIND = re.compile(r"^(delta|dx|dy)(\d+)$")


def natural_field(F: FinslerFunction, p: JetPoint, kind: str) -> Jet:
    """Jet field for ``'delta<i>'``, ``'dx<i>'``, ``'dy<i>'`` (1-based) or a frame label."""
    m = _KIND.match(kind)
    if m is None:
        return _as_field(F, p, kind)
    name, i = m.group(1), int(m.group(2)) - 1
    n = p.n
    if not 0 <= i < n:
        raise ValueError(f"index out of range in {kind!r}")
    fj = frame_jets(F, p)
    if name == "delta":
        return fj.hor[i]
    e = np.zeros(2 * n)
    e[i if name == "dx" else n + i] = 1.0
    return fj.E.alg.constant(e, fj.hor.order)


def nijenhuis_fields(N: Jet, X: Jet, Y: Jet) -> Jet:
    """``N_J(X, Y) = [JX, JY] - J[JX, Y] - J[X, JY] - [X, Y]`` for batches."""
    JX, JY = J_apply(N, X), J_apply(N, Y)
    k = min(JX.order, JY.order, X.order, Y.order)
    X, Y, JX, JY = (v.truncate(k) for v in (X, Y, JX, JY))
    return bracket(JX, JY) - J_apply(N, bracket(JX, Y)) - J_apply(N, bracket(X, JY)) - bracket(X, Y)


def nijenhuis(F: FinslerFunction, p: JetPoint, v_kind: str, w_kind: str) -> TangentVectorTM:
    N = spray_jets(F, p).N
    X = natural_field(F, p, v_kind).reshape(1, -1)
    Y = natural_field(F, p, w_kind).reshape(1, -1)
    return TangentVectorTM(nijenhuis_fields(N, X, Y).value[0], p)


@dataclass
class NijenhuisTable:
    """``N_J`` on natural pairs, with the curvature expressions they are compared to."""

    metric: str
    point: JetPoint
    hh: np.ndarray  # [i, j, :] = N_J(delta_i, delta_j)
    vv: np.ndarray  # N_J(d/dy^i, d/dy^j)
    hv: np.ndarray  # N_J(delta_i, d/dy^j)
    R: np.ndarray
    residuals: dict[str, float]
    readings: dict[str, str] = field(default_factory=dict)

    @property
    def max_norm(self) -> float:
        return float(max(np.max(np.abs(t)) for t in (self.hh, self.vv, self.hv)))


def nijenhuis_table(F: FinslerFunction, p: JetPoint, tolerance: float = 1e-7) -> NijenhuisTable:
    """All natural-pair values of ``N_J`` and their curvature expressions.

    ``readings`` records which sign of ``R_ij^k`` each stated expression
    matches (or that neither does).
    """
    n = p.n
    fj = frame_jets(F, p)
    s = spray_jets(F, p)
    hor = fj.hor
    ver = fj.E.alg.constant(np.hstack([np.zeros((n, n)), np.eye(n)]), hor.order)
    pairs = [(i, j) for i in range(n) for j in range(n)]
    I = [i for i, _ in pairs]
    Jx = [j for _, j in pairs]

    def table(A, B):
        X = jet.stack([A[i] for i in I])
        Y = jet.stack([B[j] for j in Jx])
        return nijenhuis_fields(s.N, X, Y).value.reshape(n, n, 2 * n)

    hh, vv, hv = table(hor, hor), table(ver, ver), table(hor, ver)
    R = s.R.value
    horv = hor.value
    verv = ver.value
    R_dy = np.einsum("ijk,kA->ijA", R, verv)  # R_ij^k d/dy^k
    R_dl = np.einsum("ijk,kA->ijA", R, horv)  # R_ij^k delta_k
    residuals = {
        "N(delta_i, delta_j) + R_ij^k d/dy^k": float(np.max(np.abs(hh + R_dy))),
        "N(d/dy^i, d/dy^j) - R_ij^k d/dy^k": float(np.max(np.abs(vv - R_dy))),
        "N(delta_i, d/dy^j) + R_ij^k delta_k": float(np.max(np.abs(hv + R_dl))),
    }
    readings = {}
    for name, val, target in (
        ("N(delta_i, delta_j)", hh, -R_dy),
        ("N(d/dy^i, d/dy^j)", vv, R_dy),
        ("N(delta_i, d/dy^j)", hv, -R_dl),
    ):
        if np.max(np.abs(val - target)) < tolerance:
            readings[name] = "matches the stated sign"
        elif np.max(np.abs(val + target)) < tolerance:
            readings[name] = "matches with the opposite sign"
        else:
            readings[name] = "matches neither sign"
    return NijenhuisTable(F.name, p, hh, vv, hv, R, residuals, readings)


def flatness_equivalence_check(F: FinslerFunction, points: list[JetPoint], zero: float = NIJENHUIS_ZERO) -> dict:
    """``max |N_J| < zero`` iff ``max |R_ij^k| < zero`` over the sample."""
    nj, rr = 0.0, 0.0
    for p in points:
        t = nijenhuis_table(F, p)
        nj = max(nj, t.max_norm)
        rr = max(rr, float(np.max(np.abs(t.R))))
    integrable, flat = nj < zero, rr < zero
    return {
        "verdict": "PASS" if integrable == flat else "FAIL",
        "claim": "integrable_iff_flat",
        "metric": F.name,
        "max_nijenhuis": nj,
        "max_curvature": rr,
        "integrable": integrable,
        "flat": flat,
    }


# -- Jbar versus J ------------------------------------------------------------


def jbar_comparison(F: FinslerFunction, p: JetPoint, samples: int = 8, seed: int = 0) -> dict:
    """Compare ``Jbar(X + f L) = phi(X) - f xi + eta(X) L`` with ``J``.

    Reports the residual on random ``X + f L`` and separately on ``D`` and
    on the plane spanned by ``xi`` and ``L``.
    """
    cd = contact_structure(F, p)
    rng = np.random.default_rng(seed)

    def jbar(X, f):
        return X @ cd.phi.T - np.outer(f, cd.xi) + np.outer(X @ cd.eta, cd.L)

    X = rng.normal(size=(samples, len(cd.tangent_basis))) @ cd.tangent_basis
    f = rng.normal(size=samples)
    V = X + np.outer(f, cd.L)
    full = float(np.max(np.abs(jbar(X, f) - V @ cd.J.T)))
    XD = rng.normal(size=(samples, len(cd.D_basis))) @ cd.D_basis
    on_D = float(np.max(np.abs(jbar(XD, np.zeros(samples)) - XD @ cd.J.T)))
    a, b = rng.normal(size=samples), rng.normal(size=samples)
    P = np.outer(a, cd.xi)
    W = P + np.outer(b, cd.L)
    plane = float(np.max(np.abs(jbar(P, b) - W @ cd.J.T)))
    plane_neg = float(np.max(np.abs(jbar(P, b) + W @ cd.J.T)))
    return {
        "metric": F.name,
        "residual": full,
        "residual_on_D": on_D,
        "residual_on_xi_L": plane,
        "residual_on_xi_L_against_minus_J": plane_neg,
    }
