"""Adapted frame on TM, the almost complex structure and Lie brackets.

Vector fields on TM are handled as jets of their natural-basis components
``(v_x^1..v_x^n, v_y^1..v_y^n)`` in the basis ``(d/dx^i, d/dy^i)``.  A batch
of ``m`` fields is a jet of shape ``(m, 2n)``.

The frame is ordered ``[dbar_1..dbar_{n-1}, xi, pbar_1..pbar_{n-1}, L]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import jet
from .finsler import DEFAULT_ORDER, FinslerFunction, metric_jets
from .jet import Jet, JetPoint
from .spray import horizontal_basis, spray_jets

BRACKET_TOLERANCE = 1e-8


@dataclass(frozen=True)
class TangentVectorTM:
    components: np.ndarray  # (2n,) in (d/dx^i, d/dy^i)
    point: JetPoint

    @property
    def horizontal_part(self) -> np.ndarray:
        return self.components[: self.point.n]

    @property
    def vertical_part(self) -> np.ndarray:
        return self.components[self.point.n :]


@dataclass(frozen=True)
class FrameJets:
    E: Jet  # (n-1, n)
    anchor_index: int  # the y-slot dropped when building E
    hor: Jet  # delta/delta x^i, (n, 2n)
    dbar: Jet  # (n-1, 2n)
    pbar: Jet  # (n-1, 2n)
    xi: Jet  # (2n,)
    L: Jet  # (2n,)
    N: Jet  # nonlinear connection, for J

    @property
    def n(self) -> int:
        return self.E.shape[1]

    @property
    def fields(self) -> Jet:
        """All 2n frame fields, in frame order, as a ``(2n, 2n)`` jet."""
        k = self.dbar.order
        rows = [self.dbar, self.xi.reshape(1, -1), self.pbar.truncate(k), self.L.truncate(k).reshape(1, -1)]
        return Jet(self.E.alg, np.concatenate([r.truncate(k).coef for r in rows], axis=0), k)

    def block(self, name: str) -> Jet:
        return {"dbar": self.dbar, "xi": self.xi.reshape(1, -1), "pbar": self.pbar, "L": self.L.reshape(1, -1)}[name]


def frame_slices(n: int) -> dict[str, slice]:
    return {
        "dbar": slice(0, n - 1),
        "xi": slice(n - 1, n),
        "pbar": slice(n, 2 * n - 1),
        "L": slice(2 * n - 1, 2 * n),
    }


def frame_labels(n: int) -> list[str]:
    return [f"dbar{a + 1}" for a in range(n - 1)] + ["xi"] + [f"pbar{a + 1}" for a in range(n - 1)] + ["L"]


@lru_cache(maxsize=512)
def frame_jets(F: FinslerFunction, p: JetPoint, order: int = DEFAULT_ORDER) -> FrameJets:
    m = metric_jets(F, p, order)
    s = spray_jets(F, p, order)
    n = p.n
    alg = m.z.alg
    i0 = int(np.argmax(np.abs(p.y)))
    keep = [i for i in range(n) if i != i0]
    y = m.y
    # E_a^i = delta_{a'}^i - (g_{a'j} y^j / F^2) y^i with a' running over keep
    coeff = m.gy[keep] / m.F2 if len(keep) > 1 else (m.gy[keep[0]] / m.F2).reshape(1)
    sel = np.eye(n)[keep]
    E = alg.constant(sel, coeff.order) - jet.einsum("a,i->ai", coeff, y)
    hor = horizontal_basis(F, p, order)
    dbar = jet.einsum("ai,iA->aA", E, hor)
    zeros = alg.constant(np.zeros((n - 1, n)), E.order)
    pbar = jet.stack([zeros, E], axis=1).reshape(n - 1, 2 * n)
    xi = jet.einsum("i,iA->A", y, hor)
    L = jet.stack([alg.constant(np.zeros(n)), y], axis=0).reshape(2 * n)
    return FrameJets(E, i0, hor, dbar, pbar, xi, L, s.N)


# -- almost complex structure -------------------------------------------


def J_apply(N, v):
    """``J = delta_i (x) delta y^i - d/dy^i (x) dx^i`` on natural components.

    ``N`` and ``v`` may be arrays or jets; ``v`` has shape ``(..., 2n)``.
    """
    n = N.shape[0]
    h = v[..., :n] if not isinstance(v, Jet) else _last(v, slice(0, n))
    vy = v[..., n:] if not isinstance(v, Jet) else _last(v, slice(n, 2 * n))
    w = vy + _contract_last(h, N)  # w^i = v_y^i + G_j^i h^j
    top = w
    bottom = -_contract_last(w, N) - h
    return _concat_last(top, bottom)


def _last(v: Jet, sl: slice) -> Jet:
    idx = (slice(None),) * (v.ndim - 1) + (sl,)
    return v[idx]


def _contract_last(h, N):
    """``(h @ N)`` along the last batch axis: ``out^i = h^j N[j, i]``."""
    if not isinstance(h, Jet) and not isinstance(N, Jet):
        return h @ N
    letters = "abcdef"[: (h.ndim if isinstance(h, Jet) else np.ndim(h)) - 1]
    return jet.einsum(f"{letters}j,ji->{letters}i", h, N)


def _concat_last(a, b):
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.concatenate([a, b], axis=-1)
    alg = a.alg if isinstance(a, Jet) else b.alg
    k = min(x.order for x in (a, b) if isinstance(x, Jet))
    ca = a.truncate(k).coef if isinstance(a, Jet) else alg.constant(a, k).coef
    cb = b.truncate(k).coef if isinstance(b, Jet) else alg.constant(b, k).coef
    shape = np.broadcast_shapes(ca.shape[:-2], cb.shape[:-2])
    ca = np.broadcast_to(ca, shape + ca.shape[-2:])
    cb = np.broadcast_to(cb, shape + cb.shape[-2:])
    return Jet(alg, np.concatenate([ca, cb], axis=-2), k)


def apply_J(F: FinslerFunction, p: JetPoint, v) -> TangentVectorTM:
    comps = v.components if isinstance(v, TangentVectorTM) else np.asarray(v, float)
    N = spray_jets(F, p).N.value
    return TangentVectorTM(J_apply(N, comps), p)


def J_matrix(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    """Matrix of ``J`` acting on natural-basis column vectors."""
    N = spray_jets(F, p).N.value
    eye = np.eye(2 * p.n)
    return np.stack([J_apply(N, e) for e in eye], axis=1)


# -- brackets -----------------------------------------------------------


def directional(X: Jet, f: Jet) -> Jet:
    """``X(f) = X^A d_A f`` for field(s) ``X`` of shape ``(..., 2n)``.

    ``f`` may carry its own batch shape; the result has shape
    ``X.shape[:-1] + f.shape``.
    """
    df = f.grad()
    lx = "abcd"[: X.ndim - 1]
    lf = "pqrs"[: f.ndim]
    return jet.einsum(f"{lx}Z,{lf}Z->{lx}{lf}".replace("Z", "z"), X, df)


def bracket(X: Jet, Y: Jet) -> Jet:
    """``[X, Y]^A = X(Y^A) - Y(X^A)`` for matching batch shapes."""
    dX, dY = X.grad(), Y.grad()
    b = "abcd"[: X.ndim - 1]
    return jet.einsum(f"{b}C,{b}AC->{b}A", X, dY) - jet.einsum(f"{b}C,{b}AC->{b}A", Y, dX)


def lie_bracket_field(Xf: Callable, Yf: Callable, p: JetPoint) -> TangentVectorTM:
    """Bracket of two fields given as callables ``(x, y) -> 2n components``."""
    alg = jet.algebra(2 * p.n, 1)
    z = alg.variables(p.z)
    X = jet.stack(list(Xf(z[: p.n], z[p.n :])))
    Y = jet.stack(list(Yf(z[: p.n], z[p.n :])))
    return TangentVectorTM(np.asarray(bracket(X, Y).value, float), p)


@dataclass(frozen=True)
class AdaptedFrame:
    E: np.ndarray
    fields: np.ndarray  # (2n, 2n) rows in frame order
    labels: tuple[str, ...]
    g_ab: np.ndarray
    point: JetPoint

    @property
    def n(self) -> int:
        return self.point.n

    def field(self, label: str) -> TangentVectorTM:
        return TangentVectorTM(self.fields[self.labels.index(label)], self.point)

    def coefficients(self, v) -> np.ndarray:
        """Coefficients of a natural-basis vector in the adapted frame."""
        v = v.components if isinstance(v, TangentVectorTM) else np.asarray(v, float)
        return np.linalg.solve(self.fields.T, v)


def build_adapted_frame(F: FinslerFunction, p: JetPoint, orthonormalize: bool = False) -> AdaptedFrame:
    """Adapted frame at ``p``.

    With ``orthonormalize`` the rows of ``E`` are replaced by a
    g-orthonormal basis of the same space (point values only; the jet
    fields used elsewhere always keep the generic ``E``).
    """
    fj = frame_jets(F, p)
    E = fj.E.value
    g = metric_jets(F, p).g.value
    fields = fj.fields.value
    if orthonormalize:
        chol = np.linalg.cholesky(E @ g @ E.T)
        E = np.linalg.solve(chol, E)
        n = p.n
        hor = fj.hor.value
        fields = fields.copy()
        fields[: n - 1] = E @ hor
        fields[n : 2 * n - 1] = np.hstack([np.zeros((n - 1, n)), E])
    return AdaptedFrame(E, fields, tuple(frame_labels(p.n)), E @ g @ E.T, p)


# -- bracket table ------------------------------------------------------


@dataclass
class BracketReport:
    metric: str
    point: JetPoint
    residuals: dict[str, float]
    tolerance: float
    item8_sign: str
    discrepancies: list[dict]

    @property
    def passed(self) -> bool:
        return all(r < self.tolerance for r in self.residuals.values())


def bracket_table(F: FinslerFunction, p: JetPoint) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Numeric bracket and the closed-form right-hand side for items (1)-(8).

    Both sides are natural-basis components; items with frame indices have
    shape ``(n-1, n-1, 2n)`` or ``(n-1, 2n)``.
    """
    fj = frame_jets(F, p)
    s = spray_jets(F, p)
    n = p.n
    yv = np.array(p.y)
    E = fj.E.value
    N = s.N.value
    B = s.B.value
    R = s.R.value
    hor = fj.hor.value  # (n, 2n)
    ver = np.hstack([np.zeros((n, n)), np.eye(n)])
    dbar, pbar = fj.dbar, fj.pbar
    xi, L = fj.xi.reshape(1, -1), fj.L.reshape(1, -1)
    dE = lambda X: directional(X, fj.E).value  # [field, b, i] = X(E_b^i)
    dE_dbar, dE_pbar = dE(dbar), dE(pbar)
    dE_xi, dE_L = dE(xi)[0], dE(L)[0]
    k = n - 1

    def pairs(X, Y):
        bx = jet.stack([X[a] for a in range(X.shape[0]) for _ in range(Y.shape[0])])
        by = jet.stack([Y[b] for _ in range(X.shape[0]) for b in range(Y.shape[0])])
        return bracket(bx, by).value.reshape(X.shape[0], Y.shape[0], 2 * n)

    out = {}
    lhs = pairs(dbar, dbar)
    t = dE_dbar - dE_dbar.transpose(1, 0, 2)  # [a, b, i] = dbar_a E_b - dbar_b E_a
    rhs = np.einsum("abi,iA->abA", t, hor) + np.einsum("ai,bj,ijk,kA->abA", E, E, R, ver)
    out["1"] = (lhs, rhs)

    lhs = pairs(dbar, pbar)
    rhs = np.einsum("abk,kA->abA", dE_dbar + np.einsum("ai,bj,ijk->abk", E, E, B), ver) - np.einsum(
        "bai,iA->abA", dE_pbar, hor
    )
    out["2"] = (lhs, rhs)

    lhs = pairs(pbar, pbar)
    rhs = np.einsum("abi,iA->abA", dE_pbar - dE_pbar.transpose(1, 0, 2), ver)
    out["3"] = (lhs, rhs)

    lhs = pairs(dbar, xi)[:, 0]
    rhs = -np.einsum("aj,jA->aA", E @ N + dE_xi, hor) + np.einsum("ai,j,ijk,kA->aA", E, yv, R, ver)
    out["4"] = (lhs, rhs)

    lhs = pairs(pbar, xi)[:, 0]
    rhs = dbar.value - np.einsum("aj,jA->aA", dE_xi + E @ N, ver)
    out["5"] = (lhs, rhs)

    lhs = pairs(dbar, L)[:, 0]
    rhs = -np.einsum("ai,iA->aA", dE_L, hor)
    out["6"] = (lhs, rhs)

    lhs = pairs(pbar, L)[:, 0]
    rhs = pbar.value - np.einsum("ai,iA->aA", dE_L, ver)
    out["7"] = (lhs, rhs)

    xx = bracket(xi, xi).value[0]
    ll = bracket(L, L).value[0]
    xl = bracket(xi, L).value[0]
    lhs = np.stack([xx, ll, xl])
    rhs = np.stack([np.zeros(2 * n), np.zeros(2 * n), -xi.value[0]])
    out["8"] = (lhs, rhs)
    assert k >= 1
    return out


def verify_bracket_table(F: FinslerFunction, p: JetPoint, tolerance: float = BRACKET_TOLERANCE) -> BracketReport:
    table = bracket_table(F, p)
    residuals = {k: float(np.max(np.abs(l - r))) for k, (l, r) in table.items()}
    xl = table["8"][0][2]
    xi = frame_jets(F, p).xi.value
    if np.max(np.abs(xl + xi)) < tolerance:
        sign = "[xi,L] = -xi (as stated)"
    elif np.max(np.abs(xl - xi)) < tolerance:
        sign = "[xi,L] = +xi (stated sign is wrong)"
    else:
        sign = "[xi,L] matches neither +xi nor -xi"
    discrepancies = [
        {"metric": F.name, "point": [list(p.x), list(p.y)], "formula": f"bracket item ({k})", "residual": r}
        for k, r in residuals.items()
        if r >= tolerance
    ]
    return BracketReport(F.name, p, residuals, tolerance, sign, discrepancies)
