"""Finsler functions, the fundamental tensor and its y-derivative."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import jet
from .jet import DomainError, Jet, JetPoint

# Deepest Taylor order of F^2 carried by the geometry pipeline: curvature of
# the Sasaki metric differentiates the nonlinear connection twice more.
DEFAULT_ORDER = 5
PIVOT_TOLERANCE = 1e-10


class DegenerateMetricError(Exception):
    """The y-Hessian of F^2/2 is not positive definite at the point."""


@dataclass(frozen=True)
class FinslerFunction:
    """Fundamental function ``F(x, y)`` of an ``n``-dimensional Finsler manifold.

    ``func`` receives sequences ``x`` and ``y`` whose entries are either floats
    or scalar jets, and must only use arithmetic plus the dispatching
    functions of :mod:`ftb.jet` (``sqrt``, ``exp``, ...).
    """

    name: str
    n: int
    func: Callable = field(compare=True, repr=False)
    params: tuple = ()

    def __call__(self, x, y):
        return self.func(x, y)

    def squared(self, x, y):
        f = self.func(x, y)
        return f * f

    def value(self, p: JetPoint) -> float:
        return float(self.func(np.array(p.x), np.array(p.y)))


def _norm(y):
    return jet.sqrt(sum(v * v for v in y))


def euclidean(n: int = 2) -> FinslerFunction:
    return FinslerFunction("euclidean", n, _euclidean_F, (("n", n),))


def _euclidean_F(x, y):
    return _norm(y)


def _riemannian2d_F(x, y):
    return jet.sqrt(y[0] * y[0] + jet.exp(2 * x[0]) * y[1] * y[1])


def riemannian2d() -> FinslerFunction:
    """``g(x) = diag(1, exp(2 x^1))``: a curved Riemannian surface."""
    return FinslerFunction("riemannian2d", 2, _riemannian2d_F, (("n", 2),))


@dataclass(frozen=True)
class _RandersConst:
    b: tuple

    def __call__(self, x, y):
        return _norm(y) + sum(bi * yi for bi, yi in zip(self.b, y))


@dataclass(frozen=True)
class _RandersVar:
    amplitude: float

    def __call__(self, x, y):
        b1 = self.amplitude * (1 + x[1])
        return _norm(y) + b1 * y[0]


def randers_const(n: int = 2, b=None) -> FinslerFunction:
    """Randers metric ``|y| + <b, y>`` with constant ``b``, ``|b| < 1``."""
    b = (0.1,) + (0.0,) * (n - 1) if b is None else tuple(float(v) for v in b)
    if len(b) != n:
        raise ValueError(f"b has {len(b)} entries, expected {n}")
    if np.linalg.norm(b) >= 1:
        raise ValueError("Randers drift must satisfy |b| < 1")
    return FinslerFunction("randers_const", n, _RandersConst(b), (("n", n), ("b", b)))


def randers_var(n: int = 2, amplitude: float = 0.1) -> FinslerFunction:
    """Randers metric ``|y| + b_1(x) y^1`` with ``b_1 = amplitude (1 + x^2)``.

    The drift is not closed, so the spray, Berwald and curvature tensors are
    all nonzero.  ``|b| < 1`` holds for ``|x^2| < 1/amplitude - 1``.
    """
    return FinslerFunction(
        "randers_var", n, _RandersVar(float(amplitude)), (("n", n), ("amplitude", float(amplitude)))
    )


REGISTRY: dict[str, Callable[..., FinslerFunction]] = {
    "euclidean": euclidean,
    "riemannian2d": riemannian2d,
    "randers_const": randers_const,
    "randers_var": randers_var,
}


def list_metrics() -> list[str]:
    return sorted(REGISTRY)


def get_metric(name: str, **params) -> FinslerFunction:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown metric {name!r}; known: {', '.join(list_metrics())}") from None
    return factory(**params)


def randers_closed_form_g(y, b) -> np.ndarray:
    """Fundamental tensor of ``|y| + <b, y>`` written out by hand."""
    y = np.asarray(y, float)
    b = np.asarray(b, float)
    alpha = np.linalg.norm(y)
    F = alpha + b @ y
    u = y / alpha + b
    return (F / alpha) * (np.eye(len(y)) - np.outer(y, y) / alpha**2) + np.outer(u, u)


# -- local expansions ----------------------------------------------------


def cholesky_pivots(m: np.ndarray) -> np.ndarray:
    """Pivots of an unpivoted Cholesky factorisation (``nan`` once one fails)."""
    a = np.array(m, dtype=float)
    n = len(a)
    piv = np.full(n, np.nan)
    for k in range(n):
        d = a[k, k]
        piv[k] = d
        if d <= PIVOT_TOLERANCE:
            return piv
        a[k + 1 :, k] /= np.sqrt(d)
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k + 1 :, k])
        a[k, k + 1 :] = a[k + 1 :, k]
    return piv


def is_positive_definite(m: np.ndarray) -> bool:
    piv = cholesky_pivots(m)
    return bool(np.all(piv > PIVOT_TOLERANCE))


@dataclass(frozen=True)
class MetricJets:
    """Taylor data of the metric quantities around one chart point."""

    F: FinslerFunction
    point: JetPoint
    z: Jet  # coordinate functions, (2n,)
    Fval: Jet  # F
    F2: Jet  # F^2
    gy: Jet  # g_ij y^j = (1/2) dF^2/dy^i, (n,)
    g: Jet  # (n, n)
    g_inv: Jet  # (n, n)
    g3: Jet  # dg_ij/dy^k, (n, n, n)

    @property
    def n(self) -> int:
        return self.point.n

    @property
    def x(self) -> Jet:
        return self.z[: self.n]

    @property
    def y(self) -> Jet:
        return self.z[self.n :]


@lru_cache(maxsize=512)
def metric_jets(F: FinslerFunction, p: JetPoint, order: int = DEFAULT_ORDER) -> MetricJets:
    if p.n != F.n:
        raise DomainError(f"point has dimension {p.n}, metric {F.name} has {F.n}")
    n = p.n
    alg = jet.algebra(2 * n, order)
    z = alg.variables(p.z)
    Fv = F(z[:n], z[n:])
    if not isinstance(Fv, Jet):
        Fv = alg.constant(Fv)
    if Fv.value <= 0:
        raise DegenerateMetricError(f"F = {Fv.value} is not positive at {p}")
    F2 = Fv * Fv
    dF2 = F2.grad()  # (2n,)
    gy = dF2[n:] * 0.5
    g = gy.grad()[:, n:]
    g = (g + g.T) * 0.5
    gval = g.value
    if not is_positive_definite(gval):
        raise DegenerateMetricError(
            f"fundamental tensor of {F.name} is not positive definite at {p}: pivots {cholesky_pivots(gval)}"
        )
    g_inv = jet.inv(g)
    g3 = g.grad()[:, :, n:]
    return MetricJets(F, p, z, Fv, F2, gy, g, g_inv, g3)


@dataclass(frozen=True)
class FundamentalTensor:
    g: np.ndarray
    g_inv: np.ndarray
    F_value: float
    point: JetPoint


@dataclass(frozen=True)
class CartanLowered:
    g3: np.ndarray  # g3[i, j, k] = dg_ij / dy^k
    point: JetPoint


def fundamental_tensor(F: FinslerFunction, p: JetPoint) -> FundamentalTensor:
    """``g_ij = (1/2) d^2 F^2 / dy^i dy^j`` at ``p``, with inverse and ``F(p)``."""
    m = metric_jets(F, p)
    return FundamentalTensor(m.g.value, m.g_inv.value, m.Fval.value, p)


def cartan_lowered(F: FinslerFunction, p: JetPoint) -> CartanLowered:
    return CartanLowered(metric_jets(F, p).g3.value, p)


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


def homogeneity_report(F: FinslerFunction, p: JetPoint, lambdas=(0.5, 2.0, 3.0), threshold: float = 1e-8) -> dict:
    """Relative defects of the homogeneity degrees of ``F`` (1), ``g`` (0) and ``G^i`` (2)."""
    from .spray import spray_coeffs

    defects = {"F": 0.0, "g": 0.0, "G": 0.0}
    errors = []
    F0 = F.value(p)
    try:
        g0 = fundamental_tensor(F, p).g
        G0 = spray_coeffs(F, p)
    except (DegenerateMetricError, DomainError) as exc:
        g0 = G0 = None
        errors.append(str(exc))
    for lam in lambdas:
        if lam <= 0:
            raise ValueError("homogeneity samples must be positive")
        q = JetPoint(p.x, tuple(lam * v for v in p.y))
        defects["F"] = max(defects["F"], _rel(F.value(q), lam * F0))
        if g0 is None:
            continue
        try:
            defects["g"] = max(defects["g"], _rel(fundamental_tensor(F, q).g, g0))
            defects["G"] = max(defects["G"], _rel(spray_coeffs(F, q), lam**2 * G0) if np.any(G0) else float(np.max(np.abs(spray_coeffs(F, q)))))
        except (DegenerateMetricError, DomainError) as exc:
            errors.append(str(exc))
    flagged = bool(errors) or any(v > threshold for v in defects.values())
    return {"metric": F.name, "lambdas": list(lambdas), "defects": defects, "flagged": flagged, "errors": errors}


def to_indicatrix(F: FinslerFunction, p: JetPoint, tol: float = 1e-12, max_iter: int = 25) -> JetPoint:
    """Rescale ``y`` so that ``F(x, y) = 1``, by Newton iteration on ``lam``.

    Solves ``F(x, lam y) = 1``; ``d/dlam F(x, lam y) = dF/dy(x, lam y) . y``.
    """
    x = np.array(p.x)
    y = np.array(p.y)
    lam = 1.0
    for _ in range(max_iter):
        q = JetPoint(p.x, tuple(lam * y))
        r = F.value(q) - 1.0
        if abs(r) < tol:
            return q
        alg = jet.algebra(1, 1)
        t = alg.variables([lam])[0]
        slope = F(x, [t * v for v in y]).derivative((0,))
        lam -= r / slope
        if not lam > 0:
            raise DomainError(f"indicatrix normalisation left the positive ray at {p}")
    q = JetPoint(p.x, tuple(lam * y))
    if abs(F.value(q) - 1.0) >= tol:
        raise DomainError(f"indicatrix normalisation did not converge at {p}")
    return q
