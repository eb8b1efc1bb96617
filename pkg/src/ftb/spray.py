"""Spray, nonlinear connection, Berwald coefficients and hv-curvature.

Array index order is "lower indices, then the upper one":
``N[i, j] = G_i^j``, ``B[i, j, k] = G_ij^k`` and ``R[i, j, k] = R_ij^k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import jet
from .finsler import DEFAULT_ORDER, FinslerFunction, metric_jets
from .jet import Jet, JetPoint, ScalarField


@dataclass(frozen=True)
class SprayJets:
    Gi: Jet  # (n,)
    N: Jet  # (n, n)
    B: Jet  # (n, n, n)
    R: Jet  # (n, n, n)


@lru_cache(maxsize=512)
def spray_jets(F: FinslerFunction, p: JetPoint, order: int = DEFAULT_ORDER) -> SprayJets:
    m = metric_jets(F, p, order)
    n = p.n
    d2 = m.F2.grad().grad()  # (2n, 2n)
    dy_dx = d2[n:, :n]  # d^2 F^2 / dy^j dx^k
    dx = m.F2.grad()[:n]
    inner = jet.einsum("jk,k->j", dy_dx, m.y) - dx
    Gi = jet.einsum("ij,j->i", m.g_inv, inner) * 0.25
    N = Gi.grad()[:, n:].T  # N[i, j] = dG^j/dy^i
    dN = N.grad()  # (n, n, 2n)
    B = dN[:, :, n:].transpose(0, 2, 1)  # B[i, j, k] = dG_i^k / dy^j
    # delta_j G_i^k = dG_i^k/dx^j - G_j^l dG_i^k/dy^l
    dNx = dN[:, :, :n]  # [i, k, j]
    dNy = dN[:, :, n:]  # [i, k, l]
    delta = dNx - jet.einsum("ikl,jl->ikj", dNy, N)  # [i, k, j] = delta_j G_i^k
    R = delta.transpose(0, 2, 1) - delta.transpose(2, 0, 1)
    return SprayJets(Gi, N, B, R)


@dataclass(frozen=True)
class SprayData:
    Gi: np.ndarray
    N: np.ndarray
    B: np.ndarray
    R: np.ndarray
    point: JetPoint


def spray_data(F: FinslerFunction, p: JetPoint) -> SprayData:
    s = spray_jets(F, p)
    return SprayData(s.Gi.value, s.N.value, s.B.value, s.R.value, p)


def spray_coeffs(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    return spray_jets(F, p).Gi.value


def nonlinear_connection(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    return spray_jets(F, p).N.value


def berwald_coeffs(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    return spray_jets(F, p).B.value


def hv_curvature(F: FinslerFunction, p: JetPoint) -> np.ndarray:
    """``R[i, j, k] = delta_j G_i^k - delta_i G_j^k``; antisymmetric in ``(i, j)``."""
    return spray_jets(F, p).R.value


def delta_derivative(f: ScalarField, F: FinslerFunction, p: JetPoint, i: int) -> float:
    """``delta f / delta x^i = df/dx^i - G_i^j df/dy^j`` at ``p``."""
    n = p.n
    fj = jet.evaluate_jet(f, p, 1)
    if not isinstance(fj, Jet):
        return 0.0
    grad = fj.grad().value
    N = nonlinear_connection(F, p)
    return float(grad[i] - N[i] @ grad[n:])


def horizontal_basis(F: FinslerFunction, p: JetPoint, order: int = DEFAULT_ORDER) -> Jet:
    """Natural-basis components of ``delta/delta x^i`` as a ``(n, 2n)`` jet field."""
    N = spray_jets(F, p, order).N
    n = p.n
    alg = N.alg
    eye = alg.constant(np.eye(n), N.order)
    return jet.stack([eye, -N], axis=1).reshape(n, 2 * n)
