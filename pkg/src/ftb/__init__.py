"""Point-wise geometry of the tangent bundle of a Finsler manifold.

Truncated Taylor jets supply exact derivatives of a fundamental function
``F(x, y)``; on top of them the package builds the fundamental tensor, the
spray and nonlinear connection, an adapted frame of ``TTM``, the Sasaki
metric with its Levi-Civita connection and curvature, foliation defects and
the contact structure of the indicatrix bundle.
"""

from .finsler import (
    DegenerateMetricError,
    FinslerFunction,
    fundamental_tensor,
    get_metric,
    list_metrics,
    to_indicatrix,
)
from .jet import DomainError, JetError, JetPoint, OracleUnstableError, UnsupportedOrderError, fd_oracle, partial

__all__ = [
    "DegenerateMetricError",
    "DomainError",
    "FinslerFunction",
    "JetError",
    "JetPoint",
    "OracleUnstableError",
    "UnsupportedOrderError",
    "fd_oracle",
    "fundamental_tensor",
    "get_metric",
    "list_metrics",
    "partial",
    "to_indicatrix",
]
