"""Block preconditioner geometry for primal-dual splitting.

The preconditioner pairs a step size ``tau`` for the primal block with
``sigma`` for the dual block around a coupling operator ``K``:

    M = [[ I/tau,  -K* ],
         [ -K,    I/sigma ]]

``M`` is symmetric positive semidefinite exactly when
``tau * sigma * ||K||^2 <= 1``; on the boundary it is singular (degenerate),
which is the interesting regime for the step rule ``tau = sigma = 1/||K||``.
``M`` induces the semi-inner product ``<x, y>_M = <M x, y>`` and seminorm
``||x||_M``; the hot-path routines below evaluate these through applications
of ``K`` without materializing ``M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linops import DenseOperator, DimensionMismatchError, LinearOperator, dot, operator_norm

# Slack on tau*sigma*||K||^2 <= 1, absorbing rounding in the norm estimate.
ADMISSIBILITY_SLACK = 1e-12
# Quadratic-form values in [-clamp * ||x||^2, 0) count as rounding noise and
# are clamped to zero; anything below is treated as an inadmissible M.
SEMINORM_CLAMP = 1e-9


class AdmissibilityError(ValueError):
    """The (tau, sigma, K) triple does not define a positive semidefinite M."""


class PrimalDualPoint(NamedTuple):
    """Joint iterate ``x = (u, v)`` in the product of primal and dual spaces."""

    u: np.ndarray
    v: np.ndarray


def make_point(u, v) -> PrimalDualPoint:
    """Build a point from array-likes, coercing to float64 vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1:
        raise DimensionMismatchError("primal and dual components must be 1-d vectors")
    return PrimalDualPoint(u, v)


def point_sub(x: PrimalDualPoint, y: PrimalDualPoint) -> PrimalDualPoint:
    return PrimalDualPoint(x.u - y.u, x.v - y.v)


@dataclass(frozen=True)
class CpPreconditioner:
    """Step sizes and coupling operator defining M, with the norm of K cached."""

    tau: float
    sigma: float
    K: LinearOperator
    norm_K: float

    def __post_init__(self):
        if not (self.tau > 0 and self.sigma > 0):
            raise AdmissibilityError(
                f"step sizes must be positive, got tau={self.tau}, sigma={self.sigma}"
            )
        if self.norm_K < 0:
            raise AdmissibilityError(f"norm_K must be nonnegative, got {self.norm_K}")
        product = self.tau * self.sigma * self.norm_K**2
        if product > 1.0 + ADMISSIBILITY_SLACK:
            raise AdmissibilityError(
                f"tau*sigma*||K||^2 = {product!r} exceeds 1; M is not positive semidefinite"
            )

    @property
    def dim_u(self) -> int:
        return self.K.cols

    @property
    def dim_v(self) -> int:
        return self.K.rows


def make_preconditioner(K: LinearOperator, tau: float | None = None,
                        sigma: float | None = None,
                        norm_K: float | None = None) -> CpPreconditioner:
    """Preconditioner for ``K``; omitted step sizes default to ``1/||K||``."""
    if norm_K is None:
        norm_K = operator_norm(K)
    if tau is None or sigma is None:
        if norm_K == 0.0:
            raise AdmissibilityError("cannot derive default step sizes for a zero operator")
        default = 1.0 / norm_K
        tau = default if tau is None else tau
        sigma = default if sigma is None else sigma
    return CpPreconditioner(tau=tau, sigma=sigma, K=K, norm_K=norm_K)


def _check_point(x: PrimalDualPoint, M: CpPreconditioner) -> None:
    if x.u.shape != (M.dim_u,) or x.v.shape != (M.dim_v,):
        raise DimensionMismatchError(
            f"point has shapes ({x.u.shape}, {x.v.shape}), preconditioner expects "
            f"(({M.dim_u},), ({M.dim_v},))"
        )


def m_inner(x: PrimalDualPoint, y: PrimalDualPoint, M: CpPreconditioner) -> float:
    """Semi-inner product ``<M x, y>``, evaluated through applications of K.

    Expands to ``<u_x, u_y>/tau - <K u_x, v_y> - <K u_y, v_x> + <v_x, v_y>/sigma``.
    """
    _check_point(x, M)
    _check_point(y, M)
    k_ux = M.K.apply(x.u)
    k_uy = k_ux if y is x else M.K.apply(y.u)
    return (
        dot(x.u, y.u) / M.tau
        - dot(k_ux, y.v)
        - dot(k_uy, x.v)
        + dot(x.v, y.v) / M.sigma
    )


def m_seminorm(x: PrimalDualPoint, M: CpPreconditioner) -> float:
    """Seminorm ``sqrt(<x, x>_M)`` with clamping of rounding-level negatives."""
    q = m_inner(x, x, M)
    if q < 0.0:
        scale = dot(x.u, x.u) + dot(x.v, x.v)
        if q < -SEMINORM_CLAMP * scale:
            raise AdmissibilityError(
                f"quadratic form is materially negative ({q!r}); M is not admissible"
            )
        q = 0.0
    return math.sqrt(q)


def m_distance(x: PrimalDualPoint, y: PrimalDualPoint, M: CpPreconditioner) -> float:
    return m_seminorm(point_sub(x, y), M)


def assemble_matrix(M: CpPreconditioner) -> np.ndarray:
    """Materialize M as a dense ``(dim_u + dim_v)`` square array (diagnostics only)."""
    Kd = M.K.to_dense()
    q, p = M.dim_u, M.dim_v
    return np.block([
        [np.eye(q) / M.tau, -Kd.T],
        [-Kd, np.eye(p) / M.sigma],
    ])


def lipschitz_bound(M: CpPreconditioner) -> float:
    """Bound on the norm-to-norm Lipschitz constant of the resolvent step.

    The resolvent of the splitting is Lipschitz with constant
    ``L = max(sqrt(2)*sigma, tau*sqrt(8*sigma^2*||K||^2 + 1))`` and composing
    with the factor ``C`` of ``M = C C*`` costs ``||C|| = sqrt(||M||)``; the
    product bounds how far apart images can drift per unit of M-distance.
    Uses a dense eigen-estimate of ``||M||``, so diagnostics-path only.
    """
    L = max(math.sqrt(2.0) * M.sigma,
            M.tau * math.sqrt(8.0 * M.sigma**2 * M.norm_K**2 + 1.0))
    norm_M = operator_norm(DenseOperator(assemble_matrix(M)))
    return L * math.sqrt(norm_M)
