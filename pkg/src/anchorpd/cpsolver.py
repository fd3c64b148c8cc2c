"""Primal-dual resolvent step as a fixed-point map, with solver assemblies.

The two-line primal-dual update

    p = prox_{tau f}(u - tau K* v)
    q = prox_{sigma g*}(sigma K (2p - u) + v)

is exactly the resolvent-type map the preconditioner geometry expects: plain
iteration of it is the classical primal-dual (Picard) scheme, and feeding it
to the anchored engines yields the accelerated variants.  This module also
carries the shared optimality metrics: the unit-parameter residual mapping and
the per-problem primal-dual gap / objective error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fixpoint
from .fixpoint import Algorithm, IterationTrace, MetricCallback, SolverConfig
from .linops import LinearOperator, dot, operator_norm
from .precond import (
    ADMISSIBILITY_SLACK,
    AdmissibilityError,
    CpPreconditioner,
    PrimalDualPoint,
)
from .problems import (
    LassoInstance,
    MatrixGameInstance,
    game_gap,
    lasso_objective,
    project_simplex,
    prox_gstar_lasso,
    soft_threshold,
)

ProxFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class CpProblem:
    """Saddle-point data ``(f, g*, K)`` with admissible step sizes.

    ``prox_f(y, t)`` must evaluate the prox of ``t * f`` and ``prox_gstar(y, s)``
    the prox of ``s * g*``.
    """

    prox_f: ProxFn
    prox_gstar: ProxFn
    K: LinearOperator
    tau: float
    sigma: float
    norm_K: float

    def __post_init__(self):
        if not (self.tau > 0 and self.sigma > 0):
            raise AdmissibilityError(
                f"step sizes must be positive, got tau={self.tau}, sigma={self.sigma}")
        product = self.tau * self.sigma * self.norm_K**2
        if product > 1.0 + ADMISSIBILITY_SLACK:
            raise AdmissibilityError(
                f"tau*sigma*||K||^2 = {product!r} exceeds 1")


def _steps(K: LinearOperator, tau, sigma, norm_K) -> tuple[float, float, float]:
    if norm_K is None:
        norm_K = operator_norm(K)
    if tau is None or sigma is None:
        if norm_K == 0.0:
            raise AdmissibilityError("cannot derive default step sizes for a zero operator")
        if tau is None:
            tau = 1.0 / norm_K
        if sigma is None:
            sigma = 1.0 / norm_K
    return float(tau), float(sigma), float(norm_K)


def game_cp_problem(inst: MatrixGameInstance, tau: float | None = None,
                    sigma: float | None = None,
                    norm_K: float | None = None) -> CpProblem:
    """Matrix game as a saddle-point problem (both prox maps are simplex projections)."""
    tau, sigma, norm_K = _steps(inst.K, tau, sigma, norm_K)
    return CpProblem(
        prox_f=lambda y, t: project_simplex(y),
        prox_gstar=lambda y, s: project_simplex(y),
        K=inst.K, tau=tau, sigma=sigma, norm_K=norm_K)


def lasso_cp_problem(inst: LassoInstance, tau: float | None = None,
                     sigma: float | None = None,
                     norm_K: float | None = None) -> CpProblem:
    """LASSO as a saddle-point problem: ``f = mu ||.||_1``, ``g = 0.5 ||. - b||^2``."""
    tau, sigma, norm_K = _steps(inst.K, tau, sigma, norm_K)
    return CpProblem(
        prox_f=lambda y, t: soft_threshold(y, t * inst.mu),
        prox_gstar=lambda y, s: prox_gstar_lasso(y, s, inst.b),
        K=inst.K, tau=tau, sigma=sigma, norm_K=norm_K)


def cp_resolvent(x: PrimalDualPoint, prob: CpProblem) -> PrimalDualPoint:
    """One resolvent application; exactly one use each of K and K* beyond the prox calls."""
    p = prob.prox_f(x.u - prob.tau * prob.K.adjoint_apply(x.v), prob.tau)
    q = prob.prox_gstar(prob.sigma * prob.K.apply(2.0 * p - x.u) + x.v, prob.sigma)
    return PrimalDualPoint(p, q)


class CpFixedPointMap:
    """The resolvent step packaged as a deterministic fixed-point map."""

    def __init__(self, prob: CpProblem):
        self.prob = prob
        self.dim_u = prob.K.cols
        self.dim_v = prob.K.rows

    def __call__(self, x: PrimalDualPoint) -> PrimalDualPoint:
        return cp_resolvent(x, self.prob)


def preconditioner(prob: CpProblem) -> CpPreconditioner:
    """The block preconditioner matching the problem's step sizes."""
    return CpPreconditioner(tau=prob.tau, sigma=prob.sigma, K=prob.K,
                            norm_K=prob.norm_K)


def residual_map(x: PrimalDualPoint, prob: CpProblem) -> PrimalDualPoint:
    """Optimality residual ``(u - prox_f(u - K* v), v - prox_{g*}(v + K u))``.

    Both prox maps use parameter 1 here, not the solver's tau and sigma; the
    residual vanishes exactly on the saddle-point set regardless of step sizes.
    """
    ru = x.u - prob.prox_f(x.u - prob.K.adjoint_apply(x.v), 1.0)
    rv = x.v - prob.prox_gstar(x.v + prob.K.apply(x.u), 1.0)
    return PrimalDualPoint(ru, rv)


def residual_norm(x: PrimalDualPoint, prob: CpProblem) -> float:
    r = residual_map(x, prob)
    return math.sqrt(dot(r.u, r.u) + dot(r.v, r.v))


@dataclass(frozen=True)
class LassoGapSpec:
    """Objective-error evaluation data for LASSO: instance plus reference value."""

    instance: LassoInstance
    f_star: float


def pd_gap(p: np.ndarray, q: np.ndarray,
           problem: MatrixGameInstance | LassoGapSpec) -> float:
    """Problem-specific gap: the game gap, or ``F(p) - F*`` for LASSO."""
    if isinstance(problem, MatrixGameInstance):
        return game_gap(p, q, problem.K)
    if isinstance(problem, LassoGapSpec):
        return lasso_objective(p, problem.instance) - problem.f_star
    raise TypeError(f"no gap specialization for {type(problem).__name__}")


def rho_constant(prob: CpProblem) -> float:
    """Scale factor relating the M-residual to the Euclidean residual mapping."""
    return math.sqrt(2.0 * (prob.norm_K**2 + max(prob.tau**-2, prob.sigma**-2)))


@dataclass(frozen=True)
class ConfiguredSolver:
    T: CpFixedPointMap
    M: CpPreconditioner
    config: SolverConfig

    def run(self, x0: PrimalDualPoint, metrics: MetricCallback | None = None,
            phi_override=None) -> IterationTrace:
        return fixpoint.run(self.T, self.M, x0, self.config, metrics=metrics,
                            phi_override=phi_override)


def build_solver(prob: CpProblem, algorithm: Algorithm, max_iters: int,
                 restart_period: int | None = None, stop_tol: float = 0.0,
                 metric_cadence: int = 1,
                 time_limit_seconds: float | None = None) -> ConfiguredSolver:
    cfg = SolverConfig(algorithm=algorithm, max_iters=max_iters,
                       restart_period=restart_period, stop_tol=stop_tol,
                       metric_cadence=metric_cadence,
                       time_limit_seconds=time_limit_seconds)
    return ConfiguredSolver(T=CpFixedPointMap(prob), M=preconditioner(prob), config=cfg)


def build_acp(prob: CpProblem, max_iters: int, **kwargs) -> ConfiguredSolver:
    """Adaptive anchored acceleration of the primal-dual step (no restarts)."""
    return build_solver(prob, Algorithm.PHA, max_iters, **kwargs)
