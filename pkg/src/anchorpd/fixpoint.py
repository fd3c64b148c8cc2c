"""Fixed-point iteration engines over a preconditioner geometry.

Four schemes share one driver:

* ``picard``: plain iteration ``x <- T(x)``.
* ``halpern_fixed``: anchored blending with the classical schedule, pulling the
  iterate toward a fixed anchor with weight ``1/(k+2)`` at step ``k``.
* ``pha``: anchored blending with a data-driven anchoring parameter ``phi``
  computed from M-inner products of the residual against the anchor
  displacement; ``phi`` grows at least linearly, often much faster.
* ``restarted_pha`` / ``restarted_halpern``: the same, with the anchor reset to
  the current iterate every ``restart_period`` steps.

Trace indexing convention: the row at index ``k`` holds the iterate ``x^k``,
the mapped point ``y^k = T(x^k)``, their M-distance, and the anchoring
parameter *computed at* ``x^k`` (the one that forms ``x^{k+1}``).  The phi
that formed ``x^k`` therefore sits in row ``k-1``; rate checks must pair rows
accordingly.  This is recorded in trace metadata as ``phi_indexing``.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .precond import CpPreconditioner, PrimalDualPoint, m_inner, point_sub
from .linops import dot

# Below this squared M-residual the iterate is declared an M-fixed point and
# the anchoring parameter is the +inf sentinel (all blend weight on T x).
EPS_DENOMINATOR = 1e-24

PHI_INDEXING_NOTE = "row k holds phi computed at x^k; it forms x^{k+1}"


class NumericDivergenceError(ArithmeticError):
    """An iterate became non-finite."""


class Algorithm(str, enum.Enum):
    PICARD = "picard"
    HALPERN_FIXED = "halpern_fixed"
    PHA = "pha"
    RESTARTED_PHA = "restarted_pha"
    RESTARTED_HALPERN = "restarted_halpern"


RESTARTED = (Algorithm.RESTARTED_PHA, Algorithm.RESTARTED_HALPERN)
ADAPTIVE = (Algorithm.PHA, Algorithm.RESTARTED_PHA)
ANCHORED = (Algorithm.PHA, Algorithm.RESTARTED_PHA,
            Algorithm.HALPERN_FIXED, Algorithm.RESTARTED_HALPERN)


class FixedPointMap(Protocol):
    """Single-valued map with the dimensions of its product space.

    Implementations must be deterministic: the same input yields bitwise
    identical output.
    """

    dim_u: int
    dim_v: int

    def __call__(self, x: PrimalDualPoint) -> PrimalDualPoint: ...


@dataclass(frozen=True)
class AnchorState:
    """Anchor point of the current epoch with the latest anchoring parameter."""

    anchor: PrimalDualPoint
    phi: float
    k_in_epoch: int


@dataclass(frozen=True)
class SolverConfig:
    algorithm: Algorithm
    max_iters: int
    restart_period: int | None = None
    stop_tol: float = 0.0
    metric_cadence: int = 1
    time_limit_seconds: float | None = None

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.metric_cadence < 1:
            raise ValueError(f"metric_cadence must be >= 1, got {self.metric_cadence}")
        if self.algorithm in RESTARTED:
            if self.restart_period is None or self.restart_period < 1:
                raise ValueError(
                    f"{self.algorithm.value} requires restart_period >= 1, "
                    f"got {self.restart_period}"
                )
        elif self.restart_period is not None:
            raise ValueError(
                f"restart_period is only meaningful for restarted variants, "
                f"got {self.restart_period} with {self.algorithm.value}"
            )
        if self.stop_tol < 0:
            raise ValueError(f"stop_tol must be >= 0, got {self.stop_tol}")
        if self.time_limit_seconds is not None and self.time_limit_seconds <= 0:
            raise ValueError("time_limit_seconds must be positive when given")


@dataclass
class TraceRow:
    k: int
    phi: float | None
    m_residual: float
    residual: float | None
    gap: float | None
    objective_error: float | None
    elapsed_seconds: float


@dataclass
class IterationTrace:
    rows: list[TraceRow]
    stop_reason: str
    metadata: dict[str, str] = field(default_factory=dict)
    final_x: PrimalDualPoint | None = None
    final_y: PrimalDualPoint | None = None


# Callback computing the optional metric columns at a recorded step; it
# receives the iterate x^k and the mapped point y^k = T(x^k) and returns any
# of the keys "residual", "gap", "objective_error".
MetricCallback = Callable[[int, PrimalDualPoint, PrimalDualPoint], dict]


def _phi_terms(x_prev: PrimalDualPoint, tx_prev: PrimalDualPoint,
               anchor: PrimalDualPoint, M: CpPreconditioner) -> tuple[float, float]:
    """Denominator ``||x - Tx||_M^2`` and numerator ``2 <x - Tx, x0 - x>_M``.

    Shares the single K application of the residual between both terms;
    bitwise identical to composing :func:`anchorpd.precond.m_inner`.
    """
    du = x_prev.u - tx_prev.u
    dv = x_prev.v - tx_prev.v
    au = anchor.u - x_prev.u
    av = anchor.v - x_prev.v
    k_du = M.K.apply(du)
    k_au = M.K.apply(au)
    den = dot(du, du) / M.tau - dot(k_du, dv) - dot(k_du, dv) + dot(dv, dv) / M.sigma
    num = 2.0 * (dot(du, au) / M.tau - dot(k_du, av) - dot(k_au, dv) + dot(dv, av) / M.sigma)
    return den, num


def phi_update(x_prev: PrimalDualPoint, tx_prev: PrimalDualPoint,
               anchor: PrimalDualPoint, M: CpPreconditioner,
               eps_den: float = EPS_DENOMINATOR) -> float:
    """Adaptive anchoring parameter computed at ``x_prev``.

    Returns ``2 <x - Tx, anchor - x>_M / ||x - Tx||_M^2 + 1``, clipped below at
    its analytic first-step value 1.  A squared M-residual at or below
    ``eps_den`` yields the ``+inf`` sentinel: the iterate is an M-fixed point
    and all blend weight belongs on ``T x``.
    """
    den, num = _phi_terms(x_prev, tx_prev, anchor, M)
    if den <= eps_den:
        return math.inf
    return max(1.0, num / den + 1.0)


def _blend(anchor: PrimalDualPoint, tx: PrimalDualPoint, phi: float) -> PrimalDualPoint:
    """Convex combination ``(1/(phi+1)) anchor + (phi/(phi+1)) tx``."""
    if math.isinf(phi):
        return tx
    w0 = 1.0 / (phi + 1.0)
    w1 = phi / (phi + 1.0)
    return PrimalDualPoint(w0 * anchor.u + w1 * tx.u, w0 * anchor.v + w1 * tx.v)


def _check_finite(x: PrimalDualPoint, what: str) -> None:
    if not (np.isfinite(x.u).all() and np.isfinite(x.v).all()):
        raise NumericDivergenceError(f"{what} contains non-finite entries")


def picard_step(x: PrimalDualPoint, T: FixedPointMap) -> PrimalDualPoint:
    """One plain fixed-point step ``T(x)``."""
    y = T(x)
    _check_finite(y, "picard iterate")
    return y


def halpern_fixed_step(k: int, anchor: PrimalDualPoint, x_prev: PrimalDualPoint,
                       T: FixedPointMap) -> PrimalDualPoint:
    """Fixed-schedule anchored step ``(1/(k+2)) anchor + ((k+1)/(k+2)) T(x_prev)``."""
    if k < 0:
        raise ValueError(f"step index must be >= 0, got {k}")
    y = T(x_prev)
    out = _blend(anchor, y, float(k + 1))
    _check_finite(out, "halpern iterate")
    return out


def pha_step(state: AnchorState, x_prev: PrimalDualPoint, T: FixedPointMap,
             M: CpPreconditioner) -> tuple[PrimalDualPoint, AnchorState]:
    """One adaptive anchored step from ``x_prev``.

    Evaluates ``T`` once, computes phi at ``x_prev`` and blends.  On the +inf
    sentinel the mapped point is returned unchanged; the returned state then
    carries ``phi = inf``, flagging convergence to an M-fixed point.
    """
    y = T(x_prev)
    phi = phi_update(x_prev, y, state.anchor, M)
    out = _blend(state.anchor, y, phi)
    _check_finite(out, "anchored iterate")
    return out, AnchorState(state.anchor, phi, state.k_in_epoch + 1)


def run(T: FixedPointMap, M: CpPreconditioner, x0: PrimalDualPoint,
        cfg: SolverConfig, metrics: MetricCallback | None = None,
        phi_override: Callable[[int], float] | None = None) -> IterationTrace:
    """Drive the configured scheme from ``x0`` and collect an iteration trace.

    Rows are recorded every ``metric_cadence`` steps and always at the final
    step.  The run ends at ``max_iters``, on ``||x - Tx||_M <= stop_tol``
    (when ``stop_tol > 0``), on the M-fixed-point sentinel, or on the time
    limit.  Wall time accumulates around the step work only (T evaluation,
    anchoring parameter, blend); metric evaluation is excluded.

    ``phi_override`` maps the in-epoch step index to a forced anchoring
    parameter for anchored variants (diagnostic hook; the fixed Halpern
    schedule is ``phi = k_in_epoch + 1``).
    """
    algorithm = cfg.algorithm
    adaptive = algorithm in ADAPTIVE
    anchored = algorithm in ANCHORED
    restarted = algorithm in RESTARTED

    x = x0
    anchor = x0
    epoch_step = 0
    elapsed = 0.0
    wall_start = time.perf_counter()
    rows: list[TraceRow] = []
    k = 0
    stop = None
    y = x0

    while True:
        if restarted and k > 0 and k % cfg.restart_period == 0:
            anchor = x
            epoch_step = 0

        t0 = time.perf_counter()
        y = T(x)
        _check_finite(y, "mapped point")
        d = point_sub(x, y)
        phi: float | None
        sentinel = False
        if adaptive and phi_override is None:
            den, num = _phi_terms(x, y, anchor, M)
            sentinel = den <= EPS_DENOMINATOR
            phi = math.inf if sentinel else max(1.0, num / den + 1.0)
        else:
            den = m_inner(d, d, M)
            if anchored:
                phi = float(phi_override(epoch_step)) if phi_override is not None \
                    else float(epoch_step + 1)
            else:
                phi = None
        m_res = math.sqrt(max(den, 0.0))
        elapsed += time.perf_counter() - t0

        if cfg.stop_tol > 0.0 and m_res <= cfg.stop_tol:
            stop = "converged"
        elif sentinel:
            stop = "m_fixed_point"
        elif k >= cfg.max_iters:
            stop = "max_iters"
        elif (cfg.time_limit_seconds is not None
              and time.perf_counter() - wall_start > cfg.time_limit_seconds):
            stop = "time_limit"

        if k % cfg.metric_cadence == 0 or stop is not None:
            extra = metrics(k, x, y) if metrics is not None else {}
            rows.append(TraceRow(
                k=k, phi=phi, m_residual=m_res,
                residual=extra.get("residual"),
                gap=extra.get("gap"),
                objective_error=extra.get("objective_error"),
                elapsed_seconds=elapsed,
            ))
        if stop is not None:
            break

        t0 = time.perf_counter()
        x = _blend(anchor, y, phi) if anchored else y
        _check_finite(x, "iterate")
        elapsed += time.perf_counter() - t0
        epoch_step += 1
        k += 1

    metadata = {
        "engine_algorithm": algorithm.value,
        "max_iters": str(cfg.max_iters),
        "restart_period": "" if cfg.restart_period is None else str(cfg.restart_period),
        "stop_tol": repr(cfg.stop_tol),
        "metric_cadence": str(cfg.metric_cadence),
        "phi_indexing": PHI_INDEXING_NOTE,
        "stop_reason": stop,
    }
    return IterationTrace(rows=rows, stop_reason=stop, metadata=metadata,
                          final_x=x, final_y=y)
