"""Shared instances and long reference runs for the test suite.

The reduced-scale benchmark set mirrors the full protocol at desk sizes:
the four game variants at (20,20)/(20,20)/(50,50)/(100,50) and a
(200,100,10) LASSO instance.  Reference solutions come from 1e5 plain
primal-dual iterations per instance and are shared session-wide.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import anchorpd as ap
from anchorpd.fixpoint import Algorithm

REFERENCE_ITERS = 100_000

SMALL_GAME_DIMS = {
    "uniform_pm1": (20, 20),
    "normal01": (20, 20),
    "normal0_10": (50, 50),
    "sparse_uniform": (100, 50),
}
SMALL_LASSO_DIMS = (200, 100, 10)  # (q, p, s)


@dataclass
class BenchProblem:
    """One reduced-scale instance with its solver ingredients."""

    name: str
    kind: str  # "game" | "lasso"
    instance: object
    prob: ap.CpProblem
    T: ap.CpFixedPointMap
    M: ap.CpPreconditioner
    x0: ap.PrimalDualPoint


def _game_bench(variant: str) -> BenchProblem:
    inst = ap.gen_matrix_game(variant, seed=50, dims=SMALL_GAME_DIMS[variant])
    prob = ap.game_cp_problem(inst)
    x0 = ap.make_point(np.full(inst.q, 1.0 / inst.q), np.full(inst.p, 1.0 / inst.p))
    return BenchProblem(name=f"game-{variant}", kind="game", instance=inst, prob=prob,
                        T=ap.CpFixedPointMap(prob), M=ap.preconditioner(prob), x0=x0)


def _lasso_bench() -> BenchProblem:
    inst = ap.gen_lasso("gaussian", dims=SMALL_LASSO_DIMS, mu=0.1, seed=100)
    prob = ap.lasso_cp_problem(inst)
    x0 = ap.make_point(np.zeros(inst.q), -inst.b)
    return BenchProblem(name="lasso-gaussian", kind="lasso", instance=inst, prob=prob,
                        T=ap.CpFixedPointMap(prob), M=ap.preconditioner(prob), x0=x0)


@pytest.fixture(scope="session")
def bench_problems() -> dict[str, BenchProblem]:
    problems = {f"game-{v}": _game_bench(v) for v in SMALL_GAME_DIMS}
    problems["lasso-gaussian"] = _lasso_bench()
    return problems


@pytest.fixture(scope="session")
def reference_points(bench_problems) -> dict[str, ap.PrimalDualPoint]:
    """Near-exact fixed points from 1e5 plain primal-dual iterations."""
    refs = {}
    for name, bench in bench_problems.items():
        solver = ap.build_solver(bench.prob, Algorithm.PICARD, REFERENCE_ITERS,
                                 metric_cadence=REFERENCE_ITERS)
        trace = solver.run(bench.x0)
        refs[name] = trace.final_y
    return refs


@pytest.fixture(scope="session")
def lasso_f_star(bench_problems, reference_points) -> float:
    bench = bench_problems["lasso-gaussian"]
    return ap.lasso_objective(reference_points["lasso-gaussian"].u, bench.instance)
