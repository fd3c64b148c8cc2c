"""Benchmark problem generators, proximal maps and metrics.

Two problem families are supported:

* minimax matrix games ``min_{u in simplex} max_{v in simplex} <K u, v>``,
  with four payoff-matrix generation variants;
* LASSO ``min_u 0.5 ||K u - b||^2 + mu ||u||_1`` with a planted sparse signal,
  with Gaussian and column-correlated design variants.

Instances are deterministic functions of ``(variant, dims, seed)``.  Random
draws come from numpy's PCG64 generator keyed by ``SeedSequence(seed,
spawn_key=(stream,))`` with a fixed stream assignment per quantity (matrix
entries, support pattern, signal values, noise), so the same seed always
reproduces the same instance on a given numpy build.  Normal distributions
are parameterized as N(mean, standard deviation) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linops import (
    DenseOperator,
    DimensionMismatchError,
    LinearOperator,
    SparseOperator,
    as_vector,
    dot,
)

GAME_VARIANT_DIMS = {
    "uniform_pm1": (100, 100),
    "normal01": (100, 100),
    "normal0_10": (500, 500),
    "sparse_uniform": (1000, 500),
}
LASSO_VARIANTS = ("gaussian", "correlated")
LASSO_DEFAULT_DIMS = (2000, 1000, 100)  # (q, p, s)
LASSO_DEFAULT_MU = 0.1
LASSO_DEFAULT_CORR = 0.5
LASSO_NOISE_STD = 0.1
SPARSE_FILL = 0.10

# Fixed stream assignment for SeedSequence spawn keys.
_STREAM_ENTRIES = 0
_STREAM_SUPPORT = 1
_STREAM_SIGNAL = 2
_STREAM_NOISE = 3

GAME_FEASIBILITY_SLACK = 1e-8


class FeasibilityError(ValueError):
    """An input violates a feasibility precondition beyond the allowed slack."""


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


@dataclass(frozen=True)
class MatrixGameInstance:
    K: LinearOperator
    variant: str
    seed: int

    @property
    def p(self) -> int:
        return self.K.rows

    @property
    def q(self) -> int:
        return self.K.cols


@dataclass(frozen=True)
class LassoInstance:
    K: LinearOperator
    b: np.ndarray
    mu: float
    u_star: np.ndarray
    s: int
    variant: str
    corr_v: float | None
    seed: int

    @property
    def p(self) -> int:
        return self.K.rows

    @property
    def q(self) -> int:
        return self.K.cols


def gen_matrix_game(variant: str, seed: int,
                    dims: tuple[int, int] | None = None) -> MatrixGameInstance:
    """Payoff matrix instance for ``(variant, seed)``.

    Variants (default dims in :data:`GAME_VARIANT_DIMS`, overridable for
    reduced-scale runs): ``uniform_pm1`` draws entries uniformly from [-1, 1];
    ``normal01`` from N(0, 1); ``normal0_10`` from N(0, 10); and
    ``sparse_uniform`` fills 10% of the entries (positions uniform without
    replacement, values uniform in [0, 1]).
    """
    if variant not in GAME_VARIANT_DIMS:
        raise ValueError(f"unknown matrix-game variant {variant!r}")
    p, q = GAME_VARIANT_DIMS[variant] if dims is None else dims
    if p < 1 or q < 1:
        raise ValueError(f"dims must be positive, got ({p}, {q})")
    rng = _stream(seed, _STREAM_ENTRIES)
    if variant == "uniform_pm1":
        K = DenseOperator(rng.uniform(-1.0, 1.0, (p, q)))
    elif variant == "normal01":
        K = DenseOperator(rng.normal(0.0, 1.0, (p, q)))
    elif variant == "normal0_10":
        K = DenseOperator(rng.normal(0.0, 10.0, (p, q)))
    else:
        nnz = round(SPARSE_FILL * p * q)
        if nnz < 1:
            raise ValueError(f"dims ({p}, {q}) give an empty sparse pattern")
        flat = _stream(seed, _STREAM_SUPPORT).choice(p * q, size=nnz, replace=False)
        values = rng.uniform(0.0, 1.0, nnz)
        K = SparseOperator(p, q, flat // q, flat % q, values)
    return MatrixGameInstance(K=K, variant=variant, seed=seed)


def gen_lasso(variant: str = "gaussian",
              dims: tuple[int, int, int] = LASSO_DEFAULT_DIMS,
              mu: float = LASSO_DEFAULT_MU,
              corr_v: float | None = None,
              seed: int = 100) -> LassoInstance:
    """LASSO instance with a planted ``s``-sparse signal.

    ``dims`` is ``(q, p, s)``.  The design matrix is i.i.d. N(0, 1) for
    ``gaussian``; for ``correlated`` the columns follow the recursion
    ``K_1 = A_1 / sqrt(1 - v^2)``, ``K_j = v K_{j-1} + A_j`` with i.i.d.
    N(0, 1) ``A`` so that adjacent columns have correlation ``v``.  The signal
    support is uniform without replacement, its values uniform in [-10, 10],
    and ``b = K u_star + noise`` with N(0, 0.1) noise.
    """
    if variant not in LASSO_VARIANTS:
        raise ValueError(f"unknown LASSO variant {variant!r}")
    q, p, s = dims
    if q < 1 or p < 1 or not 0 < s <= q:
        raise ValueError(f"invalid dims (q, p, s) = {dims}")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if variant == "correlated":
        v = LASSO_DEFAULT_CORR if corr_v is None else corr_v
        if not 0.0 <= v < 1.0:
            raise ValueError(f"corr_v must lie in [0, 1), got {v}")
    elif corr_v is not None:
        raise ValueError("corr_v only applies to the correlated variant")
    else:
        v = None

    rng = _stream(seed, _STREAM_ENTRIES)
    a = rng.normal(0.0, 1.0, (p, q))
    if variant == "correlated":
        k = np.empty_like(a)
        k[:, 0] = a[:, 0] / math.sqrt(1.0 - v**2)
        for j in range(1, q):
            k[:, j] = v * k[:, j - 1] + a[:, j]
    else:
        k = a
    K = DenseOperator(k)

    support = _stream(seed, _STREAM_SUPPORT).choice(q, size=s, replace=False)
    sig_rng = _stream(seed, _STREAM_SIGNAL)
    values = sig_rng.uniform(-10.0, 10.0, s)
    while np.any(values == 0.0):  # keep the support size exactly s
        zero = values == 0.0
        values[zero] = sig_rng.uniform(-10.0, 10.0, int(zero.sum()))
    u_star = np.zeros(q)
    u_star[support] = values

    noise = _stream(seed, _STREAM_NOISE).normal(0.0, LASSO_NOISE_STD, p)
    b = K.apply(u_star) + noise
    return LassoInstance(K=K, b=b, mu=float(mu), u_star=u_star, s=int(s),
                         variant=variant, corr_v=v, seed=seed)


def project_simplex(y) -> np.ndarray:
    """Euclidean projection onto the unit simplex ``{x : sum x = 1, x >= 0}``.

    Sort-and-threshold method: sort descending, find the largest prefix whose
    running-average shift keeps its last element positive, subtract that shift
    and clip.  Ties in the sort are broken by index; the projection value does
    not depend on the tie order.
    """
    y = as_vector(y)
    if y.size == 0:
        raise DimensionMismatchError("cannot project an empty vector")
    u = np.sort(y)[::-1]
    cumulative = np.cumsum(u)
    counts = np.arange(1, y.size + 1)
    positive = u - (cumulative - 1.0) / counts > 0
    rho = int(np.nonzero(positive)[0][-1])
    theta = (cumulative[rho] - 1.0) / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def _check_feasible(x: np.ndarray, name: str) -> None:
    if abs(float(x.sum()) - 1.0) > GAME_FEASIBILITY_SLACK or \
            float(x.min()) < -GAME_FEASIBILITY_SLACK:
        raise FeasibilityError(f"{name} is not on the unit simplex (slack "
                               f"{GAME_FEASIBILITY_SLACK:g}); project first")


def game_gap(u: np.ndarray, v: np.ndarray, K: LinearOperator) -> float:
    """Primal-dual gap ``max_i (Ku)_i - min_j (K* v)_j`` of a feasible pair."""
    u = as_vector(u)
    v = as_vector(v)
    _check_feasible(u, "u")
    _check_feasible(v, "v")
    return float(np.max(K.apply(u)) - np.min(K.adjoint_apply(v)))


def game_residual(u: np.ndarray, v: np.ndarray, K: LinearOperator) -> float:
    """Projected optimality residual of the matrix game at ``(u, v)``."""
    u = as_vector(u)
    v = as_vector(v)
    ru = u - project_simplex(u - K.adjoint_apply(v))
    rv = v - project_simplex(v + K.apply(u))
    return math.sqrt(dot(ru, ru) + dot(rv, rv))


def soft_threshold(y, theta: float) -> np.ndarray:
    """Entrywise shrinkage ``sign(y) * max(|y| - theta, 0)``."""
    if theta < 0:
        raise ValueError(f"threshold must be >= 0, got {theta}")
    y = as_vector(y)
    return np.sign(y) * np.maximum(np.abs(y) - theta, 0.0)


def prox_gstar_lasso(y, sigma: float, b: np.ndarray) -> np.ndarray:
    """Prox of the scaled conjugate of ``0.5 ||. - b||^2``: ``(y - sigma b)/(1 + sigma)``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    y = as_vector(y)
    if y.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {y.shape} vs {b.shape}")
    return (y - sigma * b) / (1.0 + sigma)


def lasso_objective(u, inst: LassoInstance) -> float:
    """``0.5 ||K u - b||^2 + mu ||u||_1``."""
    u = as_vector(u)
    r = inst.K.apply(u) - inst.b
    return 0.5 * dot(r, r) + inst.mu * float(np.abs(u).sum())


# ---------------------------------------------------------------------------
# Plain-text instance files: a single header line of whitespace-separated
# tokens (the first being the problem name, the rest key=value pairs), then
# whitespace-separated numbers.  Dense matrices are written row-major; sparse
# ones as "row col value" triplets.  Floats carry 17 significant digits.

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_values(fh, values, per_line: int = 8) -> None:
    values = np.asarray(values, dtype=np.float64).ravel()
    for start in range(0, values.size, per_line):
        fh.write(" ".join(_fmt(v) for v in values[start:start + per_line]) + "\n")


def save_instance(inst: MatrixGameInstance | LassoInstance, path) -> None:
    """Write an instance in the documented text format."""
    path = Path(path)
    with path.open("w") as fh:
        if isinstance(inst, MatrixGameInstance):
            sparse = isinstance(inst.K, SparseOperator)
            fmt = "coo" if sparse else "dense"
            header = (f"matrix_game variant={inst.variant} seed={inst.seed} "
                      f"p={inst.p} q={inst.q} format={fmt}")
            if sparse:
                rows, cols, vals = inst.K.triplets()
                fh.write(header + f" nnz={vals.size}\n")
                for r, c, val in zip(rows, cols, vals):
                    fh.write(f"{r} {c} {_fmt(val)}\n")
            else:
                fh.write(header + "\n")
                _write_values(fh, inst.K.to_dense())
        elif isinstance(inst, LassoInstance):
            corr = "" if inst.corr_v is None else f" corr_v={_fmt(inst.corr_v)}"
            fh.write(f"lasso variant={inst.variant} seed={inst.seed} q={inst.q} "
                     f"p={inst.p} s={inst.s} mu={_fmt(inst.mu)}{corr} format=dense\n")
            _write_values(fh, inst.K.to_dense())
            _write_values(fh, inst.b)
            _write_values(fh, inst.u_star)
        else:
            raise TypeError(f"cannot serialize {type(inst).__name__}")


def load_instance(path) -> MatrixGameInstance | LassoInstance:
    """Read an instance written by :func:`save_instance`."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().split()
        if not header:
            raise ValueError(f"{path}: empty instance file")
        kind, fields = header[0], dict(tok.split("=", 1) for tok in header[1:])
        body = fh.read().split()

    if kind == "matrix_game":
        p, q = int(fields["p"]), int(fields["q"])
        if fields["format"] == "coo":
            nnz = int(fields["nnz"])
            if len(body) != 3 * nnz:
                raise ValueError(f"{path}: expected {3 * nnz} tokens, got {len(body)}")
            triples = np.asarray(body).reshape(nnz, 3)
            K: LinearOperator = SparseOperator(
                p, q, triples[:, 0].astype(np.int64), triples[:, 1].astype(np.int64),
                triples[:, 2].astype(np.float64))
        else:
            if len(body) != p * q:
                raise ValueError(f"{path}: expected {p * q} tokens, got {len(body)}")
            K = DenseOperator(np.asarray(body, dtype=np.float64).reshape(p, q))
        return MatrixGameInstance(K=K, variant=fields["variant"], seed=int(fields["seed"]))

    if kind == "lasso":
        q, p, s = int(fields["q"]), int(fields["p"]), int(fields["s"])
        expected = p * q + p + q
        if len(body) != expected:
            raise ValueError(f"{path}: expected {expected} tokens, got {len(body)}")
        values = np.asarray(body, dtype=np.float64)
        K = DenseOperator(values[:p * q].reshape(p, q))
        b = values[p * q:p * q + p]
        u_star = values[p * q + p:]
        corr = float(fields["corr_v"]) if "corr_v" in fields else None
        return LassoInstance(K=K, b=b, mu=float(fields["mu"]), u_star=u_star, s=s,
                             variant=fields["variant"], corr_v=corr,
                             seed=int(fields["seed"]))

    raise ValueError(f"{path}: unknown problem kind {kind!r}")
