"""Dense and sparse linear operators with adjoints, plus spectral-norm estimation.

Everything is real-valued 64-bit floating point.  Operators are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp


class DimensionMismatchError(ValueError):
    """Raised when operand dimensions are incompatible."""


def as_vector(x) -> np.ndarray:
    """Coerce ``x`` to a 1-d float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {arr.shape}")
    return arr


def dot(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean inner product with an explicit length check."""
    if x.shape != y.shape:
        raise DimensionMismatchError(
            f"dot of incompatible vectors: {x.shape} vs {y.shape}"
        )
    return float(np.dot(x, y))


class LinearOperator:
    """A ``rows x cols`` linear map with an adjoint.

    Subclasses implement :meth:`apply` (``R^cols -> R^rows``) and
    :meth:`adjoint_apply` (``R^rows -> R^cols``) satisfying
    ``<K u, v> == <u, K* v>``.
    """

    rows: int
    cols: int

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise DimensionMismatchError(f"operator shape must be positive, got ({rows}, {cols})")
        self.rows = int(rows)
        self.cols = int(cols)

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        raise NotImplementedError

    def _check_apply(self, x: np.ndarray) -> None:
        if x.shape != (self.cols,):
            raise DimensionMismatchError(
                f"operator is {self.rows}x{self.cols}, cannot apply to shape {x.shape}"
            )

    def _check_adjoint(self, y: np.ndarray) -> None:
        if y.shape != (self.rows,):
            raise DimensionMismatchError(
                f"operator is {self.rows}x{self.cols}, cannot apply adjoint to shape {y.shape}"
            )


class DenseOperator(LinearOperator):
    """Row-major dense matrix operator."""

    def __init__(self, matrix):
        a = np.ascontiguousarray(matrix, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-d matrix, got shape {a.shape}")
        super().__init__(a.shape[0], a.shape[1])
        self.matrix = a

    def apply(self, x: np.ndarray) -> np.ndarray:
        self._check_apply(x)
        return self.matrix @ x

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        self._check_adjoint(y)
        return self.matrix.T @ y

    def to_dense(self) -> np.ndarray:
        return self.matrix


class SparseOperator(LinearOperator):
    """Sparse operator specified by coordinate triplets, CSR-backed for matvecs."""

    def __init__(self, rows: int, cols: int, row_idx, col_idx, values):
        super().__init__(rows, cols)
        row_idx = np.asarray(row_idx, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (row_idx.shape == col_idx.shape == values.shape) or values.ndim != 1:
            raise DimensionMismatchError("coordinate triplets must be equal-length 1-d arrays")
        coo = sp.coo_array((values, (row_idx, col_idx)), shape=(rows, cols))
        self._csr = coo.tocsr()
        self._csr_t = self._csr.T.tocsr()
        self.nnz = int(values.size)

    def apply(self, x: np.ndarray) -> np.ndarray:
        self._check_apply(x)
        return self._csr @ x

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        self._check_adjoint(y)
        return self._csr_t @ y

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Canonical (row, col, value) triplets in CSR order."""
        coo = self._csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()


class NormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


# Start vector for the deterministic fallback when the all-ones vector lies in
# the null space of K.
_FALLBACK_SEED = 0x5EED


def estimate_operator_norm(K: LinearOperator, tol: float = 1e-10,
                           max_iter: int = 5000) -> NormEstimate:
    """Estimate the spectral norm ``||K||_2`` by power iteration on ``K* K``.

    The start vector is the normalized all-ones vector; if that happens to lie
    in the null space of ``K``, a fixed seeded Gaussian vector is tried before
    declaring the operator zero.  Successive Rayleigh estimates are compared;
    the iteration stops once they agree to relative ``tol``.  Non-convergence
    within ``max_iter`` returns the best estimate with ``converged=False``.
    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    z = np.full(K.cols, 1.0 / np.sqrt(K.cols))
    prev = None
    est = 0.0
    tried_fallback = False
    for it in range(1, max_iter + 1):
        w = K.apply(z)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            if tried_fallback:
                return NormEstimate(0.0, True, it)
            tried_fallback = True
            rng = np.random.default_rng(_FALLBACK_SEED)
            z = rng.standard_normal(K.cols)
            z /= np.linalg.norm(z)
            continue
        zn = K.adjoint_apply(w)
        n_zn = float(np.linalg.norm(zn))
        if n_zn == 0.0:
            # w = Kz is orthogonal to range(K); cannot happen for w != 0
            break
        z = zn / n_zn
        if prev is not None and abs(est - prev) <= tol * est:
            return NormEstimate(est, True, it)
        prev = est
    return NormEstimate(est, False, max_iter)


def operator_norm(K: LinearOperator, tol: float = 1e-10, max_iter: int = 5000) -> float:
    """Spectral norm of ``K``; see :func:`estimate_operator_norm` for the contract."""
    return estimate_operator_norm(K, tol=tol, max_iter=max_iter).value
