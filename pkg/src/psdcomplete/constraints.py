"""Entry-indicator constraint operator for PSD completion.

Every specified entry ``(i, j, M_ij)`` yields the constraint
``<E_ij + E_ji, X> = 2 M_ij``. The coefficient matrix keeps the form
``E_ij + E_ji`` on the diagonal too, so a diagonal row reads
``2 X_ii = 2 M_ii``. Hence ``b = 2 * values`` for every row, and the adjoint
puts ``y_l`` on an off-diagonal position but ``2 y_l`` on a diagonal one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparse_sym import SparseSymMatrix


class ConstraintSet:
    """The specified entries of a partially known symmetric matrix.

    Parameters
    ----------
    n : int
        Ambient dimension.
    rows, cols : array_like of int
        0-based positions with ``rows <= cols``.
    values : array_like of float
        Specified values ``M_ij``.
    """

    def __init__(self, n, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        # validation (range, order, duplicates) is shared with the matrix type
        pattern = SparseSymMatrix(n, rows, cols, values)
        diag = pattern.rows[pattern.rows == pattern.cols]
        if diag.size != n or np.any(diag != np.arange(n)):
            missing = np.setdiff1d(np.arange(n), diag)
            raise ValueError(f"every diagonal entry must be specified; missing {missing[:10].tolist()}")
        if not np.all(np.isfinite(pattern.vals)):
            raise ValueError("specified values must be finite")
        self.n = int(n)
        self.rows = pattern.rows
        self.cols = pattern.cols
        self.values = pattern.vals
        self.is_diag = self.rows == self.cols
        self.b = 2.0 * self.values
        self.trace_target = float(self.values[self.is_diag].sum())
        self._adj_coef = np.where(self.is_diag, 2.0, 1.0)

    @property
    def m(self):
        return self.values.size

    def adjoint(self, y):
        """Return ``sum_l y_l (E_ij + E_ji)`` as a sparse symmetric matrix."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.m,):
            raise ValueError(f"dimension mismatch: expected y of length {self.m}, got {y.shape}")
        return SparseSymMatrix(self.n, self.rows, self.cols, self._adj_coef * y, check=False)

    def apply(self, W, D=None):
        """Return ``A(W diag(D) W^T)``; ``D`` defaults to ones."""
        W = np.asarray(W, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: W has {W.shape[0]} rows, expected {self.n}")
        D = np.ones(W.shape[1]) if D is None else np.asarray(D, dtype=float).reshape(-1)
        if D.size != W.shape[1]:
            raise ValueError("weights must match the number of columns of W")
        return 2.0 * np.einsum("lc,lc,c->l", W[self.rows], W[self.cols], D)

    def apply_dense(self, X):
        X = np.asarray(X, dtype=float)
        return X[self.rows, self.cols] + X[self.cols, self.rows]

    def gram_rows(self, V):
        """Rows ``svec(V^T A_l V)`` stacked into an ``m x k(k+1)/2`` matrix."""
        from .smallsdp import svec_index

        V = np.asarray(V, dtype=float)
        k = V.shape[1]
        Vi, Vj = V[self.rows], V[self.cols]
        outer = np.einsum("lp,lq->lpq", Vi, Vj)
        blocks = outer + outer.transpose(0, 2, 1)
        r, c, w = svec_index(k)
        return blocks[:, r, c] * w

    def residual_max_entry(self, image):
        """Largest ``|X_ij - M_ij|`` over specified entries, from ``A X``."""
        return float(np.max(np.abs(np.asarray(image) - self.b)) / 2.0) if self.m else 0.0

    def to_dense_partial(self):
        M = np.zeros((self.n, self.n))
        M[self.rows, self.cols] = self.values
        M[self.cols, self.rows] = self.values
        return M


def apply_A(C, W, D=None):
    return C.apply(W, D)


def adjoint_A(C, y):
    return C.adjoint(y)


@dataclass
class PrimalStats:
    """Trace and constraint image of an implicitly stored PSD matrix."""

    trace: float
    image: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, m):
        return cls(0.0, np.zeros(m))

    def copy(self):
        return PrimalStats(self.trace, self.image.copy())


def update_stats(stats, C, scale, W, D):
    """Stats of ``scale * X + W diag(D) W^T`` given the stats of ``X``.

    Column norms of ``W`` are used explicitly so the trace update is exact
    whether or not ``W`` has orthonormal columns.
    """
    D = np.asarray(D, dtype=float).reshape(-1)
    if scale < 0:
        raise ValueError(f"scale must be nonnegative, got {scale}")
    if np.any(D < 0):
        raise ValueError("update weights must be nonnegative")
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    trace = scale * stats.trace + float(np.sum(D * np.sum(W * W, axis=0)))
    image = scale * stats.image + C.apply(W, D)
    return PrimalStats(trace, image)
