"""Coordinate-list storage for sparse symmetric matrices."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class SparseSymMatrix:
    """Symmetric ``n x n`` matrix stored as upper-triangular triplets.

    Each stored entry ``(i, j, v)`` with ``i <= j`` represents the value ``v``
    at both ``(i, j)`` and ``(j, i)``. Entries are sorted by row once at
    construction and never mutated afterwards.

    Parameters
    ----------
    n : int
        Matrix dimension.
    rows, cols : array_like of int
        0-based indices with ``rows <= cols``.
    vals : array_like of float
        Entry values.
    """

    def __init__(self, n, rows, cols, vals, *, check=True):
        n = int(n)
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if check:
            if n < 1:
                raise ValueError(f"dimension must be positive, got {n}")
            if not (rows.size == cols.size == vals.size):
                raise ValueError("rows, cols and vals must have equal length")
            if rows.size:
                if rows.min() < 0 or cols.max() >= n:
                    raise ValueError(f"entry index out of range for n={n}")
                if np.any(rows > cols):
                    raise ValueError("entries must satisfy i <= j")
            keys = rows * n + cols
            order = np.argsort(keys, kind="stable")
            rows, cols, vals, keys = rows[order], cols[order], vals[order], keys[order]
            dup = np.flatnonzero(keys[1:] == keys[:-1])
            if dup.size:
                i, j = rows[dup[0]], cols[dup[0]]
                raise ValueError(f"duplicate entry ({i}, {j})")
        self.n = n
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self._csr = None

    @classmethod
    def from_entries(cls, n, entries):
        """Build from an iterable of ``(i, j, v)`` triplets."""
        entries = list(entries)
        if not entries:
            return cls(n, [], [], [])
        i, j, v = zip(*entries)
        return cls(n, i, j, v)

    @classmethod
    def from_dense(cls, A, tol=0.0):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        iu, ju = np.triu_indices(n)
        v = A[iu, ju]
        keep = np.abs(v) > tol
        return cls(n, iu[keep], ju[keep], v[keep])

    @property
    def nnz(self):
        return self.vals.size

    def __repr__(self):
        return f"SparseSymMatrix(n={self.n}, nnz={self.nnz})"

    def _full_csr(self):
        if self._csr is None:
            off = self.rows != self.cols
            r = np.concatenate([self.rows, self.cols[off]])
            c = np.concatenate([self.cols, self.rows[off]])
            v = np.concatenate([self.vals, self.vals[off]])
            self._csr = sp.csr_matrix((v, (r, c)), shape=(self.n, self.n))
        return self._csr

    def to_dense(self):
        A = np.zeros((self.n, self.n))
        A[self.rows, self.cols] = self.vals
        A[self.cols, self.rows] = self.vals
        return A

    def is_finite(self):
        return bool(np.all(np.isfinite(self.vals)))

    def matvec(self, x):
        """Return ``A @ x`` for a vector or an ``n x k`` block."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: operator is {self.n}, operand has {x.shape[0]} rows")
        return self._full_csr() @ x

    def quadratic_form(self, V):
        """Return the symmetrized ``V.T @ A @ V``."""
        V = np.asarray(V, dtype=float)
        if V.ndim != 2 or V.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: expected {self.n} rows, got shape {V.shape}")
        G = V.T @ self.matvec(V)
        return 0.5 * (G + G.T)


def matvec(A, x):
    return A.matvec(x)


def quadratic_form(A, V):
    return A.quadratic_form(V)
