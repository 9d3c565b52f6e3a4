"""Nystrom sketch of an evolving PSD matrix."""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla


def default_sketch_rank(m):
    """Low-rank solution bound ``sqrt(2(m+1))`` plus an oversampling slack of 4."""
    return int(math.ceil(math.sqrt(2 * (m + 1)))) + 4


class NystromSketch:
    """Random projection ``P = X @ Omega`` maintained under low-rank updates.

    Parameters
    ----------
    n : int
        Side of the sketched matrix.
    r : int
        Sketch rank.
    rng : numpy.random.Generator or int
        Source of the Gaussian test matrix; sampled once and kept.
    """

    def __init__(self, n, r, rng=0):
        if r < 1:
            raise ValueError("sketch rank must be positive")
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.n = int(n)
        self.r = int(min(r, n))
        self.omega = rng.standard_normal((self.n, self.r))
        self.P = np.zeros((self.n, self.r))

    def copy(self):
        sk = NystromSketch.__new__(NystromSketch)
        sk.n, sk.r, sk.omega, sk.P = self.n, self.r, self.omega, self.P.copy()
        return sk

    def update(self, scale, W, D):
        """In place: sketch of ``scale * X + W diag(D) W^T``."""
        if scale < 0:
            raise ValueError(f"scale must be nonnegative, got {scale}")
        W = np.asarray(W, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: W has {W.shape[0]} rows, sketch has {self.n}")
        D = np.asarray(D, dtype=float).reshape(-1)
        self.P = scale * self.P + (W * D) @ (W.T @ self.omega)
        return self

    def reconstruct(self, truncate=None):
        """Return ``(U, lam)`` with ``U diag(lam) U^T`` the Nystrom approximation.

        Uses a small shift of the sketch so that the core matrix can be
        Cholesky-factored, then removes the shift from the squared singular
        values. Eigenvalues are clipped at zero.
        """
        P = self.P
        nrm = np.linalg.norm(P, 2) if P.size else 0.0
        if not np.isfinite(nrm) or nrm == 0.0:
            return np.zeros((self.n, 0)), np.zeros(0)
        sigma = math.sqrt(self.n) * np.finfo(float).eps * nrm
        Ps = P + sigma * self.omega
        B = self.omega.T @ Ps
        B = 0.5 * (B + B.T)
        try:
            C = np.linalg.cholesky(B)
            E = sla.solve_triangular(C, Ps.T, lower=True).T
        except np.linalg.LinAlgError:
            # fall back to the pseudo-inverse of the core matrix
            w, Z = np.linalg.eigh(B)
            keep = w > w.max() * 1e-12
            E = Ps @ (Z[:, keep] / np.sqrt(w[keep]))
        U, s, _ = np.linalg.svd(E, full_matrices=False)
        lam = np.maximum(s * s - sigma, 0.0)
        if truncate is not None:
            U, lam = U[:, :truncate], lam[:truncate]
        keep = lam > 0
        return U[:, keep], lam[keep]


def sketch_update(sk, scale, W, D):
    out = sk.copy()
    return out.update(scale, W, D)


def reconstruct(sk, truncate=None):
    return sk.reconstruct(truncate)
