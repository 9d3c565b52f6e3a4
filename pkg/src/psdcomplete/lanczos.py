"""Thick-restart Lanczos for the algebraically largest eigenpairs.

The Krylov basis is fully reorthogonalized at every step (two passes of
classical Gram-Schmidt), which keeps the projected matrix exactly
``Q.T @ A @ Q`` up to rounding and avoids ghost eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LanczosOptions:
    inner_dim: int = 32
    max_restarts: int = 10
    tol: float = 1e-8


@dataclass
class EigResult:
    values: np.ndarray  # nonincreasing
    vectors: np.ndarray  # n x k, orthonormal columns
    residual_norms: np.ndarray
    matvecs: int = 0
    converged: bool = True


def _orthogonalize(Q, w):
    h = Q.T @ w
    w = w - Q @ h
    h2 = Q.T @ w
    w = w - Q @ h2
    return w, h + h2


def _random_unit(rng, n, Q=None):
    for _ in range(10):
        v = rng.standard_normal(n)
        if Q is not None and Q.shape[1]:
            v, _ = _orthogonalize(Q, v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            return v / nv
    raise RuntimeError("could not draw a vector outside the current Krylov basis")


def _dense_eigs(A, k_c):
    lam, U = np.linalg.eigh(A.to_dense())
    idx = np.arange(A.n - 1, A.n - 1 - k_c, -1)
    vals, vecs = lam[idx], U[:, idx]
    res = np.linalg.norm(A.matvec(vecs) - vecs * vals, axis=0)
    return EigResult(vals, vecs, res, matvecs=0, converged=True)


def max_eigs(A, k_c=1, tol=None, seed=0, options=None):
    """Approximate the ``k_c`` algebraically largest eigenpairs of ``A``.

    Parameters
    ----------
    A : SparseSymMatrix
        Symmetric operator.
    k_c : int
        Number of wanted eigenpairs.
    tol : float, optional
        Residual tolerance; a pair is accepted when
        ``||A v - lam v|| <= tol * max(1, |lam_1|)``. Overrides ``options.tol``.
    seed : int or numpy.random.Generator
        Source of the deterministic start vector.
    options : LanczosOptions, optional

    Returns
    -------
    EigResult
        If the restart budget runs out the best Ritz pairs are returned with
        their true residuals and ``converged=False``.
    """
    opts = options or LanczosOptions()
    tol = opts.tol if tol is None else tol
    n = A.n
    if not 1 <= k_c <= n:
        raise ValueError(f"k_c must lie in [1, {n}], got {k_c}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not A.is_finite():
        raise ValueError("operator has non-finite entries")
    if n <= opts.inner_dim:
        return _dense_eigs(A, k_c)

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = max(opts.inner_dim, k_c + 2)
    n_keep = min(m - 1, max(k_c + (m - k_c) // 2, k_c + 1))

    Q = np.empty((n, m + 1))
    H = np.zeros((m, m))
    Q[:, 0] = _random_unit(rng, n)
    j = 0  # number of basis vectors whose images are already in H
    matvecs = 0
    theta = S = None
    for restart in range(opts.max_restarts + 1):
        beta = 0.0
        while j < m:
            w = A.matvec(Q[:, j])
            matvecs += 1
            w, h = _orthogonalize(Q[:, : j + 1], w)
            H[: j + 1, j] = h
            H[j, : j + 1] = h
            beta = np.linalg.norm(w)
            scale = max(1.0, np.abs(H[: j + 1, : j + 1]).max())
            if beta <= 1e-12 * scale:
                # invariant subspace: continue with a fresh direction
                w = _random_unit(rng, n, Q[:, : j + 1])
                beta = 0.0
            else:
                w = w / beta
            Q[:, j + 1] = w
            if j + 1 < m:
                H[j + 1, j] = H[j, j + 1] = beta
            j += 1

        theta, S = np.linalg.eigh(H)
        theta, S = theta[::-1], S[:, ::-1]
        res = beta * np.abs(S[-1, :])
        lam_scale = max(1.0, abs(theta[0]))
        if np.all(res[:k_c] <= tol * lam_scale) or restart == opts.max_restarts:
            break

        # thick restart: keep the leading Ritz vectors, append the residual direction
        keep = n_keep
        Q[:, :keep] = Q[:, :m] @ S[:, :keep]
        Q[:, keep] = Q[:, m]
        H[:] = 0.0
        H[np.arange(keep), np.arange(keep)] = theta[:keep]
        coupling = beta * S[-1, :keep]
        H[keep, :keep] = coupling
        H[:keep, keep] = coupling
        j = keep
        # the diagonal element for column `keep` is filled in by the next expansion

    vecs = Q[:, :m] @ S[:, :k_c]
    vals = theta[:k_c].copy()
    true_res = np.linalg.norm(A.matvec(vecs) - vecs * vals, axis=0)
    converged = bool(np.all(true_res <= tol * max(1.0, abs(vals[0])) + 1e-12))
    return EigResult(vals, vecs, true_res, matvecs=matvecs + 1, converged=converged)
