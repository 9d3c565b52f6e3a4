"""svec calculus and primal-dual interior point methods for the small SDPs.

Both solvers work on the feasible set

    { (S, eta) : S psd (k x k), eta >= 0, eta + tr(S) <= alpha }

and internally rescale it to ``alpha = 1``. The linear problem minimizes
``g1 . svec(S) + eta * g2``; the quadratic one minimizes

    1/2 s'Q11 s + eta q12's + 1/2 eta^2 q22 + h1's + eta h2,   s = svec(S).

Newton directions come from the linearization ``S T = mu I``,
``eta zeta = mu`` and ``omega * slack = mu`` with the symmetric Kronecker
product ``T (x)_s S^{-1}``; ``Delta eta`` and ``Delta omega`` are eliminated in
closed form so only a dense system in ``svec(Delta S)`` is factored.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import logging

import numpy as np

log = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)


class IpmError(RuntimeError):
    """Raised when an interior point solve cannot make progress."""


@dataclass
class IpmOptions:
    gap_tol: float = 1e-11  # complementarity gap relative to 1 + |objective|
    quad_gap_tol: float = 1e-13  # same, for the quadratic subproblem
    tol: float = 1e-10  # residual tolerance on the dual equations, relative to data scale
    max_iters: int = 100
    stall_iters: int = 10
    step_fraction: float = 0.97


@dataclass
class IpmState:
    S: np.ndarray
    eta: float
    T: np.ndarray
    zeta: float
    omega: float
    mu: float
    iterations: int = 0
    kkt_residual: float = np.inf

    def copy(self):
        return replace(self, S=self.S.copy(), T=self.T.copy())


@dataclass
class QuadSubproblem:
    Q11: np.ndarray
    q12: np.ndarray
    q22: float
    h1: np.ndarray
    h2: float
    alpha: float
    has_eta: bool = True

    @property
    def k(self):
        return svec_side(self.h1.size)

    def objective(self, S, eta):
        s = svec(S)
        return float(
            0.5 * s @ self.Q11 @ s
            + eta * self.q12 @ s
            + 0.5 * eta * eta * self.q22
            + self.h1 @ s
            + eta * self.h2
        )


# ---------------------------------------------------------------- svec calculus


@lru_cache(maxsize=None)
def _svec_index(k):
    r, c = [], []
    for j in range(k):
        for i in range(j, k):
            r.append(i)
            c.append(j)
    r, c = np.array(r), np.array(c)
    w = np.where(r == c, 1.0, SQRT2)
    for a in (r, c, w):
        a.setflags(write=False)
    return r, c, w


def svec_index(k):
    """Row indices, column indices and weights of the svec ordering."""
    return _svec_index(int(k))


def svec_side(p):
    k = int(round((np.sqrt(8 * p + 1) - 1) / 2))
    if k * (k + 1) // 2 != p:
        raise ValueError(f"{p} is not a triangular number")
    return k


def svec(A, tol=1e-10):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("svec needs a square matrix")
    if tol != np.inf and np.max(np.abs(A - A.T), initial=0.0) > tol * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise ValueError("svec needs a symmetric matrix")
    r, c, w = svec_index(A.shape[0])
    return A[r, c] * w


def smat(s):
    s = np.asarray(s, dtype=float)
    k = svec_side(s.size)
    r, c, w = svec_index(k)
    A = np.zeros((k, k))
    A[r, c] = s / w
    A[c, r] = s / w
    return A


@lru_cache(maxsize=None)
def _build_U(k):
    r, c, _ = svec_index(k)
    U = np.zeros((r.size, k * k))
    for row, (i, j) in enumerate(zip(r, c)):
        if i == j:
            U[row, j * k + i] = 1.0
        else:
            # vec stacks columns: entry (r, c) sits at c*k + r
            U[row, j * k + i] = 1.0 / SQRT2
            U[row, i * k + j] = 1.0 / SQRT2
    U.setflags(write=False)
    return U


def build_U(k):
    """Matrix with orthonormal rows mapping ``vec(A)`` to ``svec(A)``."""
    if k < 1:
        raise ValueError("k must be positive")
    return _build_U(int(k)).copy()


def sym_kron(G, H):
    """Symmetric Kronecker product ``1/2 U (G (x) H + H (x) G) U^T``."""
    G = np.asarray(G, dtype=float)
    H = np.asarray(H, dtype=float)
    if G.shape != H.shape or G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"sym_kron needs square matrices of equal size, got {G.shape} and {H.shape}")
    return _sym_kron(G, H)


@lru_cache(maxsize=None)
def _sym_kron_index(k):
    r, c, _ = svec_index(k)
    pair = r * k + c
    flat = pair[:, None] * (k * k) + pair[None, :]
    cw = np.where(r == c, 0.5, 1.0 / SQRT2)
    return flat, np.outer(cw, cw)


def _sym_kron(G, H):
    # entrywise form of 1/2 U (G (x) H + H (x) G) U^T; avoids the k^2 x k^2 product
    flat, weight = _sym_kron_index(G.shape[0])
    F = np.einsum("ia,jb->ijab", H, G)
    F = F + F.transpose(1, 0, 3, 2)
    F = F + F.transpose(0, 1, 3, 2)
    return weight * np.take(F, flat)


# ---------------------------------------------------------------- interior point core


def _max_step_psd(L, D):
    """Largest t with L L^T + t D still psd (inf if unbounded)."""
    Linv_D = np.linalg.solve(L, D)
    M = np.linalg.solve(L, Linv_D.T)
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_pos(x, dx):
    return np.inf if dx >= 0 else -x / dx


def _chol(A):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None


def _initial_state(k, has_eta):
    # centered start in the unit-capped set
    c = 1.0 / (2.0 * (k + 1))
    return IpmState(S=c * np.eye(k), eta=c if has_eta else 0.0, T=np.eye(k), zeta=1.0, omega=1.0, mu=np.inf)


def _duality_measure(st, v, has_eta):
    s = svec(st.S, tol=np.inf)
    slack = 1.0 - v @ s - st.eta
    return float(np.sum(st.S * st.T) + (st.eta * st.zeta if has_eta else 0.0) + st.omega * slack)


def _max_complementarity(st, v, has_eta, k):
    slack = 1.0 - v @ svec(st.S, tol=np.inf) - st.eta
    parts = [float(np.sum(st.S * st.T)) / k, st.omega * slack]
    if has_eta:
        parts.append(st.eta * st.zeta)
    return max(parts)


def _ipm(Q, q12, q22, h1, h2, k, has_eta, warm, opts):
    # normalize the objective so the unit start is reasonably centered; the
    # minimizer is unchanged and the duals are mapped back on return
    c = max(np.abs(Q).max(initial=0.0), np.abs(q12).max(initial=0.0), abs(q22),
            np.abs(h1).max(initial=0.0), abs(h2))
    c = c if c > 0 else 1.0
    if warm is not None:
        warm = replace(warm, T=warm.T / c, zeta=warm.zeta / c, omega=warm.omega / c)
    st = _ipm_normalized(Q / c, q12 / c, q22 / c, h1 / c, h2 / c, k, has_eta, warm, opts)
    return replace(st, T=st.T * c, zeta=st.zeta * c, omega=st.omega * c, mu=st.mu * c)


def _ipm_normalized(Q, q12, q22, h1, h2, k, has_eta, warm, opts):
    p = k * (k + 1) // 2
    v = svec(np.eye(k))
    n_comp = k + 1 + int(has_eta)
    scale = 1.0 + max(np.abs(h1).max(initial=0.0), abs(h2), np.abs(Q).max(initial=0.0), np.abs(q12).max(initial=0.0))

    st = _initial_state(k, has_eta)
    if warm is not None and warm.S.shape == (k, k):
        cand = warm.copy()
        s0 = svec(cand.S, tol=np.inf)
        if (
            _chol(cand.S) is not None
            and _chol(cand.T) is not None
            and cand.zeta > 0
            and cand.omega > 0
            and (cand.eta > 0 or not has_eta)
            and 1.0 - v @ s0 - (cand.eta if has_eta else 0.0) > 0
        ):
            st = cand
            if not has_eta:
                st.eta = 0.0
    st.mu = _duality_measure(st, v, has_eta) / (2.0 * n_comp)

    def residuals(st, s):
        F1 = Q @ s + st.eta * q12 + h1 - svec(st.T, tol=np.inf) + st.omega * v
        F2 = float(q12 @ s + st.eta * q22 + h2 - st.zeta + st.omega) if has_eta else 0.0
        return F1, F2

    best_dm, stalled = np.inf, 0
    near = False  # last accepted iterate is within the stall-exit accuracy
    for it in range(1, opts.max_iters + 1):
        S, T, eta, zeta, omega, mu = st.S, st.T, st.eta, st.zeta, st.omega, st.mu
        s = svec(S, tol=np.inf)
        slack = 1.0 - v @ s - eta
        LS = _chol(S)
        if LS is None:
            if near:
                return st
            raise IpmError(f"lost positive definiteness of S at iteration {it} (mu={mu:.3e})")
        Sinv = np.linalg.solve(LS.T, np.linalg.solve(LS, np.eye(k)))
        Sinv = 0.5 * (Sinv + Sinv.T)
        K = _sym_kron(T, Sinv)
        F1, F2 = residuals(st, s)
        ra = -F1 + mu * svec(Sinv, tol=np.inf) - svec(T, tol=np.inf)
        rc = mu / omega - slack
        kap1 = slack / omega
        M = Q + K
        if has_eta:
            rb = -F2 + mu / eta - zeta
            kap2 = zeta / eta + q22
            det = kap1 * kap2 + 1.0
            M = M - (np.outer(q12, kap1 * q12 + v) + np.outer(v, q12 - kap2 * v)) / det
            rhs = ra - q12 * (kap1 * rb - rc) / det - v * (kap2 * rc + rb) / det
        else:
            M = M + np.outer(v, v) / kap1
            rhs = ra - v * rc / kap1
        try:
            ds = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError as exc:
            if near:
                # Newton matrix exhausted by rounding at an already accurate point
                return st
            raise IpmError(
                f"singular Newton system at iteration {it} (mu={mu:.3e}, |S|={np.linalg.norm(S):.3e}, "
                f"|T|={np.linalg.norm(T):.3e})"
            ) from exc
        if not np.all(np.isfinite(ds)):
            if near:
                return st
            raise IpmError(f"non-finite Newton step at iteration {it} (mu={mu:.3e})")
        if has_eta:
            deta = (kap1 * (rb - q12 @ ds) - (rc + v @ ds)) / det
            domega = (kap2 * (rc + v @ ds) + (rb - q12 @ ds)) / det
            dzeta = mu / eta - zeta - (zeta / eta) * deta
        else:
            deta = dzeta = 0.0
            domega = (rc + v @ ds) / kap1
        dS = smat(ds)
        # from the linear dual equation rather than the complementarity one:
        # keeps the dual residual contracting by exactly (1 - delta)
        dT = smat(Q @ ds + deta * q12 + domega * v + F1)
        dslack = -(v @ ds) - deta

        LT = _chol(T)
        t_max = min(
            _max_step_psd(LS, dS),
            _max_step_psd(LT, dT),
            _max_step_pos(omega, domega),
            _max_step_pos(slack, dslack),
        )
        if has_eta:
            t_max = min(t_max, _max_step_pos(eta, deta), _max_step_pos(zeta, dzeta))
        delta = min(1.0, opts.step_fraction * t_max)
        for _ in range(60):
            S_new, T_new = S + delta * dS, T + delta * dT
            eta_new, zeta_new, omega_new = eta + delta * deta, zeta + delta * dzeta, omega + delta * domega
            slack_new = slack + delta * dslack
            ok = (
                _chol(S_new) is not None
                and _chol(T_new) is not None
                and omega_new > 0
                and slack_new > 0
                and (not has_eta or (eta_new > 0 and zeta_new > 0))
            )
            if ok:
                break
            delta *= 0.5
        else:
            if near:
                return st
            raise IpmError(f"line search failed at iteration {it} (mu={mu:.3e})")
        assert 0.0 < delta <= 1.0

        st = IpmState(S_new, eta_new if has_eta else 0.0, T_new, zeta_new if has_eta else 1.0, omega_new, mu, it)
        gamma = 1.0 if delta <= 0.2 else 0.5 - 0.4 * delta * delta
        st.mu = min(mu, gamma * _duality_measure(st, v, has_eta) / (2.0 * n_comp))
        F1, F2 = residuals(st, svec(st.S, tol=np.inf))
        st.kkt_residual = max(float(np.linalg.norm(F1)), abs(F2)) / scale
        comp = _max_complementarity(st, v, has_eta, k)
        log.debug("ipm %3d  delta=%.3f  mu=%.3e  comp=%.3e  res=%.3e", it, delta, st.mu, comp, st.kkt_residual)
        s_new = svec(st.S, tol=np.inf)
        obj = 0.5 * s_new @ Q @ s_new + h1 @ s_new
        if has_eta:
            obj += st.eta * (q12 @ s_new + 0.5 * q22 * st.eta + h2)
        target = opts.gap_tol * (1.0 + abs(obj))
        dm = _duality_measure(st, v, has_eta)
        near = st.kkt_residual <= opts.tol and dm <= 1e5 * target
        if st.kkt_residual <= opts.tol:
            if dm <= target:
                return st
            # degenerate problems can hit a rounding floor in the Newton system
            # before the target; accept a small gap once progress stops
            if dm < 0.9 * best_dm:
                best_dm, stalled = dm, 0
            else:
                stalled += 1
            if stalled >= opts.stall_iters and dm <= 1e5 * target:
                log.debug("ipm stalled at gap %.3e (target %.3e)", dm, target)
                return st
    raise IpmError(
        f"interior point iteration cap {opts.max_iters} reached (mu={st.mu:.3e}, residual={st.kkt_residual:.3e})"
    )


def _unscale(st, alpha):
    return alpha * st.S, alpha * st.eta


def solve_value_subproblem(g1, g2, alpha, has_eta=True, opts=None):
    """Minimize ``g1 . svec(S) + eta * g2`` over the alpha-capped set.

    Returns
    -------
    S, eta, objective, state
    """
    opts = opts or IpmOptions()
    g1 = np.asarray(g1, dtype=float)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not (np.all(np.isfinite(g1)) and np.isfinite(g2)):
        raise ValueError("subproblem data must be finite")
    k = svec_side(g1.size)
    p = g1.size
    st = _ipm(np.zeros((p, p)), np.zeros(p), 0.0, alpha * g1, alpha * float(g2), k, has_eta, None, opts)
    S, eta = _unscale(st, alpha)
    obj = float(g1 @ svec(S, tol=np.inf) + (eta * g2 if has_eta else 0.0))
    return S, eta, obj, st


def solve_quad_subproblem(P, warm=None, opts=None):
    """Solve the capped quadratic SDP described by ``P``.

    Returns
    -------
    S, eta, state
        ``state`` lives in the unit-capped scaling and can be passed back as
        ``warm`` for a subsequent solve of a nearby problem.
    """
    opts = opts or IpmOptions()
    if P.alpha <= 0:
        raise ValueError("alpha must be positive")
    data = (P.Q11, P.q12, P.q22, P.h1, P.h2)
    if not all(np.all(np.isfinite(x)) for x in data):
        raise ValueError("subproblem data must be finite")
    # the proximal gap of the bundle method is a difference of quadratic
    # subproblem values, so this solve is pushed further than the linear one
    opts = replace(opts, gap_tol=opts.quad_gap_tol)
    a = P.alpha
    a2 = a * a
    q12 = P.q12 if P.has_eta else np.zeros_like(P.h1)
    st = _ipm(
        a2 * P.Q11,
        a2 * q12,
        a2 * float(P.q22) if P.has_eta else 0.0,
        a * P.h1,
        a * float(P.h2) if P.has_eta else 0.0,
        P.k,
        P.has_eta,
        warm,
        opts,
    )
    S, eta = _unscale(st, a)
    return S, eta, st
