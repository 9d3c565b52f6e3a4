"""Spectral bundle method on the penalized dual of the completion SDP.

The primal is ``find X psd with A X = b`` (no objective) and the penalized
dual is

    f(y) = alpha * max(lambda_max(-A^* y), 0) + <b, y>.

The model at iteration t is the supremum of the Lagrangian over
``{ eta * Xbar_t + V_t S V_t^T : eta tr(Xbar_t) + tr(S) <= alpha }``.
Only ``tr`` and ``A`` of the primal iterates are needed by the method; an
explicit matrix or a Nystrom sketch is kept alongside when a primal factor
has to be returned.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet, PrimalStats, update_stats
from .lanczos import LanczosOptions, max_eigs
from .nystrom import NystromSketch, default_sketch_rank
from .smallsdp import IpmError, IpmOptions, QuadSubproblem, solve_quad_subproblem, solve_value_subproblem, svec

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    FEASIBILITY = "feasibility"
    SQUARING = "squaring"


class Status(enum.Enum):
    FEASIBLE_TO_EPS = "FeasibleToEps"
    INFEASIBLE = "Infeasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"


class Step(enum.Enum):
    DESCENT = "descent"
    NULL = "null"


class SolverError(RuntimeError):
    """A subcomponent failed; the message carries the bundle iteration."""


@dataclass
class SolverConfig:
    """Parameters of one bundle solve.

    ``rho`` and ``alpha`` default to mode- and data-dependent values, filled
    in by :func:`resolve_config`.
    """

    eps: float = 1e-2
    rho: float | None = None
    beta: float = 0.25
    k_c: int = 8
    k_p: int = 2
    alpha: float | None = None
    max_iters: int = 5000
    seed: int = 0
    sketch_rank: int | None = None
    dense_cutoff: int = 500
    track_primal: bool | None = None  # default: only when squaring
    lanczos: LanczosOptions = field(default_factory=LanczosOptions)
    ipm: IpmOptions = field(default_factory=IpmOptions)
    debug: bool = False

    def validate(self, C=None):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.k_c < 1 or self.k_p < 0:
            raise ValueError("need k_c >= 1 and k_p >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.sketch_rank is not None and self.sketch_rank < 1:
            raise ValueError("sketch rank must be positive")
        if C is not None and self.alpha is not None and not self.alpha > C.trace_target:
            raise ValueError(f"alpha={self.alpha} must exceed the trace target {C.trace_target}")


def resolve_config(config, C, mode):
    """Copy of ``config`` with defaults for rho, alpha and primal tracking."""
    config.validate(C)
    kw = dict(config.__dict__)
    if kw["alpha"] is None:
        kw["alpha"] = 2.0 * C.trace_target + 1.0
    if kw["rho"] is None:
        kw["rho"] = 0.1 if mode is Mode.FEASIBILITY else 1.0 / kw["alpha"]
    if kw["track_primal"] is None:
        kw["track_primal"] = mode is Mode.SQUARING
    # the model basis cannot exceed the dimension
    kw["k_c"] = min(kw["k_c"], C.n)
    kw["k_p"] = min(kw["k_p"], C.n - kw["k_c"])
    out = SolverConfig(**kw)
    out.validate(C)
    return out


# ---------------------------------------------------------------- primal bookkeeping


class PrimalTrack:
    """Statistics of an implicit PSD matrix plus an optional explicit copy or sketch."""

    def __init__(self, stats, dense=None, sketch=None):
        self.stats = stats
        self.dense = dense
        self.sketch = sketch

    @classmethod
    def empty(cls, C, storage, sketch_rank=None, rng=None):
        dense = np.zeros((C.n, C.n)) if storage == "dense" else None
        sketch = NystromSketch(C.n, sketch_rank, rng) if storage == "sketch" else None
        return cls(PrimalStats.zeros(C.m), dense, sketch)

    def updated(self, C, scale, W, D):
        D = np.maximum(np.asarray(D, dtype=float).reshape(-1), 0.0)
        stats = update_stats(self.stats, C, scale, W, D)
        dense = sketch = None
        if self.dense is not None:
            WD = W * D
            dense = scale * self.dense + WD @ W.T
            dense = 0.5 * (dense + dense.T)
        if self.sketch is not None:
            sketch = self.sketch.copy().update(scale, W, D)
        return PrimalTrack(stats, dense, sketch)

    def factor(self, truncate=None):
        """``(U, lam)`` with ``U diag(lam) U^T`` the tracked matrix (or its sketch)."""
        if self.dense is not None:
            lam, U = np.linalg.eigh(self.dense)
            keep = lam > 0
            U, lam = U[:, keep][:, ::-1], lam[keep][::-1]
            if truncate is not None:
                U, lam = U[:, :truncate], lam[:truncate]
            return U, lam
        if self.sketch is not None:
            return self.sketch.reconstruct(truncate)
        return None


# ---------------------------------------------------------------- state and outcome


@dataclass
class BundleState:
    y: np.ndarray
    f_y: float
    V: np.ndarray
    xbar: PrimalTrack
    x: PrimalTrack
    gap: float = np.inf
    descent_steps: int = 0
    null_steps: int = 0
    iteration: int = 0


@dataclass
class Candidate:
    y: np.ndarray
    S: np.ndarray
    eta: float  # multiplier of Xbar_t
    eta_trace: float  # eta * tr(Xbar_t)
    image: np.ndarray  # A X_{t+1}
    trace: float
    fhat: float
    gap: float


@dataclass
class SolveOutcome:
    status: Status
    mode: Mode
    eps: float
    certificate: np.ndarray | None = None
    certified_value: float | None = None
    factor: tuple | None = None  # (U, lam)
    dense_x: np.ndarray | None = None
    residual_l2: float | None = None
    residual_max_entry: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status is Status.FEASIBLE_TO_EPS


# ---------------------------------------------------------------- building blocks


def eval_f(C, y, alpha, k_c=1, tol=1e-10, seed=0, lanczos=None):
    """Penalized dual objective and the top eigenpairs of ``-A^* y``."""
    eig = max_eigs(C.adjoint(-np.asarray(y, dtype=float)), k_c, tol=tol, seed=seed, options=lanczos)
    value = alpha * max(float(eig.values[0]), 0.0) + float(C.b @ y)
    return value, eig


def eval_f_dense(C, y, alpha):
    """Dense-eigensolver evaluation of the penalized dual objective."""
    lam = np.linalg.eigvalsh(C.adjoint(-np.asarray(y, dtype=float)).to_dense())[-1]
    return alpha * max(float(lam), 0.0) + float(C.b @ y)


def descent_test(f_yt, fhat_candidate, f_candidate, beta):
    if beta * (f_yt - fhat_candidate) <= f_yt - f_candidate:
        return Step.DESCENT
    return Step.NULL


def _model_data(C, state, rho):
    """Per-iteration pieces of the compressed subproblems."""
    B = C.gram_rows(state.V)  # rows svec(V^T A_l V)
    tau = state.xbar.stats.trace
    has_eta = tau > 1e-12 * max(1.0, C.trace_target)
    abar = state.xbar.stats.image / tau if has_eta else np.zeros(C.m)
    return B, has_eta, abar, tau


def build_quad_subproblem(C, state, config, B=None):
    """Data of ``max_X psi_t(X)`` over the model set, in (S, eta tr Xbar) coordinates."""
    rho = config.rho
    if B is None:
        B, has_eta, abar, _ = _model_data(C, state, rho)
    else:
        _, has_eta, abar, _ = _model_data(C, state, rho)
    w = state.y - C.b / rho
    Q11 = (B.T @ B) / rho
    Q11 = 0.5 * (Q11 + Q11.T)
    h1 = B.T @ w
    if has_eta:
        q12 = B.T @ abar / rho
        q22 = float(abar @ abar) / rho
        h2 = float(abar @ w)
    else:
        q12, q22, h2 = np.zeros_like(h1), 0.0, 0.0
    return QuadSubproblem(Q11, q12, q22, h1, h2, config.alpha, has_eta)


def model_value(C, state, y, config):
    """``fhat_t(y)`` via the linear interior point method."""
    B, has_eta, abar, _ = _model_data(C, state, config.rho)
    g1 = B.T @ y
    g2 = float(abar @ y) if has_eta else 0.0
    _, _, obj, _ = solve_value_subproblem(g1, g2, config.alpha, has_eta, config.ipm)
    return -obj + float(C.b @ y)


def propose_candidate(C, state, config):
    """Solve the proximal model problem; return the candidate and the gap."""
    rho = config.rho
    B, has_eta, abar, tau = _model_data(C, state, rho)
    P = build_quad_subproblem(C, state, config, B)
    S, eta_trace, _ = solve_quad_subproblem(P, None, config.ipm)
    S = 0.5 * (S + S.T)
    s = svec(S)
    image = B @ s + (eta_trace * abar if has_eta else 0.0)
    y_new = state.y - (C.b - image) / rho
    g1 = B.T @ y_new
    g2 = float(abar @ y_new) if has_eta else 0.0
    _, _, obj, _ = solve_value_subproblem(g1, g2, config.alpha, has_eta, config.ipm)
    fhat = -obj + float(C.b @ y_new)
    step = y_new - state.y
    gap = state.f_y - (fhat + 0.5 * rho * float(step @ step))
    return Candidate(
        y=y_new,
        S=S,
        eta=eta_trace / tau if has_eta else 0.0,
        eta_trace=eta_trace if has_eta else 0.0,
        image=image,
        trace=(eta_trace if has_eta else 0.0) + float(np.trace(S)),
        fhat=fhat,
        gap=gap,
    )


def _orthonormalize(M, k, rng):
    Qm, R = np.linalg.qr(M)
    d = np.abs(np.diag(R)) if R.size else np.zeros(0)
    good = d > 1e-10 * max(1.0, d.max(initial=0.0))
    Qm = Qm[:, good]
    padded = 0
    while Qm.shape[1] < k:
        v = rng.standard_normal(M.shape[0])
        v -= Qm @ (Qm.T @ v)
        v -= Qm @ (Qm.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            Qm = np.column_stack([Qm, v / nv])
            padded += 1
    return Qm[:, :k], padded


def update_model(C, state, cand, eig, config, rng):
    """Split ``S_{t+1}`` into kept and aggregated spectral parts; refresh ``V``.

    Returns the new ``(xbar, x, V)`` and the number of random padding vectors
    used when the new basis was rank deficient.
    """
    V = state.V
    w, Qs = np.linalg.eigh(cand.S)
    w, Qs = w[::-1], Qs[:, ::-1]
    kp = min(config.k_p, w.size)
    Qp, Qc, wc = Qs[:, :kp], Qs[:, kp:], w[kp:]
    xbar = state.xbar.updated(C, cand.eta, V @ Qc, wc)
    x = state.xbar.updated(C, cand.eta, V @ Qs, w)
    k = config.k_c + config.k_p
    if kp == 0:
        V_new, padded = _orthonormalize(eig.vectors[:, : config.k_c], k, rng)
    else:
        V_new, padded = _orthonormalize(np.column_stack([V @ Qp, eig.vectors[:, : config.k_c]]), k, rng)
    return xbar, x, V_new, padded


# ---------------------------------------------------------------- driver


def _storage(C, config):
    if not config.track_primal:
        return None, None
    if config.sketch_rank is not None:
        return "sketch", config.sketch_rank
    if C.n <= config.dense_cutoff:
        return "dense", None
    return "sketch", default_sketch_rank(C.m)


def initial_state(C, config, rng):
    k = config.k_c + config.k_p
    # -A^* 0 = 0: any orthonormal basis is a top eigenspace
    V0, _ = np.linalg.qr(rng.standard_normal((C.n, k)))
    storage, r = _storage(C, config)
    track = PrimalTrack.empty(C, storage, r, rng)
    return BundleState(y=np.zeros(C.m), f_y=0.0, V=V0, xbar=track, x=track)


def _factor_residual(C, factor):
    U, lam = factor
    image = C.apply(U, lam) if lam.size else np.zeros(C.m)
    return float(np.linalg.norm(image - C.b)), C.residual_max_entry(image)


def run(C, config=None, mode=Mode.FEASIBILITY, callback=None):
    """Run the spectral bundle method until the mode's stopping rule fires.

    Parameters
    ----------
    C : ConstraintSet
    config : SolverConfig, optional
    mode : Mode
        ``FEASIBILITY`` stops when the proximal subproblem gap drops below
        ``eps`` or a certificate ``f(y) < -eps (1 + |b|)`` is found.
        ``SQUARING`` stops once ``|A X_t - b| <= eps``.
    callback : callable, optional
        Called as ``callback(state, candidate, step)`` after every iteration.
    """
    config = resolve_config(config or SolverConfig(), C, mode)
    rng = np.random.default_rng(config.seed)
    t_start = time.perf_counter()
    alpha, eps = config.alpha, config.eps
    eps_cert = eps * (1.0 + float(np.linalg.norm(C.b)))
    state = initial_state(C, config, rng)
    gaps, residuals, fvals = [], [], []
    padded_total = 0
    lanczos_unconverged = 0

    def diagnostics():
        return dict(
            iterations=state.iteration,
            descent_steps=state.descent_steps,
            null_steps=state.null_steps,
            gap_history=list(gaps),
            residual_history=list(residuals),
            f_history=list(fvals),
            padded_vectors=padded_total,
            lanczos_unconverged=lanczos_unconverged,
            y_norm=float(np.linalg.norm(state.y)),
            wall_time=time.perf_counter() - t_start,
            config=_config_echo(config),
        )

    for t in range(config.max_iters):
        state.iteration = t + 1
        try:
            cand = propose_candidate(C, state, config)
        except IpmError as exc:
            raise SolverError(f"iteration {t}: {exc}") from exc
        gaps.append(cand.gap)
        lz_tol = max(0.1 * min(state.gap, eps), 1e-10)
        f_cand, eig = eval_f(C, cand.y, alpha, config.k_c, lz_tol, rng, config.lanczos)
        lanczos_unconverged += int(not eig.converged)

        if config.debug:
            _debug_checks(C, state, cand, config, rng)

        if mode is Mode.FEASIBILITY and f_cand < -eps_cert:
            # confirm with a tight eigensolve before reporting
            f_tight, _ = eval_f(C, cand.y, alpha, 1, 1e-12, rng, LanczosOptions(64, 50))
            if f_tight < -eps_cert:
                state.gap = cand.gap
                fvals.append(f_tight)
                return SolveOutcome(
                    Status.INFEASIBLE,
                    mode,
                    eps,
                    certificate=cand.y.copy(),
                    certified_value=f_tight,
                    diagnostics=diagnostics(),
                )

        step = descent_test(state.f_y, cand.fhat, f_cand, config.beta)
        if step is Step.DESCENT:
            state.descent_steps += 1
        else:
            state.null_steps += 1

        xbar, x, V_new, padded = update_model(C, state, cand, eig, config, rng)
        padded_total += padded
        if step is Step.DESCENT:
            state.y, state.f_y = cand.y, f_cand
        state.xbar, state.x, state.V = xbar, x, V_new
        state.gap = cand.gap
        fvals.append(state.f_y)
        res = float(np.linalg.norm(x.stats.image - C.b))
        residuals.append(res)
        if callback is not None:
            callback(state, cand, step)

        if mode is Mode.FEASIBILITY and cand.gap <= eps:
            return _feasible_outcome(C, state, mode, eps, diagnostics())
        if mode is Mode.SQUARING and res <= eps:
            out = _feasible_outcome(C, state, mode, eps, diagnostics())
            if out.residual_l2 <= eps:
                return out
            # the implicit iterate is eps-accurate but its sketch cannot
            # represent it; further iterations do not lower its rank
            log.info("tracked residual %.3e but sketch factor residual %.3e", res, out.residual_l2)
            out.status = Status.BUDGET_EXHAUSTED
            out.diagnostics["reason"] = "sketch rank too small for the iterate; raise the sketch rank"
            return out

    out = SolveOutcome(Status.BUDGET_EXHAUSTED, mode, eps, diagnostics=diagnostics())
    out.diagnostics["reason"] = "iteration budget exhausted"
    if residuals:
        out.residual_l2 = residuals[-1]
        out.residual_max_entry = C.residual_max_entry(state.x.stats.image)
    return out


def _feasible_outcome(C, state, mode, eps, diag):
    out = SolveOutcome(Status.FEASIBLE_TO_EPS, mode, eps, diagnostics=diag)
    factor = state.x.factor()
    if factor is not None:
        out.factor = factor
        out.residual_l2, out.residual_max_entry = _factor_residual(C, factor)
        out.dense_x = state.x.dense
    else:
        out.residual_l2 = float(np.linalg.norm(state.x.stats.image - C.b))
        out.residual_max_entry = C.residual_max_entry(state.x.stats.image)
    diag["tracked_residual_l2"] = float(np.linalg.norm(state.x.stats.image - C.b))
    diag["trace"] = state.x.stats.trace
    return out


def _config_echo(config):
    return dict(
        eps=config.eps,
        rho=config.rho,
        beta=config.beta,
        k_c=config.k_c,
        k_p=config.k_p,
        alpha=config.alpha,
        max_iters=config.max_iters,
        seed=config.seed,
        sketch_rank=config.sketch_rank,
        dense_cutoff=config.dense_cutoff,
        lanczos_inner_dim=config.lanczos.inner_dim,
        lanczos_max_restarts=config.lanczos.max_restarts,
        ipm_gap_tol=config.ipm.gap_tol,
        ipm_quad_gap_tol=config.ipm.quad_gap_tol,
    )


def _debug_checks(C, state, cand, config, rng):
    """Runtime checks of the model conditions (expensive; tests only)."""
    rho = config.rho
    lhs = rho * (state.y - cand.y)
    rhs = C.b - cand.image
    if np.linalg.norm(lhs - rhs) > 1e-8 * (1.0 + np.linalg.norm(rhs)):
        raise AssertionError("candidate does not satisfy rho (y_t - y~) = b - A X_{t+1}")
    if cand.eta < -1e-9 or np.linalg.eigvalsh(cand.S)[0] < -1e-9:
        raise AssertionError("candidate primal leaves the psd cone")
    if cand.trace > config.alpha + 1e-8:
        raise AssertionError(f"trace cap violated: {cand.trace} > {config.alpha}")
    # the gap is a difference of subproblem values of size |b|^2 / (2 rho)
    scale = 1.0 + abs(state.f_y) + float(C.b @ C.b) / (2.0 * rho)
    if cand.gap < -1e-8 * scale:
        raise AssertionError(f"negative proximal subproblem gap {cand.gap}")
    radius = 1.0 + float(np.linalg.norm(cand.y - state.y))
    for _ in range(5):
        d = rng.standard_normal(C.m)
        y = state.y + radius * d / np.linalg.norm(d)
        fhat = model_value(C, state, y, config)
        f = eval_f_dense(C, y, config.alpha) if C.n <= 400 else eval_f(C, y, config.alpha, 1, 1e-12, 0)[0]
        if fhat > f + 1e-6 * (1.0 + abs(f)):
            raise AssertionError(f"model is not a minorant: fhat={fhat} > f={f}")
