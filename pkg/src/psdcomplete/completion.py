"""Problem-level API: PSD completion feasibility and approximate squaring."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import bundle
from .bundle import Mode, SolveOutcome, SolverConfig, Status
from .constraints import ConstraintSet
from .lanczos import LanczosOptions

log = logging.getLogger(__name__)

__all__ = [
    "CompletionInstance",
    "InstanceKind",
    "SolveOutcome",
    "Status",
    "approximate_square",
    "check_feasibility",
    "generate_instance",
    "verify_certificate",
]


class InstanceKind(enum.Enum):
    FEASIBLE_FROM_SQUARE = "square"
    INFEASIBLE_CHAIN = "chain"
    DIAGONAL_ONLY = "diagonal"


@dataclass
class CompletionInstance:
    """Specified entries ``(i, j, value)`` of a symmetric ``n x n`` matrix, 0-based, ``i <= j``."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        # raises on missing diagonal, duplicates, bad indices or non-finite values
        self._constraints = ConstraintSet(self.n, self.rows, self.cols, self.values)

    @classmethod
    def from_entries(cls, n, entries, meta=None):
        entries = list(entries)
        i, j, v = zip(*entries) if entries else ((), (), ())
        return cls(n, np.array(i), np.array(j), np.array(v, dtype=float), dict(meta or {}))

    @property
    def m(self):
        return self.values.size

    @property
    def constraints(self):
        return self._constraints

    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))

    def same_entries(self, other):
        a = sorted(self.entries())
        b = sorted(other.entries())
        return self.n == other.n and a == b


# ---------------------------------------------------------------- generators


def _cycle_certificate(n, cycle, signs):
    """Dual vector proving infeasibility of a +-1 cycle with sign product -1.

    With the signed incidence Laplacian ``L`` of the cycle (PSD, with
    ``<M, L> = 0`` for any feasible +-1 data on it) and its smallest
    eigenvalue ``lam``, ``Z = L - lam I_cycle`` is PSD and ``<M, Z> < 0``.
    """
    L = len(cycle)
    Lap = np.zeros((n, n))
    for a in range(L):
        i, j, s = cycle[a], cycle[(a + 1) % L], signs[a]
        e = np.zeros(n)
        e[i], e[j] = 1.0, -s
        Lap += np.outer(e, e)
    sub = Lap[np.ix_(cycle, cycle)]
    lam = np.linalg.eigvalsh(sub)[0]
    Z = Lap.copy()
    Z[cycle, cycle] -= lam
    return Z, lam


def generate_instance(kind, n, m=None, seed=0):
    """Random test instance.

    ``FEASIBLE_FROM_SQUARE`` samples ``A`` with i.i.d. ``N(0, 1/n)`` entries and
    reveals the full diagonal of ``A A^T`` plus ``m - n`` random off-diagonal
    entries. ``INFEASIBLE_CHAIN`` puts a unit diagonal and ``+-1`` entries on a
    random cycle of length ``m - n`` whose sign product is ``-1``.
    ``DIAGONAL_ONLY`` reveals only a positive diagonal.
    """
    kind = InstanceKind(kind)
    rng = np.random.default_rng(seed)
    if m is None:
        m = {InstanceKind.FEASIBLE_FROM_SQUARE: 3 * n, InstanceKind.INFEASIBLE_CHAIN: n + min(n, 3)}.get(kind, n)
    max_m = n * (n + 1) // 2
    if not n <= m <= max_m:
        raise ValueError(f"m={m} out of range [{n}, {max_m}] for n={n}")
    diag = np.arange(n)
    meta = dict(kind=kind.value, seed=seed, n=n, m=m)

    if kind is InstanceKind.DIAGONAL_ONLY:
        if m != n:
            raise ValueError("a diagonal-only instance has m = n")
        d = rng.uniform(0.5, 2.0, n)
        meta["feasible"] = True
        return CompletionInstance(n, diag, diag, d, meta)

    if kind is InstanceKind.FEASIBLE_FROM_SQUARE:
        A = rng.standard_normal((n, n)) / np.sqrt(n)
        iu, ju = np.triu_indices(n, k=1)
        pick = np.sort(rng.choice(iu.size, size=m - n, replace=False))
        rows = np.concatenate([diag, iu[pick]])
        cols = np.concatenate([diag, ju[pick]])
        # entries of A A^T computed row-pair by row-pair
        values = np.einsum("lk,lk->l", A[rows], A[cols])
        meta["feasible"] = True
        inst = CompletionInstance(n, rows, cols, values, meta)
        inst.source_matrix = A
        return inst

    length = m - n
    if not 3 <= length <= n:
        raise ValueError(f"cycle length m - n = {length} must lie in [3, n]")
    cycle = rng.permutation(n)[:length]
    signs = rng.choice([-1.0, 1.0], size=length)
    if np.prod(signs) > 0:
        signs[rng.integers(length)] *= -1.0
    rows, cols, values = list(diag), list(diag), [1.0] * n
    for a in range(length):
        i, j = cycle[a], cycle[(a + 1) % length]
        rows.append(min(i, j))
        cols.append(max(i, j))
        values.append(signs[a])
    inst = CompletionInstance(n, np.array(rows), np.array(cols), np.array(values), meta)
    Z, lam = _cycle_certificate(n, cycle, signs)
    C = inst.constraints
    # y with A^* y = Z: diagonal rows carry Z_ii / 2, off-diagonal rows Z_ij
    y = np.where(C.is_diag, Z[C.rows, C.cols] / 2.0, Z[C.rows, C.cols])
    meta["feasible"] = False
    meta["cycle"] = cycle.tolist()
    meta["margin"] = float(-(C.b @ y) / np.linalg.norm(y))
    return inst


# ---------------------------------------------------------------- solves


def verify_certificate(C, y, alpha=None, dense_cutoff=500):
    """Independent re-evaluation of ``f(y)``; dense below the cutoff."""
    alpha = 2.0 * C.trace_target + 1.0 if alpha is None else alpha
    if C.n <= dense_cutoff:
        return bundle.eval_f_dense(C, y, alpha)
    value, _ = bundle.eval_f(C, y, alpha, 1, 1e-12, 12345, LanczosOptions(64, 100))
    return value


def check_feasibility(inst, config=None):
    """Decide eps-feasibility of a PSD completion.

    Returns ``FeasibleToEps`` when the proximal subproblem gap falls below
    ``eps`` and ``Infeasible`` only with a certificate that an independent
    dense (or high-accuracy) eigensolve confirms to have ``f(y) < 0``.
    """
    config = config or SolverConfig()
    C = inst.constraints
    out = bundle.run(C, config, Mode.FEASIBILITY)
    if out.status is Status.INFEASIBLE:
        alpha = out.diagnostics["config"]["alpha"]
        value = verify_certificate(C, out.certificate, alpha, config.dense_cutoff)
        out.diagnostics["independent_value"] = value
        if not value < 0:
            log.warning("certificate failed the independent check (f=%.3e); reporting budget exhausted", value)
            out = replace(out, status=Status.BUDGET_EXHAUSTED, certificate=None, certified_value=None)
        else:
            out.certified_value = value
    elif out.status is Status.FEASIBLE_TO_EPS:
        # with y_0 = 0 a feasible instance never leaves the origin
        out.diagnostics["stayed_at_origin"] = out.diagnostics["y_norm"] == 0.0
    return out


def approximate_square(inst, config=None):
    """PSD matrix agreeing with the specified entries up to ``|A X - b| <= eps``."""
    config = config or SolverConfig()
    return bundle.run(inst.constraints, config, Mode.SQUARING)
