"""Command-line front end.

Subcommands::

    psdcomplete check  INSTANCE   decide eps-feasibility     (exit 0 / 2 / 3)
    psdcomplete square INSTANCE   approximate PSD completion (exit 0 / 3)
    psdcomplete verify RESULT INSTANCE                       (exit 0 / 2 / 3)
    psdcomplete bench             CSV benchmark of generated instances

Exit codes: 0 feasible to eps (or claim confirmed), 2 infeasible (or claim
refuted), 3 budget exhausted (nothing to confirm), 1 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import io as fio
from .bundle import SolverConfig, Status
from .completion import approximate_square, check_feasibility, generate_instance, verify_certificate

log = logging.getLogger("psdcomplete")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3
EXIT_FOR_STATUS = {
    Status.FEASIBLE_TO_EPS: EXIT_OK,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.BUDGET_EXHAUSTED: EXIT_BUDGET,
}
BENCH_COLUMNS = [
    "n", "m", "eps", "seed", "verdict", "iterations", "null_steps",
    "descent_steps", "wall_time", "residual", "status",
]


def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--eps", type=float, default=1e-2)
    g.add_argument("--rho", type=float, default=None, help="default 0.1 (check) or 1/alpha (square)")
    g.add_argument("--beta", type=float, default=0.25)
    g.add_argument("--kc", type=int, default=SolverConfig.k_c)
    g.add_argument("--kp", type=int, default=SolverConfig.k_p)
    g.add_argument("--alpha", type=float, default=None, help="default 2 tr(M) + 1")
    g.add_argument("--max-iters", type=int, default=SolverConfig.max_iters)
    g.add_argument("--sketch-rank", type=int, default=None)
    g.add_argument("--dense-cutoff", type=int, default=SolverConfig.dense_cutoff)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=1)


def _config(args, **extra):
    return SolverConfig(
        eps=args.eps,
        rho=args.rho,
        beta=args.beta,
        k_c=args.kc,
        k_p=args.kp,
        alpha=args.alpha,
        max_iters=args.max_iters,
        seed=args.seed,
        sketch_rank=args.sketch_rank,
        dense_cutoff=args.dense_cutoff,
        **extra,
    )


def build_parser():
    p = argparse.ArgumentParser(prog="psdcomplete", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="decide eps-feasibility of a completion")
    c.add_argument("instance")
    c.add_argument("--out", help="write the result document here instead of stdout")
    c.add_argument("--factor-out", help="also track the primal and write its factor")
    _solver_flags(c)

    s = sub.add_parser("square", help="approximate PSD completion to residual eps")
    s.add_argument("instance")
    s.add_argument("--out")
    s.add_argument("--factor-out", help="factor file (default: <instance>.factor)")
    _solver_flags(s)

    v = sub.add_parser("verify", help="independently re-check a result document")
    v.add_argument("result")
    v.add_argument("instance")
    v.add_argument("--threads", type=int, default=1)

    b = sub.add_parser("bench", help="benchmark on generated instances, CSV output")
    b.add_argument("--sizes", default="20,40")
    b.add_argument("--eps-grid", default="0.1,0.05,0.025")
    b.add_argument("--seeds", default="0")
    b.add_argument("--m-factor", type=int, default=3, help="m = m_factor * n for 'square' instances")
    b.add_argument("--kind", choices=["square", "chain"], default="square")
    b.add_argument("--mode", choices=["check", "square"], default="check")
    b.add_argument("--no-timing", action="store_true", help="write 0 for wall_time (reproducible CSV)")
    b.add_argument("--out", help="CSV path (default stdout)")
    _solver_flags(b)
    return p


# ---------------------------------------------------------------- result documents


def _floats(x):
    return None if x is None else [float(v) for v in np.asarray(x).ravel()]


def result_document(command, inst, path, out, factor_path=None):
    d = out.diagnostics
    cfg = dict(d.get("config", {}))
    return {
        "format": fio.RESULT_FORMAT,
        "version": __version__,
        "command": command,
        "instance": {"path": str(path), "n": inst.n, "m": inst.m},
        "status": out.status.value,
        "eps": out.eps,
        "residual_l2": out.residual_l2,
        "residual_max_entry": out.residual_max_entry,
        "tracked_residual_l2": d.get("tracked_residual_l2"),
        "certificate": _floats(out.certificate),
        "certified_value": out.certified_value,
        "factor_file": None if factor_path is None else str(factor_path),
        "iterations": d.get("iterations"),
        "descent_steps": d.get("descent_steps"),
        "null_steps": d.get("null_steps"),
        "dual_iterate_norm": d.get("y_norm"),
        "gap_trace": _floats(d.get("gap_history", [])),
        "wall_time": d.get("wall_time"),
        "reason": d.get("reason"),
        "config": cfg,
    }


def _emit(doc, out_path):
    text = fio.write_result(doc, out_path)
    if out_path is None:
        print(text)


def _run_solve(args, command):
    inst = fio.read_instance(args.instance)
    factor_path = args.factor_out
    if command == "square":
        factor_path = factor_path or args.instance + ".factor"
        out = approximate_square(inst, _config(args))
    else:
        out = check_feasibility(inst, _config(args, track_primal=factor_path is not None))
    if factor_path is not None and out.factor is not None:
        fio.write_factor(*out.factor, factor_path)
    else:
        factor_path = None
    _emit(result_document(command, inst, args.instance, out, factor_path), args.out)
    log.info("%s: %s after %d iterations", command, out.status.value, out.diagnostics.get("iterations", 0))
    return EXIT_FOR_STATUS[out.status]


def cmd_check(args):
    return _run_solve(args, "check")


def cmd_square(args):
    return _run_solve(args, "square")


# ---------------------------------------------------------------- verification


def _factor_path(doc, result_path):
    p = doc.get("factor_file")
    if p is None:
        return None
    if not os.path.isabs(p) and not os.path.exists(p):
        p = os.path.join(os.path.dirname(os.path.abspath(result_path)), p)
    return p


def verify_document(doc, inst, result_path="."):
    """Re-check the claim of a result document; returns ``(exit_code, message)``."""
    if doc["instance"]["n"] != inst.n or doc["instance"]["m"] != inst.m:
        return EXIT_USAGE, (
            f"instance mismatch: document has n={doc['instance']['n']}, m={doc['instance']['m']}, "
            f"file has n={inst.n}, m={inst.m}"
        )
    C = inst.constraints
    cfg = doc.get("config", {})
    alpha = cfg.get("alpha") or 2.0 * C.trace_target + 1.0
    cutoff = cfg.get("dense_cutoff", 500)
    status, eps = doc["status"], float(doc["eps"])

    if status == Status.INFEASIBLE.value:
        y = np.asarray(doc.get("certificate") or [], dtype=float)
        if y.size != C.m:
            return EXIT_INFEASIBLE, f"certificate has length {y.size}, expected {C.m}"
        value = verify_certificate(C, y, alpha, cutoff)
        if value < 0:
            return EXIT_OK, f"certificate confirmed: f(y) = {value:.6e} < 0"
        return EXIT_INFEASIBLE, f"certificate refuted: f(y) = {value:.6e} >= 0"

    if status == Status.BUDGET_EXHAUSTED.value:
        return EXIT_BUDGET, "budget exhausted: the document makes no claim to verify"

    fpath = _factor_path(doc, result_path)
    if fpath is None:
        if doc["command"] == "square":
            return EXIT_INFEASIBLE, "squaring result without a factor file"
        return EXIT_OK, "feasible-to-eps check result without a factor; nothing further to recompute"
    U, lam = fio.read_factor(fpath)
    if U.shape[0] != inst.n:
        return EXIT_USAGE, f"factor has {U.shape[0]} rows, instance has n={inst.n}"
    if lam.size and lam.min() < 0:
        return EXIT_INFEASIBLE, f"factor has a negative eigenvalue {lam.min():.3e}"
    image = C.apply(U, lam) if lam.size else np.zeros(C.m)
    residual = float(np.linalg.norm(image - C.b))
    # allow for rounding in the order of summation only
    slack = 1e-12 * (1.0 + float(np.linalg.norm(C.b)))
    if doc["command"] == "square":
        if residual <= eps + slack:
            return EXIT_OK, f"residual confirmed: |A X - b| = {residual:.6e} <= {eps:g}"
        return EXIT_INFEASIBLE, f"residual refuted: |A X - b| = {residual:.6e} > {eps:g}"
    # check mode with the dual iterate at the origin: gap = |A X - b|^2 / (2 rho)
    rho = cfg.get("rho", 0.1)
    if doc.get("dual_iterate_norm", 0.0) != 0.0:
        return EXIT_OK, "dual iterate left the origin; gap identity does not apply, factor is PSD"
    gap = residual * residual / (2.0 * rho)
    if gap <= eps + slack:
        return EXIT_OK, f"gap confirmed: |A X - b|^2 / (2 rho) = {gap:.6e} <= {eps:g}"
    return EXIT_INFEASIBLE, f"gap refuted: |A X - b|^2 / (2 rho) = {gap:.6e} > {eps:g}"


def cmd_verify(args):
    doc = fio.read_result(args.result)
    inst = fio.read_instance(args.instance)
    code, message = verify_document(doc, inst, args.result)
    print(message)
    return code


# ---------------------------------------------------------------- benchmark


def _parse_list(text, kind):
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise fio.FormatError(f"cannot parse list {text!r}") from None


def bench_rows(args):
    sizes = _parse_list(args.sizes, int)
    grid = _parse_list(args.eps_grid, float)
    seeds = _parse_list(args.seeds, int)
    for n in sizes:
        for seed in seeds:
            m = args.m_factor * n if args.kind == "square" else n + 3
            try:
                inst = generate_instance(args.kind, n, m, seed)
            except ValueError as exc:
                yield dict(n=n, m=m, eps="", seed=seed, status=f"error: {exc}")
                continue
            for eps in grid:
                args.eps = eps
                row = dict(n=n, m=inst.m, eps=eps, seed=seed)
                t0 = time.perf_counter()
                try:
                    solve = approximate_square if args.mode == "square" else check_feasibility
                    out = solve(inst, _config(args))
                except Exception as exc:  # recorded per row, the suite continues
                    row["status"] = f"error: {exc}"
                    yield row
                    continue
                wall = time.perf_counter() - t0
                d = out.diagnostics
                row.update(
                    verdict=out.status.value,
                    iterations=d["iterations"],
                    null_steps=d["null_steps"],
                    descent_steps=d["descent_steps"],
                    wall_time=0.0 if args.no_timing else round(wall, 6),
                    residual=format(out.residual_l2, ".17g") if out.residual_l2 is not None else "",
                    status="ok" if out.status is not Status.BUDGET_EXHAUSTED else "budget",
                )
                yield row


def cmd_bench(args):
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        fh.write(fio.BENCH_TAG + "\n")
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, restval="")
        writer.writeheader()
        for row in bench_rows(args):
            writer.writerow(row)
            fh.flush()
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


COMMANDS = {"check": cmd_check, "square": cmd_square, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 means "infeasible" here
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with threadpool_limits(limits=max(1, args.threads)):
            return COMMANDS[args.command](args)
    except (fio.FormatError, ValueError, OSError, KeyError) as exc:
        print(f"psdcomplete: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
