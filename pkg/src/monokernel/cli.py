"""Command-line front end.

Exit codes: 0 success/feasible, 1 infeasible (or disagreement for
``crosscheck``), 2 usage error, 3 boundary case, 4 drift step too large.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import List, Optional

from .core import MonokernelError, ReducedModel, ratio_set, DriftStepError, LatticeConfig, TransitionKernel
from .feasibility import dual_certificate, is_feasible, min_stencil, necessary_min_s
from .grid import bs_audit
from .lp import kernel_to_json, solve_kernel, verify_kernel
from .stencils import DriftSpec, upwind_drift
from .sweep import cross_check_sweep, dual_window_curve, rho_max_curve

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_BOUNDARY, EXIT_DRIFT = 0, 1, 2, 3, 4


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def cmd_check(args) -> int:
    v = is_feasible(ReducedModel(args.R, args.rho), ratio_set(args.s))
    if args.json:
        print(json.dumps({"R": args.R, "rho": args.rho, "s": args.s, "feasible": v.feasible,
                          "dual_infimum": None if math.isinf(v.dual_infimum) else v.dual_infimum,
                          "threshold": v.threshold,
                          "margin": None if math.isinf(v.margin) else v.margin,
                          "boundary": v.boundary}))
    else:
        print(f"verdict: {'feasible' if v.feasible else 'infeasible'}")
        print(f"dual_infimum: {_fmt(v.dual_infimum)}")
        print(f"threshold: {_fmt(v.threshold)}")
        print(f"margin: {_fmt(v.margin)}")
        print(f"boundary: {str(v.boundary).lower()}")
    if v.boundary:
        return EXIT_BOUNDARY
    return EXIT_OK if v.feasible else EXIT_INFEASIBLE


def _scaled(kernel: TransitionKernel, lam: float) -> TransitionKernel:
    c = lam / kernel.lam
    if c > 1 + 1e-12:
        raise ValueError(f"--lam {lam:g} exceeds the maximal lambda {kernel.lam:g}")
    entries = {o: c * p for o, p in kernel.entries.items() if o != (0, 0)}
    entries[(0, 0)] = 1.0 - sum(entries.values())
    return TransitionKernel(kernel.R, kernel.rho, kernel.s, lam, entries)


def cmd_kernel(args) -> int:
    model = ReducedModel(args.R, args.rho)
    spec = ratio_set(args.s)
    sol = solve_kernel(model, spec, args.objective)
    if sol.status != "optimal":
        cert = dual_certificate(model, spec)
        msg = {"status": "infeasible", "certificate": None}
        if cert is not None:
            msg["certificate"] = {"z1": cert.z1, "z2": cert.z2, "sign": cert.sign}
        print(json.dumps(msg))
        return EXIT_INFEASIBLE
    kernel = sol.kernel
    if args.lam is not None:
        kernel = _scaled(kernel, args.lam)
    if args.mu1 or args.mu2:
        H = args.H if args.H is not None else args.h
        config = LatticeConfig(args.h, H, kernel.lam * args.h ** 2)
        try:
            kernel = upwind_drift(kernel, DriftSpec(args.mu1, args.mu2), config)
        except DriftStepError as exc:
            print(json.dumps({"status": "drift-step-too-large", "k": config.k,
                              "admissible_k": exc.admissible_k}))
            return EXIT_DRIFT
    else:
        report = verify_kernel(kernel, model)
        if not report.passed:
            raise MonokernelError(f"kernel failed moment verification: {report.as_dict()}")
    _emit(kernel_to_json(kernel), args.output)
    return EXIT_OK


def cmd_rhomax(args) -> int:
    t = rho_max_curve(args.R_min, args.R_max, args.steps, ratio_set(args.s), args.tol, args.log, args.workers)
    _emit(t.to_json() if args.json else t.to_csv(), args.output)
    return EXIT_OK


def cmd_window(args) -> int:
    t = dual_window_curve(args.R_min, args.R_max, args.steps, args.rho, ratio_set(args.s), args.log, args.workers)
    _emit(t.to_json() if args.json else t.to_csv(), args.output)
    return EXIT_OK


def cmd_minstencil(args) -> int:
    model = ReducedModel(args.R, args.rho)
    s = min_stencil(model, args.s_max)
    out = {"R": args.R, "rho": args.rho, "s_max": args.s_max, "min_s": s,
           "necessary_s": necessary_min_s(model)}
    print(json.dumps(out) if args.json else (str(s) if s is not None else "none"))
    return EXIT_OK if s is not None else EXIT_INFEASIBLE


def cmd_audit_bs(args) -> int:
    rep = bs_audit(args.rho, args.sigma1, args.sigma2, args.n, args.s_max)
    summary = {"nodes": int(rep.feasible.size), "infeasible": rep.n_infeasible,
               "feasible_fraction": rep.feasible_fraction, "R_range": list(rep.R_range),
               "max_necessary_s": rep.max_necessary_s, "claim_expected": rep.claim_expected,
               "claim_holds": rep.claim_holds}
    if args.output:
        _emit(rep.to_csv(), args.output)
        print(json.dumps(summary))
    else:
        sys.stdout.write(rep.to_csv())
        print(json.dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_crosscheck(args) -> int:
    summary = cross_check_sweep(args.trials, args.seed, args.s_max, args.workers)
    _emit(json.dumps(summary.as_dict(), indent=1) + "\n", args.output)
    return EXIT_OK if summary.disagree == 0 else EXIT_INFEASIBLE


def _sweep_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--R-min", dest="R_min", type=float, required=True)
    p.add_argument("--R-max", dest="R_max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--log", action="store_true", help="geometric spacing in R")
    p.add_argument("--json", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monokernel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="dual feasibility verdict")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("kernel", help="solve the moment LP and write kernel JSON")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--objective", choices=["lambda-max", "compactness"], default="lambda-max")
    p.add_argument("--lam", type=float, help="rescale to this lambda (at most the optimum)")
    p.add_argument("--mu1", type=float, default=0.0)
    p.add_argument("--mu2", type=float, default=0.0)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--H", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("rhomax", help="rho_max curve over R")
    _sweep_args(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_rhomax)

    p = sub.add_parser("window", help="dual window curve over R")
    _sweep_args(p)
    p.add_argument("--rho", type=float, required=True)
    p.set_defaults(func=cmd_window)

    p = sub.add_parser("minstencil", help="smallest feasible stencil radius")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--s-max", dest="s_max", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_minstencil)

    p = sub.add_parser("audit-bs", help="Black-Scholes uniform-mesh audit")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--s-max", dest="s_max", type=int, default=5)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_audit_bs)

    p = sub.add_parser("crosscheck", help="primal/dual agreement on random triples")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--s-max", dest="s_max", type=int, default=6)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_crosscheck)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
