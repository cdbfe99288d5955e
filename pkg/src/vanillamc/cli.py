"""Command-line entry point: ``vanillamc {run,check,demo}``."""

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .harness import OUTPUT_ENV, _default_output_dir, cells, execute, instance, parse_config, planned_runs
from .problem import project_omega, sample_mask
from .solver import FactorPair, SolverConfig, solve, write_trajectory_csv


def check_suite(seed=0):
    """Reference diagnostics; returns a list of :class:`CheckSummary`."""
    out = []

    worst = 0.0
    for k in range(20):
        p = 0.5 if k % 2 else 1.0
        gt, mask = instance(20 + k % 5, 15 + k % 4, 1 + k % 3, 2.0, p, seed + k)
        rng = np.random.default_rng([seed, k])
        fp = FactorPair(gt.U + 0.3 * rng.standard_normal(gt.U.shape), gt.V + 0.3 * rng.standard_normal(gt.V.shape))
        worst = max(worst, dg.gradient_fd_check(fp, project_omega(gt.M, mask), mask, 20, 1e-5, seed + k))
    out.append(dg.CheckSummary("gradient_fd", {"instances": 20, "h": 1e-5}, worst, worst <= 1e-6))

    worst = 0.0
    for k in range(20):
        gt, mask = instance(25, 20, 2, 2.0, 0.5, seed + k)
        rng = np.random.default_rng([seed, k, 1])
        fp = FactorPair(*(A + 0.3 * rng.standard_normal(A.shape) for A in (gt.U, gt.V)))
        D = FactorPair(*(rng.standard_normal(A.shape) for A in (gt.U, gt.V)))
        q = dg.hessian_quadratic_form(fp, D, gt.M, mask)
        fd = dg.second_difference(fp, D, project_omega(gt.M, mask), mask, 1e-4)
        worst = max(worst, abs(q - fd) / abs(q))
    out.append(dg.CheckSummary("hessian_form", {"samples": 20, "h": 1e-4}, worst, worst <= 1e-5))

    ns = [50, 100, 200, 400]
    gaps = [np.mean([dg.spectral_gap(sample_mask(n, n, 0.3, 1000 * seed + s)) for s in range(5)]) for n in ns]
    slope = dg.fit_exponent(ns, gaps)
    out.append(dg.CheckSummary("spectral_gap_exponent", {"n": "50/100/200/400", "p": 0.3}, slope, 0.4 <= slope <= 0.6))

    held = 0
    for k in range(100):
        mask = sample_mask(60, 60, 0.3, 10_000 + seed * 100 + k)
        rng = np.random.default_rng([seed, k, 2])
        A, B, C, D = (rng.standard_normal((60, 1 + k % 3)) for _ in range(4))
        held += abs(dg.sampling_deviation(A, C, B, D, mask)) <= dg.deviation_bound(A, C, B, D, mask)
    out.append(dg.CheckSummary("deviation_bound", {"instances": 100, "n": 60, "p": 0.3}, held / 100, held == 100))

    gt, mask = instance(150, 130, 2, 2.0, 0.6, seed)
    frac = dg.hessian_bounds_check(gt, mask, 200, 1.0, seed)
    out.append(dg.CheckSummary("hessian_bounds", {"n1": 150, "n2": 130, "r": 2, "kappa": 2.0, "p": 0.6},
                               frac, frac >= 0.95))
    return out


def _cmd_run(args):
    cfg = parse_config(args.config)
    if args.dry_run:
        print(f"{len(cells(cfg))} cells x {len(cfg.seeds)} seeds x {len(cfg.variants)} variants "
              f"= {planned_runs(cfg)} planned runs")
        return 0
    out = args.out or cfg.output_dir
    results = execute(cfg, threads=args.threads, output_dir=out)
    for res in results:
        print(f"n1={res.n1} n2={res.n2} r={res.r} kappa={res.kappa:g} p={res.p:g} {res.variant}: "
              f"success {res.success_rate:.2f}")
    print(f"report written to {out}")
    return 0


def _cmd_check(args):
    out = Path(args.out or _default_output_dir())
    checks = check_suite(args.seed)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "checks.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dg.SUMMARY_HEADER)
        for c in checks:
            w.writerow(c.csv_row())
    for c in checks:
        sys.stdout.write(c.csv_line())
    return 0 if all(c.passed for c in checks) else 1


def _cmd_demo(args):
    gt, mask = instance(args.n1, args.n2, args.r, args.kappa, args.p, args.seed)
    print(f"planted rank-{gt.r} matrix {gt.n1}x{gt.n2}: kappa={gt.kappa:g} mu={gt.mu:.3f} "
          f"aspect={gt.aspect_ratio:.3f}")
    print(f"observed {mask.count} of {mask.observed.size} entries (p={mask.p:g}, "
          f"empirical {mask.empirical_rate:.4f}); degrees of freedom {gt.r * (gt.n1 + gt.n2 - gt.r)}")
    cfg = SolverConfig(max_iters=args.max_iters, record_every=args.record_every)
    res = solve(gt, mask, cfg, args.variant)
    rho = 1.0 - 0.05 * res.eta * gt.sigmar
    print(f"step size {res.eta:.6g}, guaranteed rate {rho:.8f}")
    stride = max(1, len(res.records) // 10)
    for rec in res.records[::stride] + [res.records[-1]]:
        env = rho ** rec.iter * math.sqrt(gt.sigmar)
        print(f"  t={rec.iter:6d}  f={rec.objective:.3e}  aligned frob={rec.aligned_frob_err:.3e}  "
              f"envelope={env:.3e}  rel err={rec.rel_err:.3e}")
    print(f"stopped after {res.iterations} iterations, relative recovery error {res.rel_err:.3e}")
    if args.out:
        path = Path(args.out) / "demo_trajectory.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(res.records, path)
        print(f"trajectory written to {path}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="vanillamc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a sweep from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help=f"output directory (default: config output_dir, ${OUTPUT_ENV})")
    run.add_argument("--dry-run", action="store_true", help="only report the planned run count")
    run.add_argument("--threads", type=int, default=1)
    run.set_defaults(func=_cmd_run)

    chk = sub.add_parser("check", help="run the diagnostics suite")
    chk.add_argument("--out")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--threads", type=int, default=1, help="accepted for symmetry; the suite is sequential")
    chk.set_defaults(func=_cmd_check)

    demo = sub.add_parser("demo", help="one annotated run")
    demo.add_argument("--n1", type=int, default=120)
    demo.add_argument("--n2", type=int, default=100)
    demo.add_argument("--r", type=int, default=3)
    demo.add_argument("--kappa", type=float, default=2.0)
    demo.add_argument("--p", type=float, default=0.4)
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--max-iters", type=int, default=50000)
    demo.add_argument("--record-every", type=int, default=100)
    demo.add_argument("--variant", choices=("vanilla", "projected"), default="vanilla")
    demo.add_argument("--out")
    demo.set_defaults(func=_cmd_demo)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
