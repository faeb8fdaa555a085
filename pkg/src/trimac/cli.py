"""Command-line drivers.

Exit codes: 0 on success, 1 when a check-style command reaches a
violated/infeasible verdict, 2 on invalid input.  Every command is
deterministic given its full flag set; machine output is CSV, with a PNG
figure rendered next to the CSV on the report paths (sweep, simulate).
The default output directory comes from TRIMAC_OUTDIR (fallback: cwd).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .models import NoiseSpec, example2_channel, example2_source, parse_config
from .probability import ProbabilityError, binary_entropy
from .common_parts import decompose, find_q_additive_parts
from .linear_code import Lemma4Report, SimConfig, SimResult, lemma4_verify, monte_carlo
from .regions import reduced_example2_report, x_equals_v_tables
from .search import (
    GridSpec,
    feasibility_search_thm1,
    gamma_star,
    improvement_sweep,
    maximize_ces_outer,
    sweep_to_csv,
)

CHECK_TOL = 1e-9


def _outdir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get("TRIMAC_OUTDIR") or "."
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _provenance(args) -> str:
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return f"trimac {__version__} | config: {json.dumps(echo, default=str)}"


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    return path


def cmd_gamma_star(args) -> int:
    noise = NoiseSpec(args.delta)
    hn = noise.entropy()
    gs = gamma_star(args.delta)
    print(_provenance(args))
    print(f"H(N)      = {hn:.12f} bits")
    print(f"2 - H(N)  = {2.0 - hn:.12f} bits")
    print(f"gamma*    = {gs:.12f}")
    if args.out:
        _write_csv(_outdir(args) / "gamma_star.csv",
                   ["delta", "H_N_bits", "two_minus_H_N_bits", "gamma_star"],
                   [[args.delta, f"{hn:.12f}", f"{2.0 - hn:.12f}", f"{gs:.12f}"]])
    return 0


def cmd_check_ces(args) -> int:
    source = example2_source(args.sigma, args.gamma)
    channel = example2_channel(NoiseSpec(args.delta))
    grid = GridSpec(step=args.step, restarts=args.restarts, seed=args.seed)
    res = maximize_ces_outer(source, channel, grid)
    lhs = binary_entropy(args.sigma) + binary_entropy(args.gamma)
    gap = lhs - res.best_value
    violated = lhs > res.best_value + CHECK_TOL
    print(_provenance(args))
    print(f"h(gamma) + h(sigma)        = {lhs:.9f} bits")
    print(f"product-form ceiling (grid) = {res.best_value:.9f} bits")
    print(f"excess over ceiling         = {gap:.9f} bits")
    print("verdict: CES necessary condition "
          + ("violated" if violated else "not violated (on this grid)"))
    if args.out:
        _write_csv(_outdir(args) / "check_ces.csv",
                   ["delta", "sigma", "gamma", "lhs_bits", "ceiling_bits",
                    "excess_bits", "violated"],
                   [[args.delta, args.sigma, args.gamma, f"{lhs:.9f}",
                     f"{res.best_value:.9f}", f"{gap:.9f}", int(violated)]])
    return 1 if violated else 0


def cmd_check_thm1(args) -> int:
    if args.witness != "xi-equals-vi":
        raise ProbabilityError(f"unknown witness {args.witness!r}")
    report = reduced_example2_report(args.sigma, args.gamma, args.delta,
                                     x_equals_v_tables(2))
    print(_provenance(args))
    labels = ("(10)", "(11)", "(12)", "(13)")
    rows = []
    for lab, e in zip(labels, report.entries):
        print(f"{lab}  lhs={e.lhs:.9f}  rhs={e.rhs:.9f}  slack={e.slack:+.9f}")
        rows.append([lab, f"{e.lhs:.9f}", f"{e.rhs:.9f}", f"{e.slack:.9f}"])
    feasible = report.all_satisfied(CHECK_TOL)
    best = report.min_slack()
    if args.search and not feasible:
        source = example2_source(args.sigma, args.gamma)
        channel = example2_channel(NoiseSpec(args.delta))
        grid = GridSpec(step=args.step, restarts=args.restarts, seed=args.seed)
        res = feasibility_search_thm1(source, channel, q=2, grid=grid)
        best = res.best_value
        feasible = best >= -CHECK_TOL
        print(f"searched min slack = {best:+.9f}")
    print(f"verdict: {'feasible' if feasible else 'infeasible at this witness'}")
    if args.out:
        _write_csv(_outdir(args) / "check_thm1.csv",
                   ["entry", "lhs_bits", "rhs_bits", "slack_bits"], rows)
    return 0 if feasible else 1


def cmd_sweep(args) -> int:
    sigmas = [float(x) for x in args.sigma_grid.split(",")]
    gammas = [float(x) for x in args.gamma_grid.split(",")]
    grid = GridSpec(step=args.step, restarts=args.restarts, seed=args.seed)
    thm1_grid = GridSpec(step=args.thm1_step, restarts=args.thm1_restarts,
                         seed=args.seed)
    rows = improvement_sweep(args.delta, sigmas, gammas, grid, thm1_grid)
    out = _outdir(args)
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as f:
        sweep_to_csv(rows, f)
    # gnuplot-ready companion: whitespace-separated, commented header
    dat_path = out / "sweep.dat"
    with open(dat_path, "w") as f:
        f.write("# delta sigma gamma lhs_sum ces_ceiling thm1_min_slack improved\n")
        for r in rows:
            f.write(f"{r.delta:g} {r.sigma:g} {r.gamma:g} {r.lhs_sum_bits:.9f} "
                    f"{r.ces_ceiling_bits:.9f} {r.thm1_min_slack_bits:.9f} "
                    f"{int(r.improved)}\n")
    from .plots import save_sweep_map

    png_path = out / "sweep.png"
    save_sweep_map(rows, str(png_path))
    flagged = sum(r.improved for r in rows)
    print(_provenance(args))
    print(f"rows: {len(rows)}, improved: {flagged}")
    for r in rows:
        mark = " IMPROVED" if r.improved else ""
        print(f"  sigma={r.sigma:g} gamma={r.gamma:g} lhs={r.lhs_sum_bits:.6f} "
              f"ceiling={r.ces_ceiling_bits:.6f} "
              f"min_slack={r.thm1_min_slack_bits:+.6f}{mark}")
    print(f"wrote {csv_path}, {dat_path}, {png_path}")
    return 0


def cmd_simulate(args) -> int:
    ns = [int(x) for x in args.n.split(",")]
    results: list[SimResult] = []
    for n in ns:
        cfg = SimConfig(n=n, q=args.q, delta=args.delta, sigma=args.sigma,
                        gamma=args.gamma, trials=args.trials, seed=args.seed)
        results.append(monte_carlo(cfg))
    out = _outdir(args)
    csv_path = out / "simulate.csv"
    _write_csv(csv_path, SimResult.csv_header(), [r.csv_row() for r in results])
    from .plots import save_pe_curve

    png_path = out / "simulate.png"
    save_pe_curve(results, str(png_path))
    print(_provenance(args))
    for r in results:
        lo, hi = r.wilson_interval()
        print(f"n={r.n}: p_e_hat={r.p_e_hat:.5f} [{lo:.5f}, {hi:.5f}] "
              f"errors={r.errors}/{r.trials} cases={r.case_counts}")
    print(f"wrote {csv_path}, {png_path}")
    return 0


def cmd_common_parts(args) -> int:
    with open(args.config) as f:
        source, _channel, echo = parse_config(f.read())
    print(_provenance(args))
    parts = decompose(source)
    for key in ("12", "13", "23", "123"):
        p = parts[key]
        print(f"part {key}: k = {p.k}" + ("" if p.k > 1 else " (trivial)"))
        if p.k > 1:
            for m in p.members:
                print(f"    {m}: {p.maps[m]}")
    for q in (int(x) for x in args.q_list.split(",")):
        found = find_q_additive_parts(source, q)
        print(f"{q}-additive classes: {len(found)}")
        for part in found:
            print(f"    t1={part.maps[0]} t2={part.maps[1]} t3={part.maps[2]}")
    if args.echo:
        print(json.dumps(echo))
    return 0


def cmd_lemma4(args) -> int:
    rep: Lemma4Report = lemma4_verify(args.n, args.q)
    print(_provenance(args))
    print(f"classes checked: {rep.classes_checked}; "
          f"mismatches: {len(rep.mismatches)}")
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="trimac",
        description="Achievability checks and linear-code simulation for the "
                    "three-user MAC with correlated sources.")
    ap.add_argument("--version", action="version", version=f"trimac {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gamma-star", help="boundary parameter for the benchmark channel")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_gamma_star)

    p = sub.add_parser("check-ces", help="product-form necessary-condition check")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--step", type=float, default=1 / 64)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_check_ces)

    p = sub.add_parser("check-thm1", help="reduced augmented-scheme feasibility check")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--witness", default="xi-equals-vi")
    p.add_argument("--search", action="store_true",
                   help="run the table search when the witness is infeasible")
    p.add_argument("--step", type=float, default=1 / 16)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_check_thm1)

    p = sub.add_parser("sweep", help="improvement-region sweep (CSV + dat + PNG)")
    p.add_argument("--delta", type=float, default=0.125)
    p.add_argument("--sigma-grid", default="0.001,0.01,0.05")
    p.add_argument("--gamma-grid", default="0.114,0.124,0.134,0.144")
    p.add_argument("--step", type=float, default=1 / 64)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--thm1-step", type=float, default=1 / 16)
    p.add_argument("--thm1-restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="finite-blocklength error curve (CSV + PNG)")
    p.add_argument("--n", default="4,8,12", help="comma list of blocklengths")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.11)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("common-parts", help="univariate and additive parts of a source")
    p.add_argument("--config", required=True, help="JSON config path")
    p.add_argument("--q-list", default="2,3")
    p.add_argument("--echo", action="store_true", help="print canonical config echo")
    p.set_defaults(func=cmd_common_parts)

    p = sub.add_parser("lemma4", help="exact generator-matrix statistics check")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--q", type=int, default=2)
    p.set_defaults(func=cmd_lemma4)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ProbabilityError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
