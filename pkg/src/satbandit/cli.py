"""Command-line front end for the experiment harness.

Subcommands mirror the experiment families: ``run`` executes one spec,
``sweep`` scans a horizon grid, ``tail`` collects fixed-horizon regret
distributions, ``ablation`` runs the step-ablation variants, ``robustness``
scans the gamma-scale multiplier, and ``calibrate`` fits a pricing instance
from (price, volume) data.  Every run writes raw/aggregate CSVs plus a JSON
manifest of the fully resolved configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import harness
from .env import model_from_dict
from .harness import (
    ALGORITHMS,
    PRESETS,
    SELECT,
    SELECT_LITE,
    ExperimentSpec,
    calibrate_pricing,
    fit_tail_exponent,
    regret_histogram,
    run_experiment,
    tail_exceedance,
    write_outputs,
)
from .select import ABLATIONS


def _add_common(p):
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in instance")
    p.add_argument("--spec-file", help="JSON file with ExperimentSpec fields")
    p.add_argument("--algo", default=SELECT, choices=ALGORITHMS)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zeta", type=float, default=None,
                   help="tail parameter for the light-tailed variants")
    p.add_argument("--gamma-scale", type=float, default=None,
                   help="multiplier on every gamma_i (default: preset value)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results", help="output directory")


def _spec_from_args(args, horizons, algorithm=None, ablation="full",
                    gamma_scale=None) -> ExperimentSpec:
    base = {}
    if args.spec_file:
        base = json.loads(Path(args.spec_file).read_text())
        if "model" in base:
            base["model"] = model_from_dict(base["model"])
        if "params" in base and isinstance(base["params"], dict):
            from .oracles import OracleParams
            base["params"] = OracleParams(**base["params"])
    merged = dict(
        preset=args.preset or base.get("preset", ""),
        algorithm=algorithm or args.algo,
        horizons=tuple(horizons),
        replications=args.reps,
        base_seed=args.seed,
        zeta=args.zeta if args.zeta is not None else base.get("zeta"),
        gamma_scale=gamma_scale if gamma_scale is not None else args.gamma_scale,
        ablation=ablation,
        workers=args.workers,
        out_dir=args.out,
    )
    for key in ("model", "S", "oracle_kind", "params", "oracle_options",
                "fresh_oracle", "base_seed", "replications"):
        if key in base and key not in ("replications", "base_seed"):
            merged[key] = base[key]
    if "replications" in base and args.reps == 100:
        merged["replications"] = base["replications"]
    if "base_seed" in base and args.seed == 0:
        merged["base_seed"] = base["base_seed"]
    return ExperimentSpec(**merged)


def _report(result):
    for t in result.spec.horizons:
        c = result.cells[t]
        print(f"{result.spec.algorithm:>16s}  T={t:<6d} "
              f"sat={c.mean_satisficing:10.3f} (+-{c.stderr_satisficing:.3f})  "
              f"std={c.mean_standard:10.3f} (+-{c.stderr_standard:.3f})")


def cmd_run(args) -> int:
    spec = _spec_from_args(args, args.horizon, ablation=args.ablation)
    _report(run_experiment(spec))
    return 0


def cmd_sweep(args) -> int:
    horizons = list(range(args.t_start, args.t_stop + 1, args.t_step))
    spec = _spec_from_args(args, horizons)
    _report(run_experiment(spec))
    return 0


def cmd_tail(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summaries = {}
    per_algo = {}
    for algo in args.algos:
        spec = _spec_from_args(args, [args.horizon_value], algorithm=algo)
        result = run_experiment(spec)
        regrets = result.regrets(args.horizon_value)
        per_algo[algo] = regrets
        edges, counts = regret_histogram(regrets, args.bin_width)
        stem = f"{args.preset or 'inline'}_{algo}_T{args.horizon_value}"
        with open(out / f"{stem}_hist.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for j, c in enumerate(counts):
                w.writerow([repr(float(edges[j])), repr(float(edges[j + 1])), int(c)])
        summaries[algo] = {
            "mean": float(regrets.mean()),
            "q95": float(sorted(regrets)[int(0.95 * (len(regrets) - 1))]),
            "fitted_tail_exponent": fit_tail_exponent(regrets),
        }
        _report(result)
    xs = sorted({round(x, 6) for r in per_algo.values() for x in
                 [float(max(r)) * q for q in (0.1, 0.25, 0.5, 0.75, 0.9)]})
    preset_stem = args.preset or "inline"
    for algo, regrets in per_algo.items():
        curve = tail_exceedance(regrets, xs)
        stem = f"{preset_stem}_{algo}_T{args.horizon_value}"
        with open(out / f"{stem}_exceedance.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "p_hat", "wilson_lo", "wilson_hi"])
            for pt in curve:
                w.writerow([repr(pt.x), repr(pt.p_hat), repr(pt.lo), repr(pt.hi)])
    print(json.dumps(summaries, indent=2, sort_keys=True))
    return 0


def cmd_ablation(args) -> int:
    for variant in ABLATIONS:
        spec = _spec_from_args(args, args.horizon, algorithm=SELECT,
                               ablation=variant)
        result = run_experiment(spec)
        write_outputs(result, Path(args.out),
                      stem=f"{spec.preset}_select_{variant}")
        print(f"--- ablation={variant}")
        _report(result)
    return 0


def cmd_robustness(args) -> int:
    for lam in args.scales:
        spec = _spec_from_args(args, args.horizon, gamma_scale=lam)
        result = run_experiment(spec)
        write_outputs(result, Path(args.out),
                      stem=f"{spec.preset}_{spec.algorithm}_lambda{lam}")
        print(f"--- gamma_scale={lam}")
        _report(result)
    return 0


def cmd_calibrate(args) -> int:
    rows = []
    try:
        with open(args.data, newline="") as fh:
            for row in csv.reader(fh):
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    continue  # header or malformed line
    except OSError as exc:
        print(f"calibration failed reading {args.data}: {exc}", file=sys.stderr)
        return 1
    model, fit = calibrate_pricing(rows, p_lo=args.p_lo, p_hi=args.p_hi)
    if fit["zero_noise"]:
        print("warning: perfect linear fit (sigma = 0); "
              "coefficients left unnormalized", file=sys.stderr)
    print(json.dumps({"fit": fit, "model": harness.env.model_to_dict(model)},
                     indent=2, sort_keys=True))
    if args.instance_out:
        d = harness.env.model_to_dict(model)
        d["S"] = args.S
        Path(args.instance_out).write_text(json.dumps(d, indent=2, sort_keys=True))
        print(f"instance written to {args.instance_out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="satbandit",
                                 description="satisficing bandit experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one experiment at explicit horizons")
    _add_common(p)
    p.add_argument("--horizon", type=int, nargs="+", default=[1000])
    p.add_argument("--ablation", default="full", choices=ABLATIONS)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="scan a horizon grid")
    _add_common(p)
    p.add_argument("--t-start", type=int, default=500)
    p.add_argument("--t-stop", type=int, default=5000)
    p.add_argument("--t-step", type=int, default=500)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("tail", help="regret distribution at a fixed horizon")
    _add_common(p)
    p.add_argument("--horizon-value", type=int, default=10000)
    p.add_argument("--bin-width", type=float, default=10.0)
    p.add_argument("--algos", nargs="+", default=[SELECT, SELECT_LITE],
                   choices=ALGORITHMS)
    p.set_defaults(fn=cmd_tail)

    p = sub.add_parser("ablation", help="run all step-ablation variants")
    _add_common(p)
    p.add_argument("--horizon", type=int, nargs="+", default=[2500, 5000])
    p.set_defaults(fn=cmd_ablation)

    p = sub.add_parser("robustness", help="scan the gamma-scale multiplier")
    _add_common(p)
    p.add_argument("--horizon", type=int, nargs="+", default=[5000])
    p.add_argument("--scales", type=float, nargs="+", default=[0.5, 1.0, 2.0, 5.0])
    p.set_defaults(fn=cmd_robustness)

    p = sub.add_parser("calibrate", help="fit a pricing instance from CSV data")
    p.add_argument("--data", required=True, help="CSV of price,volume rows")
    p.add_argument("--p-lo", type=float, default=0.0)
    p.add_argument("--p-hi", type=float, default=4.0)
    p.add_argument("--S", type=float, default=8.0,
                   help="satisficing level stored in the instance file")
    p.add_argument("--instance-out", help="write a loadable instance JSON here")
    p.set_defaults(fn=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
