"""Command-line harness.

Subcommands: ``fp-check`` (degree statistics of X vs N(X)), ``estimate``
(RR / Monte Carlo / exact side by side), ``run`` (algorithm roster with CSV
and JSON reports), and ``split-heuristic`` (degree-proportional budget
split).  Exit codes: 0 success, 2 configuration error, 3 dataset error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import core
from .bench import (
    ALGORITHMS,
    ConfigError,
    DatasetError,
    ExperimentConfig,
    budget_split_heuristic,
    cmd_estimate,
    cmd_fp_check,
    load_dataset,
    run_experiment,
)
from .graph import sample_accessible
from .rng import spawn
from .seeding import SETTING_1, SETTING_2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="edge-list file; omit to use a synthetic graph")
    p.add_argument("--synthetic-pa", nargs=2, type=int, metavar=("N", "M"),
                   default=(10000, 5), help="preferential-attachment graph size (default 10000 5)")
    p.add_argument("--undirected", action="store_true",
                   help="treat dataset edges as undirected (doubles them)")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="edge probability scale: p(u,v) = alpha / in-degree(v)")
    p.add_argument("--x-size", type=int, default=100, help="number of accessible users")
    p.add_argument("--theta", type=int, help="RR sets for estimation (default 20 n ln n)")
    p.add_argument("--setting", type=int, choices=(1, 2), default=1,
                   help="seed-probability mix preset")
    p.add_argument("--profile-mix", help="JSON list of [fraction, kind] pairs")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--eval-runs", type=int, default=20000,
                   help="Monte Carlo cascades per evaluation")
    p.add_argument("--workers", type=int, help="worker streams (default $NEIGHBORSEED_WORKERS)")
    p.add_argument("--out", help="output directory for reports")


def _config_from(args) -> ExperimentConfig:
    mix = SETTING_1 if args.setting == 1 else SETTING_2
    if args.profile_mix:
        mix = tuple((float(f), str(k)) for f, k in json.loads(args.profile_mix))
    return ExperimentConfig(
        dataset=args.dataset,
        synthetic=tuple(args.synthetic_pa),
        directed=not args.undirected,
        alpha=args.alpha,
        x_size=args.x_size,
        theta=args.theta,
        mix=mix,
        seed=args.seed,
        eval_runs=args.eval_runs,
        workers=args.workers,
        out_dir=args.out,
        budgets=tuple(getattr(args, "budgets", (10.0,))),
        split=getattr(args, "split_parsed", (1.0, 4.0)),
        algorithms=tuple(getattr(args, "algorithms", ("rf",))),
        reps=getattr(args, "reps", 1),
        stage1_samples=getattr(args, "stage1_samples", 200),
        stable_timings=getattr(args, "stable_timings", False),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neighborseed",
                                     description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_fp = sub.add_parser("fp-check", help="degree statistics of X vs N(X)")
    _add_common(p_fp)
    p_fp.add_argument("--trials", type=int, default=100)

    p_est = sub.add_parser("estimate", help="RR vs Monte Carlo vs exact influence")
    _add_common(p_est)
    p_est.add_argument("--input", required=True,
                       help="JSON file with a 'seeds' list or an 'alloc' map (labels)")

    p_run = sub.add_parser("run", help="run the algorithm roster")
    _add_common(p_run)
    p_run.add_argument("--budgets", type=lambda s: [float(x) for x in s.split(",")],
                       default=[10.0], help="comma-separated budgets")
    p_run.add_argument("--split", default="1:4", help="B1:B2 ratio (default 1:4)")
    p_run.add_argument("--algorithms", type=lambda s: s.split(","),
                       default=["rf"], help=f"comma-separated from {','.join(ALGORITHMS)}")
    p_run.add_argument("--reps", type=int, default=1)
    p_run.add_argument("--stage1-samples", type=int, default=200, dest="stage1_samples")
    p_run.add_argument("--stable-timings", action="store_true", dest="stable_timings",
                       help="write wall_ms as 0 so reports are byte-reproducible")

    p_split = sub.add_parser("split-heuristic", help="degree-proportional budget split")
    _add_common(p_split)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "split", None) and isinstance(args.split, str):
        try:
            s1, s2 = (float(t) for t in args.split.split(":"))
            args.split_parsed = (s1, s2)
        except ValueError:
            print(f"bad --split value {args.split!r}", file=sys.stderr)
            return 2
    try:
        return _dispatch(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 3


def _dispatch(args) -> int:
    config = _config_from(args)
    if args.command == "fp-check":
        report = cmd_fp_check(config, args.trials)
        print(report["csv"], end="")
        print(f"# paradox holds in {report['paradox_fraction']:.0%} of {report['trials']} trials")
        return 0
    if args.command == "estimate":
        out = cmd_estimate(config, args.input)
        cols = ["rr", "mc", "exact"]
        print(f"backend={core.backend_name()} theta={out['theta']} mode={out['mode']}")
        header = "  ".join(f"{c:>12}" for c in cols)
        values = "  ".join(f"{out[c]:12.4f}" if c in out else f"{'n/a':>12}" for c in cols)
        print(header)
        print(values)
        return 0
    if args.command == "run":
        report = run_experiment(config)
        for key in sorted(report["cells"]):
            cell = report["cells"][key]
            print(f"{cell['algorithm']:>8}  B={cell['B']:<6g} spread={cell['mean_spread']:10.2f}"
                  f" +- {cell['stderr']:.2f}  ({cell['reps']} reps)")
        if config.out_dir:
            print(f"reports written to {config.out_dir}")
        return 0
    if args.command == "split-heuristic":
        g = load_dataset(config)
        x = sorted(sample_accessible(g, min(config.x_size, g.node_count),
                                     spawn(config.seed, "x")))
        s1, s2 = budget_split_heuristic(g, x)
        print(f"b1_share={s1:.4f} b2_share={s2:.4f}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
