"""Command-line entry point: ``pimax run|eval|compose|analyze``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import PimaxError
from .harness import (
    ExperimentConfig,
    analyze,
    load_run,
    parse_key_values,
    run_composition_experiment,
    run_experiment,
    run_fixed_policy,
)
from .learner import load_learner

log = logging.getLogger("pimax")


def _config_from_args(args) -> ExperimentConfig:
    items = {}
    if args.config:
        items.update(parse_key_values(Path(args.config).read_text(), args.config))
    overrides = {
        "robots": args.robots,
        "controllers_per_robot": {"split": 2, "combined": 1}.get(args.control),
        "bins": args.bins,
        "steps": args.steps,
        "seed": args.seed,
        "rate_schedule": args.rate_schedule,
        "init_policy": args.init_policy,
        "pi_stride": args.pi_stride,
        "sliding_window": args.window,
    }
    items.update({k: str(v) for k, v in overrides.items() if v is not None})
    items["output_dir"] = args.out
    return ExperimentConfig.from_mapping(items)


def _print_summary(summary: dict) -> None:
    for key, value in summary.items():
        print(f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}")


def cmd_run(args) -> None:
    cfg = _config_from_args(args)
    log.info("running %s (%d steps, %.1f simulated hours, seed %d) -> %s",
             cfg.label, cfg.steps, cfg.simulated_hours, cfg.seed, cfg.output_dir)
    result = run_experiment(cfg)
    _print_summary(analyze(result.log, cfg.analysis_bins, cfg.analysis_window, cfg.sliding_window))


def cmd_eval(args) -> None:
    cfg, _, learners = load_run(args.learner)
    cfg = replace(cfg, steps=args.steps, output_dir=Path(args.out),
                  seed=cfg.seed if args.seed is None else args.seed)
    result = run_fixed_policy(cfg, learners)
    _print_summary(analyze(result.log, cfg.analysis_bins, cfg.analysis_window, cfg.sliding_window))


def cmd_compose(args) -> None:
    left = load_learner(args.left)
    right = load_learner(args.right)
    report = run_composition_experiment(left, right, args.steps, seed=args.seed, output_dir=args.out)
    _print_summary(report.summary())


def cmd_analyze(args) -> None:
    cfg, run_log, _ = load_run(args.log)
    bins = args.analysis_bins if args.analysis_bins is not None else cfg.analysis_bins
    window = args.window if args.window is not None else cfg.analysis_window
    sliding = args.sliding_window if args.sliding_window is not None else cfg.sliding_window
    _print_summary(analyze(run_log, bins, window, sliding))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pimax", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="learn on a robot chain and write all artifacts")
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--robots", type=int)
    p.add_argument("--control", choices=("split", "combined"))
    p.add_argument("--bins", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--rate-schedule", help="reciprocal | floor:F | warmup:K")
    p.add_argument("--init-policy", help="learner or run directory to start from")
    p.add_argument("--pi-stride", type=int, help="ticks between intrinsic-PI samples (1 = every tick)")
    p.add_argument("--window", type=int, help="sliding coverage-entropy window in ticks")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="run frozen learners from a previous run")
    p.add_argument("--learner", required=True, help="run directory of the trained learners")
    p.add_argument("--steps", type=int, default=36_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compose", help="combine two split learners and continue learning on 1-1")
    p.add_argument("--left", required=True, help="learner directory of the left-wheel controller")
    p.add_argument("--right", required=True, help="learner directory of the right-wheel controller")
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("analyze", help="summary metrics of a recorded run")
    p.add_argument("--log", required=True, help="run directory")
    p.add_argument("--analysis-bins", type=int)
    p.add_argument("--window", type=int, help="a-posteriori PI window (transitions)")
    p.add_argument("--sliding-window", type=int)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (PimaxError, OSError) as exc:
        print(f"pimax: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
