"""Command-line entry point.

Verbs mirror the pipeline stages; flags override config-file values.  Exit
codes: 0 success, 2 I/O failure, 3 missing or unreadable artifact, 4
configuration or validation error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from ..errors import ConfigError, MissingArtifact
from . import pipeline, report
from .config import ExperimentConfig, apply_overrides, load_config

EXIT_OK = 0
EXIT_IO = 2
EXIT_MISSING = 3
EXIT_INVALID = 4


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config JSON")
    common.add_argument("--seed", type=int, metavar="N", help="master seed override")
    common.add_argument("--out", metavar="DIR", help="output directory override")
    common.add_argument("--mode", choices=["2cell", "4cell"], help="action-space mode")
    common.add_argument("--runs", type=int, metavar="N",
                        help="episodes per scenario (training or evaluation)")
    common.add_argument("-v", "--verbose", action="store_true", help="info logging")

    parser = argparse.ArgumentParser(
        prog="cellswitch",
        description="Base-station sleep-scheduling experiments: simulate, "
                    "train estimators, build switching tables, evaluate, report.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate-scenarios", parents=[common],
                       help="write the daily-traffic scenario set")
    p.add_argument("--count", type=int, metavar="N", help="number of scenarios")

    sub.add_parser("collect-data", parents=[common],
                   help="run random-action episodes for estimator training")

    p = sub.add_parser("train", parents=[common],
                       help="train the power/qos/handover estimators")
    p.add_argument("--dump-datasets", action="store_true",
                   help="also write the assembled datasets as JSON Lines")

    sub.add_parser("build-table", parents=[common],
                   help="build offline cost-to-go tables for both modes")

    p = sub.add_parser("run", parents=[common], help="evaluate a policy")
    p.add_argument("--policy", required=True, choices=list(pipeline.POLICIES))
    p.add_argument("--stations", type=int, metavar="N",
                   help="independent stations per episode (powers are summed)")

    sub.add_parser("report", parents=[common],
                   help="aggregate evaluation results into CSV reports")
    return parser


def _config_for(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = dict(
        master_seed=args.seed,
        out_dir=args.out,
        mode=args.mode,
    )
    if args.verb == "collect-data":
        overrides["runs"] = args.runs
    elif args.verb == "run":
        overrides["eval_runs"] = args.runs
        overrides["stations"] = getattr(args, "stations", None)
    if args.verb == "generate-scenarios":
        overrides["scenario_count"] = getattr(args, "count", None)
    if args.verb == "train" and getattr(args, "dump_datasets", False):
        overrides["dump_datasets"] = True
    return apply_overrides(cfg, **overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config_for(args)
        if args.verb == "generate-scenarios":
            path = pipeline.generate_scenarios(cfg)
            print(path)
        elif args.verb == "collect-data":
            n = pipeline.collect_data(cfg)
            print(f"{n} traces in {cfg.traces_dir}")
        elif args.verb == "train":
            metrics = pipeline.train_models(cfg)
            print(f"models in {cfg.models_dir}; "
                  f"heldout power rel MAE {metrics['power_rel_mae']:.4f}, "
                  f"qos MAE {metrics['qos_mae_points']:.2f}")
        elif args.verb == "build-table":
            for path in pipeline.build_tables(cfg):
                print(path)
        elif args.verb == "run":
            out = pipeline.run_policy(cfg, args.policy)
            print(out)
        elif args.verb == "report":
            for path in report.write_report(cfg):
                print(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
