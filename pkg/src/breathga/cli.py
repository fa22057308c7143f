"""Command-line entry point.

Exit codes: 0 success, 1 usage/validation, 2 missing artifact from an
earlier command, 3 runtime or numeric failure.
"""

import argparse
import logging
import sys

from threadpoolctl import threadpool_limits

from . import pipeline
from .config import ConfigError, build_config, load_file
from .pipeline import MissingArtifactError

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_RUNTIME = 0, 1, 2, 3

COMMANDS = ("gen-data", "pretrain", "evolve", "train-final", "evaluate", "report")

log = logging.getLogger("breathga")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with configuration keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="runs", help="artifact directory (default: runs)")
    common.add_argument("--profile", choices=["paper", "desk"])
    common.add_argument("--threads", type=int,
                        help="BLAS threads; 1 (the default) is bitwise reproducible")
    common.add_argument("--ma-window", type=int, dest="ma_window")
    common.add_argument("--detrend-degree", type=int, dest="detrend_degree")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = _Parser(prog="breathga", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", parents=[common], help="synthesize the labeled dataset")
    p.add_argument("--records-per-class", type=int, dest="records_per_class")
    p.add_argument("--csv", action="store_true", help="also write a plain-text export")

    sub.add_parser("pretrain", parents=[common], help="train the base 1D-CNN")

    p = sub.add_parser("evolve", parents=[common], help="GA search over head architectures")
    p.add_argument("--generations", type=int)
    p.add_argument("--parent-strategy", choices=["topk", "roulette"], dest="parent_strategy")
    p.add_argument("--crossover-prob", type=float, dest="crossover_prob")
    p.add_argument("--mutation-prob", type=float, dest="mutation_prob")

    p = sub.add_parser("train-final", parents=[common],
                       help="train the chosen head with and/or without transfer")
    p.add_argument("--chromosome", help="g1,g2,g3,g4 (default: best from evolve)")
    p.add_argument("--mode", choices=["transfer", "scratch", "both"])

    p = sub.add_parser("evaluate", parents=[common], help="accuracy and confusion matrix")
    p.add_argument("--model", dest="model_path", help="model file (default: newest final model)")

    sub.add_parser("report", parents=[common], help="derived tables from earlier runs")
    return parser


_NOT_CONFIG = {"command", "config", "out", "quiet", "csv", "model_path"}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"breathga: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE

    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        file_values = load_file(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        cfg = build_config(file_values, flags)
    except (ConfigError, OSError) as exc:
        print(f"breathga: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        with threadpool_limits(limits=cfg.threads):
            dispatch(args, cfg)
    except MissingArtifactError as exc:
        print(f"breathga: missing dependency: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"breathga: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def dispatch(args, cfg):
    out = args.out
    if args.command == "gen-data":
        pipeline.gen_data(cfg, out, csv_export=args.csv)
    elif args.command == "pretrain":
        pipeline.pretrain(cfg, out)
    elif args.command == "evolve":
        pipeline.evolve(cfg, out)
    elif args.command == "train-final":
        pipeline.train_final(cfg, out)
    elif args.command == "evaluate":
        pipeline.evaluate_cmd(cfg, out, args.model_path)
    elif args.command == "report":
        pipeline.report(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
