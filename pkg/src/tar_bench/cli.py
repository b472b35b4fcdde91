"""Command-line interface: run, validate, report, synth."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .experiment import ConfigError, execute, expand_matrix, load_config, report
from .synthetic import write_dataset_files


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tar-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiment matrix")
    _add_config_arg(p_run)
    p_run.add_argument("--parallelism", type=int, default=1, help="worker pool size")
    p_run.add_argument(
        "--topics", default=None, help="comma-separated topic filter overriding the config"
    )

    p_validate = sub.add_parser("validate", help="check a config without running")
    _add_config_arg(p_validate)

    p_report = sub.add_parser("report", help="regenerate summary tables from traces")
    p_report.add_argument("--out", required=True, help="experiment output directory")

    p_synth = sub.add_parser("synth", help="generate a synthetic two-cluster demo dataset")
    p_synth.add_argument("--out", required=True, help="directory for corpus.jsonl and qrels.txt")
    p_synth.add_argument("--docs", type=int, default=2000)
    p_synth.add_argument("--relevant", type=int, default=100)
    p_synth.add_argument("--noise", type=float, default=0.1)
    p_synth.add_argument("--seed", type=int, default=7)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = load_config(args.config)
            runs = expand_matrix(config)
            print(f"config ok: {len(runs)} runs over {len({r.topic_id for r in runs})} topics")
            return 0
        if args.command == "run":
            config = load_config(args.config)
            if args.topics:
                topics = tuple(t for t in args.topics.split(",") if t)
                config = dataclasses.replace(config, topics=topics)
            if args.parallelism < 1:
                print("error: --parallelism must be >= 1", file=sys.stderr)
                return 2
            outcome = execute(config, parallelism=args.parallelism)
            print(
                f"{len(outcome.records)} runs ok, {len(outcome.failures)} failed;"
                f" outputs in {config.output_dir}"
            )
            return 0 if outcome.ok else 1
        if args.command == "report":
            report(args.out)
            print(f"regenerated summary tables in {args.out}")
            return 0
        if args.command == "synth":
            corpus_path, qrels_path = write_dataset_files(
                args.out,
                n_docs=args.docs,
                n_relevant=args.relevant,
                noise=args.noise,
                seed=args.seed,
            )
            print(f"wrote {corpus_path} and {qrels_path}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
