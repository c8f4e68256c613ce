"""``clab`` command line: ``clab <subcommand> --config <file> [--seed N] [--replications N] [--out dir]``.

Exit status is 0 on success, 2 for a bad config and 3 when more than 10%
of the replications failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .errors import ConfigError, ReplicationFailure
from .experiments import KINDS, ExperimentConfig, run

EXIT_OK, EXIT_CONFIG, EXIT_FAILURES = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="clab", description="Random causal map experiments.")
    sub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("--config", required=True, help="JSON experiment description")
        s.add_argument("--seed", type=int, help="override master_seed")
        s.add_argument("--replications", type=int, help="override the replication count")
        s.add_argument("--out", help="output directory (overrides out_dir)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config, kind=args.kind)
        if args.seed is not None:
            cfg.master_seed = args.seed
        if args.replications is not None:
            cfg.replications = args.replications
        if args.out is not None:
            cfg.out_dir = args.out
        cfg.validate()
        record = run(cfg)
    except ConfigError as exc:
        print(f"clab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplicationFailure as exc:
        record = getattr(exc, "record", None)
        if record is not None:
            record.write(cfg.out_dir)
        print(f"clab: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    csv_path, json_path = record.write(cfg.out_dir)
    print(json.dumps({"kind": cfg.kind, "rows": len(record.rows), "censored": record.censored,
                      "failed": record.failed, "csv": str(csv_path), "summary": str(json_path)}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
