"""Command-line front end.

One subcommand per pipeline stage plus ``run`` for the whole chain.
Every command takes --config (JSON, see README for the schema) and
--out; --seed and --threads override the config. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DataError, NumericError, StageError
from .pipeline import load_config, run_pipeline, run_stage

_STAGE_OF = {"simulate": "data", "impute": "impute", "fit": "fit",
             "support": "support", "report": "report"}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalbart",
                                description="imputation + tree-ensemble causal analysis pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    def _common(sp, threads=False):
        sp.add_argument("--config", required=True, help="path to a JSON run config")
        sp.add_argument("--out", help="run directory (overrides config 'out')")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        if threads:
            sp.add_argument("--threads", type=int,
                            help="worker threads across imputations (overrides config)")

    _common(sub.add_parser("simulate", help="materialize the source table"))
    _common(sub.add_parser("impute", help="fill missing cells m times"))
    _common(sub.add_parser("fit", help="fit outcome models per imputation"), threads=True)
    sp = sub.add_parser("effects", help="estimate and pool treatment effects")
    sp.add_argument("estimand", nargs="?", choices=("ate", "adrf", "leap", "cate"),
                    help="restrict to one estimand (default: all configured)")
    _common(sp)
    _common(sub.add_parser("support", help="common-support screening"))
    _common(sub.add_parser("report", help="assemble summary.json and sidecars"))
    _common(sub.add_parser("run", help="full pipeline"), threads=True)
    return p


def _resolve(args) -> tuple:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be nonnegative")
        cfg["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise ConfigError("threads must be >= 1")
        cfg["threads"] = args.threads
    out = args.out or cfg["out"]
    if not out:
        raise ConfigError("no output directory (set config 'out' or pass --out)")
    return cfg, out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg, out = _resolve(args)
        if args.command == "run":
            run_pipeline(cfg, out, threads=cfg["threads"])
        elif args.command == "effects":
            run_stage("effects", cfg, out, only=args.estimand)
        elif args.command == "fit":
            run_stage("fit", cfg, out, threads=cfg["threads"])
        else:
            run_stage(_STAGE_OF[args.command], cfg, out)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        code = _exit_code(exc.cause)
        if code == 1:
            import traceback
            traceback.print_exception(exc.cause, file=sys.stderr)
        return code
    except (ConfigError, DataError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return 0


def _exit_code(exc) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, NumericError):
        return 4
    return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
