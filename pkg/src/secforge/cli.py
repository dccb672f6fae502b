"""Command line entry point: ``forge <stage> --config run.toml``.

Exit codes: 0 ok, 2 validation/configuration error, 3 stale upstream stage,
4 model-client failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_run_config
from .errors import ClientError, ForgeError, StaleInputError, ValidationError
from .pipeline import STAGES, run_stage

log = logging.getLogger("secforge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forge", description="CWE-targeted preference dataset pipeline")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.add_argument("--config", required=True, help="run config TOML")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--force", action="store_true", help="rerun even if complete / upstream incomplete")
        p.add_argument("--max-inflight", type=int, default=None, help="bounded parallelism for client calls")
        p.add_argument("--runs-root", default="runs", help="directory holding run directories")
        if stage == "eval":
            p.add_argument("--suite", default=None, help="instruction suite JSONL (overrides config)")
            p.add_argument("--n", type=int, default=None, help="samples per instruction (overrides config)")
            p.add_argument("--model", default=None, help="model name for the live client (overrides config)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.max_inflight is not None:
            cfg.max_inflight = args.max_inflight
        if args.stage == "eval":
            if args.suite is not None:
                cfg.eval.suite = args.suite
            if args.n is not None:
                cfg.eval.n_per_instr = args.n
            if args.model is not None:
                cfg.client.model = args.model
        outcome = run_stage(args.stage, cfg, runs_root=args.runs_root, force=args.force)
    except StaleInputError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except (ValidationError, ClientError) as exc:
        log.error("%s", exc)
        return exc.exit_code
    except ForgeError as exc:
        log.error("%s", exc)
        return exc.exit_code
    print(json.dumps({"stage": outcome.stage, "status": outcome.status, "counts": outcome.counts}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
