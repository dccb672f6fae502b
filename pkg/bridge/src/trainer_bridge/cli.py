"""Command line entry point: ``bridge warmup|traces|pairlogprobs --config train.toml``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_bridge_config
from .data import SchemaError
from .export import export_pairlogprobs, export_traces, load_subjects
from .train import CheckpointRef, sorted_checkpoints, warmup_train

log = logging.getLogger("trainer_bridge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridge", description="warm-up trainer and dynamics exporter")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("warmup", "traces", "pairlogprobs"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="bridge config TOML")
        if name == "traces":
            p.add_argument("--subject-sample", type=int, default=None,
                           help="score only the first N subjects (default: all)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_bridge_config(args.config)
    except (OSError, ValueError) as exc:
        log.error("bad config: %s", exc)
        return 2
    out_dir = cfg.resolve(cfg.paths.out_dir)
    try:
        if args.command == "warmup":
            refs = warmup_train(cfg.resolve(cfg.paths.dataset), cfg.train, out_dir)
            print(json.dumps({"checkpoints": [str(r.path) for r in refs]}))
        elif args.command == "traces":
            refs = sorted_checkpoints(out_dir)
            if not refs:
                log.error("no checkpoints under %s; run `bridge warmup` first", out_dir)
                return 2
            subjects, skipped = load_subjects(cfg.resolve(cfg.paths.subjects))
            if args.subject_sample is not None:
                subjects = sorted(subjects, key=lambda s: (s.norm_id, s.sec_id))[: args.subject_sample]
            n = export_traces(refs, subjects, cfg.resolve(cfg.paths.dynamics_out))
            print(json.dumps({"rows": n, "skipped_subjects": len(skipped)}))
        else:
            refs = sorted_checkpoints(out_dir)
            if cfg.paths.checkpoint:
                path = cfg.resolve(cfg.paths.checkpoint)
                step = int(path.stem.split("-")[1])
                ref = CheckpointRef(step=step, path=path)
            elif refs:
                ref = refs[-1]
            else:
                log.error("no checkpoint available; run `bridge warmup` first")
                return 2
            n = export_pairlogprobs(ref, cfg.resolve(cfg.paths.dataset), cfg.resolve(cfg.paths.pairlogprobs_out))
            print(json.dumps({"rows": n, "checkpoint_step": ref.step}))
    except SchemaError as exc:
        log.error("%s", exc)
        return 2
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
