"""Warm-up preference optimization over the secure-practice rows.

Produces checkpoints on the grid {checkpoint_every, 2*checkpoint_every, ...,
steps} plus a JSONL training log; batches cycle the dataset deterministically
so two runs from the same config are identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .data import PrefRow, SchemaError, load_pref_rows
from .model import ToyPrefLM
from .objectives import PairInput, evaluate

log = logging.getLogger(__name__)

TRAIN_LOG = "training-log.jsonl"


@dataclass(frozen=True)
class CheckpointRef:
    step: int
    path: Path


def _pair_input(model: ToyPrefLM, row: PrefRow, need_ref: bool) -> tuple[PairInput, list, list, list]:
    x = model.tokenizer.encode(row.prompt)
    y_w = model.tokenizer.encode(row.chosen)
    y_l = model.tokenizer.encode(row.rejected)
    logp_w, _ = model.sequence_logprob(x, y_w)
    logp_l, _ = model.sequence_logprob(x, y_l)
    ref_w = ref_l = 0.0
    if need_ref:
        ref_w, _ = model.sequence_logprob(x, y_w, base_only=True)
        ref_l, _ = model.sequence_logprob(x, y_l, base_only=True)
    return (
        PairInput(logp_w=logp_w, len_w=len(y_w), logp_l=logp_l, len_l=len(y_l),
                  ref_logp_w=ref_w, ref_logp_l=ref_l),
        x,
        y_w,
        y_l,
    )


def batch_loss_and_step(model: ToyPrefLM, rows: list[PrefRow], cfg: TrainConfig) -> float:
    """One SGD step on a batch; returns the mean batch loss."""
    need_ref = cfg.objective in ("dpo", "ipo")
    g_w = np.zeros((model.vocab_size, model.vocab_size))
    g_c = np.zeros((model.vocab_size, model.vocab_size))
    total = 0.0
    for row in rows:
        pair, x, y_w, y_l = _pair_input(model, row, need_ref)
        loss, d_w, d_l = evaluate(cfg.objective, pair, cfg.beta, cfg.gamma)
        total += loss
        _, grad_w = model.sequence_logprob(x, y_w, want_grad=True)
        _, grad_l = model.sequence_logprob(x, y_l, want_grad=True)
        assert grad_w is not None and grad_l is not None
        g_w += d_w * grad_w.g_w + d_l * grad_l.g_w
        g_c += d_w * grad_w.g_c + d_l * grad_l.g_c
    n = len(rows)
    model.apply_table_grads(g_w / n, g_c / n, cfg.lr)
    return total / n


def eval_loss(model: ToyPrefLM, rows: list[PrefRow], cfg: TrainConfig) -> float:
    """Mean objective loss over *rows* without updating parameters."""
    need_ref = cfg.objective in ("dpo", "ipo")
    total = 0.0
    for row in rows:
        pair, *_ = _pair_input(model, row, need_ref)
        loss, _, _ = evaluate(cfg.objective, pair, cfg.beta, cfg.gamma)
        total += loss
    return total / len(rows)


def warmup_train(dataset_path: str | Path, cfg: TrainConfig, out_dir: str | Path) -> list[CheckpointRef]:
    all_rows = load_pref_rows(dataset_path)
    rows = [r for r in all_rows if r.source == "sec"]
    if len(rows) != len(all_rows):
        log.warning("warm-up trains on D_sec only: ignoring %d non-sec rows", len(all_rows) - len(rows))
    if not rows:
        raise SchemaError(f"{dataset_path}: no source=sec rows to warm up on")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = ToyPrefLM(
        model_ref=cfg.model_ref, vocab_size=cfg.vocab_size, rank=cfg.adapter_rank, alpha=cfg.adapter_alpha
    )
    checkpoints: list[CheckpointRef] = []
    log_lines: list[dict] = []
    batch = min(cfg.batch_size, len(rows))
    for step in range(1, cfg.steps + 1):
        offset = (step - 1) * batch
        batch_rows = [rows[(offset + k) % len(rows)] for k in range(batch)]
        loss = batch_loss_and_step(model, batch_rows, cfg)
        log_lines.append({"step": step, "loss": loss})
        if step % cfg.checkpoint_every == 0:
            path = out_dir / f"ckpt-{step:06d}.npz"
            model.save_checkpoint(path, step)
            checkpoints.append(CheckpointRef(step=step, path=path))
    final_eval = eval_loss(model, rows, cfg)
    log_lines.append({"step": cfg.steps, "eval_loss": final_eval, "n_rows": len(rows)})
    with open(out_dir / TRAIN_LOG, "w", encoding="utf-8") as f:
        for line in log_lines:
            f.write(json.dumps(line, sort_keys=True) + "\n")
    assert [c.step for c in checkpoints] == list(cfg.checkpoint_grid)
    return checkpoints


def sorted_checkpoints(out_dir: str | Path) -> list[CheckpointRef]:
    refs = []
    for path in sorted(Path(out_dir).glob("ckpt-*.npz")):
        step = int(path.stem.split("-")[1])
        refs.append(CheckpointRef(step=step, path=path))
    return refs
