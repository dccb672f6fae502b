"""Exporters for the pipeline's dynamics and pair-logprob JSONL formats.

Rows come out in a deterministic (step, subject, kind) order. Scoring is a
pure numpy forward pass, so re-scoring a frozen checkpoint is bit-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .data import load_pref_rows
from .model import ToyPrefLM
from .train import CheckpointRef

log = logging.getLogger(__name__)

TRACE_KINDS = ("r_xn_yn", "r_xn_yf", "r_xv_yf")

SUBJECT_KEYS = ("norm_id", "sec_id", "x_n", "y_n", "y_f", "x_v")


@dataclass(frozen=True)
class Subject:
    norm_id: str
    sec_id: str
    x_n: str
    y_n: str
    y_f: str
    x_v: str


def load_subjects(path: str | Path) -> tuple[list[Subject], list[str]]:
    """Subjects JSONL; rows missing any text/key are skipped and listed."""
    subjects = []
    skipped = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            missing = [k for k in SUBJECT_KEYS if not isinstance(raw.get(k), str)]
            if missing:
                skipped.append(f"line {lineno}: missing {missing}")
                continue
            subjects.append(Subject(**{k: raw[k] for k in SUBJECT_KEYS}))
    if skipped:
        log.warning("load_subjects(%s): skipped %d rows", path, len(skipped))
    return subjects, skipped


def export_traces(
    checkpoints: list[CheckpointRef],
    subjects: list[Subject],
    out_path: str | Path,
) -> int:
    """One row per (checkpoint step, subject, kind): mean per-token log-prob.

    r_xn_yn / r_xn_yf attach to the norm subject; r_xv_yf attaches to the sec
    subject and is emitted once per distinct sec_id so the step grid stays
    duplicate-free when several norm rows share a SecTriple.
    """
    rows: list[dict] = []
    for ref in sorted(checkpoints, key=lambda c: c.step):
        model, step = ToyPrefLM.load_checkpoint(ref.path)
        if step != ref.step:
            raise ValueError(f"{ref.path}: checkpoint step {step} != expected {ref.step}")
        seen_sec: set[str] = set()
        for subject in sorted(subjects, key=lambda s: (s.norm_id, s.sec_id)):
            rows.append(
                {
                    "subject_id": subject.norm_id,
                    "kind": "r_xn_yn",
                    "step": step,
                    "value": model.mean_logprob(subject.x_n, subject.y_n),
                }
            )
            rows.append(
                {
                    "subject_id": subject.norm_id,
                    "kind": "r_xn_yf",
                    "step": step,
                    "value": model.mean_logprob(subject.x_n, subject.y_f),
                }
            )
            if subject.sec_id not in seen_sec:
                seen_sec.add(subject.sec_id)
                rows.append(
                    {
                        "subject_id": subject.sec_id,
                        "kind": "r_xv_yf",
                        "step": step,
                        "value": model.mean_logprob(subject.x_v, subject.y_f),
                    }
                )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")
    return len(rows)


def export_pairlogprobs(checkpoint: CheckpointRef, dataset_path: str | Path, out_path: str | Path) -> int:
    """One PairLogProb row per dataset row under the given checkpoint."""
    model, _ = ToyPrefLM.load_checkpoint(checkpoint.path)
    rows = load_pref_rows(dataset_path)
    if not rows:
        log.warning("export_pairlogprobs: empty dataset %s", dataset_path)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(out_path, "w", encoding="utf-8") as f:
        for row in rows:
            logp_w, len_w = model.logprob(row.prompt, row.chosen)
            logp_l, len_l = model.logprob(row.prompt, row.rejected)
            f.write(
                json.dumps(
                    {
                        "row_id": row.row_id,
                        "logp_w": logp_w,
                        "len_w": len_w,
                        "logp_l": logp_l,
                        "len_l": len_l,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            count += 1
    return count
