"""Quality control: heuristic filtering of the secure-practice set and
training-dynamics influence selection of the utility-preservation set.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .canonical import read_jsonl, write_json, write_jsonl
from .errors import ScoringError, ValidationError
from .oracle.syntax import SyntaxResult, syntax_check
from .prefs import NormTriple, SecTriple
from .stats import kendall_tau
from .textsim import fuzzy_ratio

log = logging.getLogger(__name__)

TRACE_KINDS = ("r_xn_yn", "r_xn_yf", "r_xv_yf")
MEASURES = ("default", "margin_f", "decrease_g")

DEFAULT_SKIP_KEYWORDS = ("remain unchanged", "rest of the code", "same as before")


@dataclass(frozen=True)
class FilterThresholds:
    min_lines: int = 5
    dedup_ratio: int = 90
    skip_keywords: tuple[str, ...] = DEFAULT_SKIP_KEYWORDS

    def __post_init__(self):
        if not 0 <= self.dedup_ratio <= 100:
            raise ValidationError("dedup_ratio must be in 0..100")
        if self.min_lines < 0:
            raise ValidationError("min_lines must be >= 0")

    @classmethod
    def from_dict(cls, d: Mapping) -> "FilterThresholds":
        return cls(
            min_lines=int(d.get("min_lines", 5)),
            dedup_ratio=int(d.get("dedup_ratio", 90)),
            skip_keywords=tuple(d.get("skip_keywords", DEFAULT_SKIP_KEYWORDS)),
        )


@dataclass
class FilterResult:
    kept: list[SecTriple]
    drop_counts: dict[str, int]
    dropped: list[tuple[str, str]]  # (triple id, reason)

    def to_manifest(self) -> dict:
        return {"kept": len(self.kept), "drop_counts": self.drop_counts}


def heuristic_filter_sec(
    candidates: Sequence[SecTriple],
    texts: Mapping[str, str],
    thresholds: FilterThresholds,
    syntax_checker: Callable[[str, str], SyntaxResult] = syntax_check,
) -> FilterResult:
    """Drop broken, stubbed, trivially short, and near-duplicate triples.

    Checks run in order (syntax on y_f and y_v, skip keywords on y_f, minimal
    y_f length, then greedy fuzzy dedup on y_f in id order) and each drop is
    attributed to the first check that fired. Idempotent by construction:
    survivors of one pass all survive a second.
    """
    keywords = tuple(k.lower() for k in thresholds.skip_keywords)
    kept: list[SecTriple] = []
    kept_texts: list[str] = []
    drop_counts = {"syntax": 0, "keyword": 0, "min_lines": 0, "dedup": 0}
    dropped: list[tuple[str, str]] = []
    for triple in sorted(candidates, key=lambda t: t.id):
        y_f = texts[triple.y_f]
        y_v = texts[triple.y_v]
        language = triple.pair.language
        if not syntax_checker(y_f, language).ok or not syntax_checker(y_v, language).ok:
            drop_counts["syntax"] += 1
            dropped.append((triple.id, "syntax"))
            continue
        lowered = y_f.lower()
        if any(k in lowered for k in keywords):
            drop_counts["keyword"] += 1
            dropped.append((triple.id, "keyword"))
            continue
        if len(y_f.splitlines()) < thresholds.min_lines:
            drop_counts["min_lines"] += 1
            dropped.append((triple.id, "min_lines"))
            continue
        if any(fuzzy_ratio(y_f, seen) >= thresholds.dedup_ratio for seen in kept_texts):
            drop_counts["dedup"] += 1
            dropped.append((triple.id, "dedup"))
            continue
        kept.append(triple)
        kept_texts.append(y_f)
    return FilterResult(kept=kept, drop_counts=drop_counts, dropped=dropped)


@dataclass(frozen=True)
class DynamicsTrace:
    """Per-checkpoint series of length-normalized sequence log-probs."""

    subject_id: str
    kind: str
    steps: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in TRACE_KINDS:
            raise ValidationError(f"unknown trace kind {self.kind!r}")
        if len(self.steps) != len(self.values):
            raise ValidationError("trace steps/values length mismatch")
        if any(b <= a for a, b in zip(self.steps, self.steps[1:])):
            raise ValidationError(f"trace ({self.subject_id}, {self.kind}): steps must strictly increase")
        if any(not math.isfinite(v) for v in self.values):
            raise ValidationError(f"trace ({self.subject_id}, {self.kind}): non-finite value")


class TraceStore:
    """Traces keyed by (subject_id, kind), all sharing one step grid."""

    def __init__(self, traces: dict[tuple[str, str], DynamicsTrace], warnings: list[str] | None = None):
        grids = {t.steps for t in traces.values()}
        if len(grids) > 1:
            raise ValidationError(f"traces use {len(grids)} different step grids, expected one")
        self.traces = traces
        self.grid: tuple[int, ...] = next(iter(grids)) if grids else ()
        self.warnings = list(warnings or [])

    def get(self, subject_id: str, kind: str) -> DynamicsTrace | None:
        return self.traces.get((subject_id, kind))


def load_traces(path: str | Path) -> TraceStore:
    """Group one-point-per-row dynamics JSONL into validated traces."""
    points: dict[tuple[str, str], dict[int, float]] = {}
    warnings: list[str] = []
    known_keys = {"subject_id", "kind", "step", "value"}
    for row in read_jsonl(path):
        extra = set(row) - known_keys
        if extra:
            warnings.append(f"unknown keys {sorted(extra)} in trace row for {row.get('subject_id')!r}")
        try:
            subject = str(row["subject_id"])
            kind = str(row["kind"])
            step = int(row["step"])
            value = float(row["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed trace row {row!r}: {exc}") from exc
        bucket = points.setdefault((subject, kind), {})
        if step in bucket:
            raise ValidationError(f"{path}: duplicate step {step} for ({subject[:12]}, {kind})")
        if value > 0.0:
            warnings.append(f"positive log-prob {value} for ({subject[:12]}, {kind}, step {step})")
        bucket[step] = value
    traces = {}
    for (subject, kind), series in points.items():
        steps = tuple(sorted(series))
        traces[(subject, kind)] = DynamicsTrace(
            subject_id=subject, kind=kind, steps=steps, values=tuple(series[s] for s in steps)
        )
    if not traces:
        warnings.append(f"{path}: no trace rows")
    return TraceStore(traces, warnings)


@dataclass(frozen=True)
class InfluenceScore:
    norm_id: str
    sec_id: str
    score: float
    measure: str = "default"
    no_signal: bool = False

    def to_dict(self) -> dict:
        return {
            "norm_id": self.norm_id,
            "sec_id": self.sec_id,
            "score": self.score,
            "measure": self.measure,
            "no_signal": self.no_signal,
        }


def _require_trace(traces: TraceStore, subject_id: str, kind: str) -> DynamicsTrace:
    trace = traces.get(subject_id, kind)
    if trace is None:
        raise ScoringError(f"missing trace kind {kind!r} for subject {subject_id[:16]}")
    return trace


def influence(norm: NormTriple, traces: TraceStore, measure: str = "default") -> InfluenceScore:
    """Rank correlation between the utility series f and the alignment series g.

    default:    f_t = r(x_n, y_n, t);                 g_t = -r(x_v, y_f, t)
    margin_f:   f_t = r(x_n, y_n, t) - r(x_n, y_f, t); same g
    decrease_g: same f as margin_f;                   g = T, T-1, ..., 1
    """
    if measure not in MEASURES:
        raise ScoringError(f"unknown influence measure {measure!r}")
    f_base = _require_trace(traces, norm.id, "r_xn_yn")
    if measure in ("margin_f", "decrease_g"):
        f_alt = _require_trace(traces, norm.id, "r_xn_yf")
        m_f = [a - b for a, b in zip(f_base.values, f_alt.values)]
    else:
        m_f = list(f_base.values)
    if measure == "decrease_g":
        m_g = [float(t) for t in range(len(m_f), 0, -1)]
    else:
        g_trace = _require_trace(traces, norm.sec_link, "r_xv_yf")
        m_g = [-v for v in g_trace.values]
    tau = kendall_tau(m_f, m_g)
    if math.isnan(tau):
        return InfluenceScore(norm_id=norm.id, sec_id=norm.sec_link, score=0.0, measure=measure, no_signal=True)
    return InfluenceScore(norm_id=norm.id, sec_id=norm.sec_link, score=tau, measure=measure)


def select_norm(
    candidates: Sequence[NormTriple],
    scores: Mapping[str, InfluenceScore],
    top_k: int,
    discard_quantile: float,
) -> list[NormTriple]:
    """Keep the top_k best-scoring companions per SecTriple, then drop the
    globally weakest floor(q * kept) of what remains. Ties break toward the
    smaller id; output is in id order."""
    if top_k < 0:
        raise ValidationError("select_norm: top_k must be >= 0")
    if not 0.0 <= discard_quantile < 1.0:
        raise ValidationError("select_norm: discard_quantile must be in [0, 1)")
    missing = [c.id for c in candidates if c.id not in scores]
    if missing:
        raise ScoringError(f"select_norm: unscored candidates: {', '.join(m[:12] for m in missing)}")

    by_sec: dict[str, list[NormTriple]] = {}
    for c in candidates:
        by_sec.setdefault(c.sec_link, []).append(c)

    kept: list[NormTriple] = []
    for sec_id in sorted(by_sec):
        group = sorted(by_sec[sec_id], key=lambda c: (-scores[c.id].score, c.id))
        kept.extend(group[:top_k])

    drop = int(len(kept) * discard_quantile)
    if drop:
        kept.sort(key=lambda c: (scores[c.id].score, c.id))
        kept = kept[drop:]
    return sorted(kept, key=lambda c: c.id)


def orphaned_sec_ids(sec_ids: set[str], selected: Sequence[NormTriple]) -> set[str]:
    """SecTriples left with no surviving utility companion after selection."""
    covered = {n.sec_link for n in selected}
    return sec_ids - covered


def _fisher_yates(items: list, rng: random.Random) -> None:
    for i in range(len(items) - 1, 0, -1):
        j = rng.randrange(i + 1)
        items[i], items[j] = items[j], items[i]


@dataclass
class FinalizeResult:
    rows: list[dict]
    manifest: dict


def finalize(
    dsec_star: Sequence[SecTriple],
    dnorm_star: Sequence[NormTriple],
    seed: int,
    instruction_texts: Mapping[str, str],
    sample_texts: Mapping[str, str],
    norm_ratio: float | None = None,
    out_path: str | Path | None = None,
    manifest_path: str | Path | None = None,
) -> FinalizeResult:
    """Emit the shuffled mixture of both starred sets as preference rows.

    Rows are {prompt, chosen, rejected, source, sec_id, norm_id}; the order is
    a seeded Fisher-Yates permutation. With norm_ratio set, the norm side is
    first subsampled (in id order) so norm/(norm+sec) approximates the target.
    """
    if not dsec_star:
        log.warning("finalize: empty secure-practice set")
    if not dnorm_star:
        log.warning("finalize: empty utility-preservation set")
    norm_rows = sorted(dnorm_star, key=lambda t: t.id)
    if norm_ratio is not None:
        if not 0.0 <= norm_ratio < 1.0:
            raise ValidationError("norm_ratio must be in [0, 1)")
        target = int(round(norm_ratio / (1.0 - norm_ratio) * len(dsec_star)))
        norm_rows = norm_rows[: min(target, len(norm_rows))]

    rows: list[dict] = []
    for t in sorted(dsec_star, key=lambda t: t.id):
        rows.append(
            {
                "prompt": instruction_texts[t.x_v],
                "chosen": sample_texts[t.y_f],
                "rejected": sample_texts[t.y_v],
                "source": "sec",
                "sec_id": t.id,
                "norm_id": None,
            }
        )
    for t in norm_rows:
        x_n_text = instruction_texts[t.x_n]
        rows.append(
            {
                "prompt": x_n_text,
                "chosen": sample_texts[t.y_n],
                "rejected": sample_texts[t.y_f],
                "source": "norm",
                "sec_id": t.sec_link,
                "norm_id": t.id,
            }
        )
    _fisher_yates(rows, random.Random(seed))

    n_sec = len(dsec_star)
    n_norm = len(norm_rows)
    total = n_sec + n_norm
    manifest = {
        "schema_version": 1,
        "seed": seed,
        "counts": {"sec": n_sec, "norm": n_norm, "total": total},
        "norm_ratio": (n_norm / total) if total else 0.0,
        "norm_ratio_target": norm_ratio,
    }
    if out_path is not None:
        write_jsonl(out_path, rows)
    if manifest_path is not None:
        write_json(manifest_path, manifest)
    return FinalizeResult(rows=rows, manifest=manifest)
