"""Vulnerability-inducing instruction synthesis.

Per (language, CWE) target: elicit trigger scenarios from a general model,
pick the relevant seed instructions, compose one new instruction per seed,
then keep the K most diverse ones by k-means cluster representatives.
"""

from __future__ import annotations

import json
import logging
from importlib import resources
from pathlib import Path

import numpy as np

from .canonical import text_hash
from .catalog import CwePair, Instruction, ScenarioRecord
from .clients import GenerationParams, TextGenClient
from .cluster import kmeans, representative_indices
from .embed import Embedder, cosine_matrix
from .errors import CompositionParseError, UndefinedInputError, ValidationError

log = logging.getLogger(__name__)

SCENARIO_TEMPLATE = "scenario.txt"
COMPOSE_TEMPLATE = "compose.txt"
FIX_TEMPLATE = "fix.txt"


def load_prompt(name: str, prompts_dir: str | Path | None = None) -> str:
    if prompts_dir is not None:
        return (Path(prompts_dir) / name).read_text(encoding="utf-8")
    return resources.files("secforge").joinpath("prompts", name).read_text(encoding="utf-8")


def render_scenario_prompt(pair: CwePair, template: str | None = None) -> str:
    template = template if template is not None else load_prompt(SCENARIO_TEMPLATE)
    return template.replace("[[CWE-ID]]", pair.cwe).replace("[[LANG]]", pair.language)


def render_compose_prompt(
    x_n: Instruction, scenario: ScenarioRecord, pair: CwePair, template: str | None = None
) -> str:
    template = template if template is not None else load_prompt(COMPOSE_TEMPLATE)
    return (
        template.replace("[[CWE-ID]]", pair.cwe)
        .replace("[[LANG]]", pair.language)
        .replace("[[Explanations and relevant scenarios of CWE-ID]]", scenario.scenario_text)
        .replace("[[Coding task]]", x_n.text)
    )


def query_cwe_scenarios(
    pair: CwePair,
    params: GenerationParams,
    client: TextGenClient,
    template: str | None = None,
) -> list[ScenarioRecord]:
    """One ScenarioRecord per sampled completion; empty completions dropped.

    sample_index keeps each completion's original position so the
    (pair, prompt-hash, index) key stays unique after drops.
    """
    prompt = render_scenario_prompt(pair, template)
    prompt_hash = text_hash(prompt)
    completions = client.complete(prompt, params)
    records = []
    for i, completion in enumerate(completions):
        if not completion.text.strip():
            continue
        records.append(
            ScenarioRecord(
                pair=pair,
                scenario_text=completion.text,
                source_prompt_hash=prompt_hash,
                sample_index=i,
            )
        )
    if not records:
        log.warning("no non-empty scenario completions for %s", pair)
    return records


def relevant_instructions(
    seeds: list[Instruction],
    pair: CwePair,
    cap: int | None = None,
    keywords: list[str] | None = None,
) -> list[Instruction]:
    """Seeds whose language tag matches the target (untagged rows always
    qualify), optionally restricted to a keyword allowlist, capped in id
    order so the result is stable under input reordering."""
    matched = [s for s in seeds if s.lang is None or s.lang == pair.language]
    if keywords:
        lowered = [k.lower() for k in keywords]
        matched = [s for s in matched if any(k in s.text.lower() for k in lowered)]
    matched.sort(key=lambda s: s.id)
    if not matched:
        log.info("no relevant seed instructions for %s", pair)
    if cap is not None:
        matched = matched[:cap]
    return matched


def _json_object_candidates(text: str) -> list[str]:
    """Balanced top-level {...} spans; string/escape aware inside spans only,
    so stray quotes in surrounding prose cannot derail the scan."""
    spans = []
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if depth == 0:
            if ch == "{":
                start = i
                depth = 1
                in_string = False
                escaped = False
            continue
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                spans.append(text[start : i + 1])
    return spans


def extract_task_json(text: str) -> str:
    """The last syntactically valid top-level JSON object carrying "task"."""
    task = None
    for candidate in _json_object_candidates(text):
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and isinstance(obj.get("task"), str) and obj["task"].strip():
            task = obj["task"]
    if task is None:
        raise CompositionParseError("completion contains no parseable {\"task\": ...} object")
    return task


def compose(
    x_n: Instruction,
    scenario: ScenarioRecord,
    pair: CwePair,
    params: GenerationParams,
    client: TextGenClient,
    template: str | None = None,
) -> Instruction:
    """Compose one vulnerability-inducing instruction from a normal seed."""
    if x_n.kind != "normal":
        raise ValidationError("compose requires a normal seed instruction")
    prompt = render_compose_prompt(x_n, scenario, pair, template)
    completions = client.complete(prompt, params.with_n(1))
    text = completions[0].text if completions else ""
    task = extract_task_json(text)
    return Instruction.vuln_inducing(task, pair, origin_id=x_n.id)


def cluster_select(
    instructions: list[Instruction],
    k: int,
    embedder: Embedder,
    seed: int,
) -> list[Instruction]:
    """Keep one representative per cluster: the member nearest its cluster
    mean. Returns min(k, n) instructions in id order; never synthesizes text."""
    if k < 1:
        raise ValidationError("cluster_select: K must be >= 1")
    pairs = {i.pair for i in instructions}
    if len(pairs) > 1:
        raise ValidationError(f"cluster_select: instructions span {len(pairs)} pairs, expected one")
    ordered = sorted(instructions, key=lambda i: i.id)
    if len(ordered) <= k:
        if len(ordered) < k:
            log.warning("cluster_select: only %d instructions for K=%d, returning all", len(ordered), k)
        return ordered
    points = np.asarray(embedder.embed([i.text for i in ordered]), dtype=np.float64)
    if not np.all(np.isfinite(points)):
        raise ValidationError("cluster_select: embedder produced non-finite values")
    centers, labels = kmeans(points, k, seed)
    chosen = representative_indices(points, centers, labels)
    return sorted((ordered[i] for i in chosen), key=lambda i: i.id)


def diversity_score(instructions: list[Instruction], embedder: Embedder) -> float:
    """Mean pairwise cosine similarity; lower means more diverse."""
    if len(instructions) < 2:
        raise UndefinedInputError("diversity_score needs at least 2 instructions")
    vectors = np.asarray(embedder.embed([i.text for i in instructions]), dtype=np.float64)
    sims = cosine_matrix(vectors)
    n = len(instructions)
    upper = sims[np.triu_indices(n, k=1)]
    return float(upper.mean())
