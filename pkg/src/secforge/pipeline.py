"""Stage orchestration: one run directory per (config, seed), stage outputs
written atomically, and a manifest that records enough hashes to detect
stale upstream outputs and to prove two runs are byte-identical.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .canonical import content_hash, file_hash, read_jsonl, text_hash, write_json, write_jsonl
from .catalog import Instruction, load_cwe_targets, load_seed_instructions
from .clients import GenerationParams, HttpChatClient, RetryingClient, ScriptedMockClient
from .cache import CachingClient, CompletionCache
from .config import RunConfig
from .embed import HashingTrigramEmbedder
from .errors import CompositionParseError, StaleInputError, ValidationError
from .evalharness import load_eval_suite, secure_ratio
from .forge import (
    COMPOSE_TEMPLATE,
    SCENARIO_TEMPLATE,
    cluster_select,
    compose,
    load_prompt,
    query_cwe_scenarios,
    relevant_instructions,
)
from .oracle.engine import SecurityOracle, load_rule_packs
from .prefs import NormTriple, SecTriple, build_norm, build_sec, CodeSample
from .select import (
    FilterThresholds,
    finalize,
    heuristic_filter_sec,
    influence,
    load_traces,
    orphaned_sec_ids,
    select_norm,
)
from .simpo import load_pairlogprobs, loss_report

log = logging.getLogger(__name__)

STAGES = ("synth", "build-prefs", "filter", "influence", "finalize", "eval", "loss-report")

DEPENDENCIES: dict[str, tuple[str, ...]] = {
    "synth": (),
    "build-prefs": ("synth",),
    "filter": ("build-prefs",),
    "influence": ("filter",),
    "finalize": ("filter", "influence"),
    "eval": (),
    "loss-report": (),
}

FORGE_MANIFEST = "forge-manifest.json"
SAMPLES_FILE = "samples.jsonl"
DSEC_CANDIDATES = "dsec.candidates.jsonl"
DNORM_CANDIDATES = "dnorm.candidates.jsonl"
DSEC_STAR = "dsec.star.jsonl"
DNORM_STAR = "dnorm.star.jsonl"
SCORES_FILE = "influence.scores.jsonl"
FINAL_PREFS = "final.prefs.jsonl"
FINAL_MANIFEST = "final.manifest.json"
EVAL_REPORT = "eval-report.json"
EVAL_SAMPLES = "eval-samples.jsonl"
LOSS_REPORT = "loss-report.json"
RUN_MANIFEST = "run-manifest.json"
CACHE_FILE = "cache.jsonl"


def run_id_for(config_hash: str, seed: int) -> str:
    return content_hash({"config_hash": config_hash, "seed": seed})[:16]


@dataclass
class StageOutcome:
    stage: str
    status: str  # "complete" | "skipped"
    counts: dict = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)


class RunDir:
    def __init__(self, runs_root: str | Path, cfg: RunConfig):
        self.cfg = cfg
        self.run_id = run_id_for(cfg.config_hash, cfg.seed)
        self.root = Path(runs_root) / self.run_id
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, rel: str) -> Path:
        return self.root / rel

    def load_manifest(self) -> dict:
        manifest_path = self.path(RUN_MANIFEST)
        if manifest_path.exists():
            with open(manifest_path, "r", encoding="utf-8") as f:
                return json.load(f)
        return {
            "schema_version": 1,
            "run_id": self.run_id,
            "seed": self.cfg.seed,
            "config_hash": self.cfg.config_hash,
            "tool_version": __version__,
            "stage_states": {},
        }

    def save_manifest(self, manifest: dict) -> None:
        write_json(self.path(RUN_MANIFEST), manifest)

    def hash_outputs(self, rel_paths: list[str]) -> dict[str, str]:
        return {rel: file_hash(self.path(rel)) for rel in sorted(rel_paths)}


def build_client(cfg: RunConfig, rundir: RunDir) -> CachingClient:
    if cfg.client.kind == "mock":
        if cfg.client.script is None:
            raise ValidationError("client.kind = 'mock' requires client.script")
        base = ScriptedMockClient.from_script_file(cfg.resolve(cfg.client.script))
    else:
        base = HttpChatClient(model=cfg.client.model)
    retrying = RetryingClient(base, retries=cfg.client.retries, backoff=cfg.client.backoff)
    return CachingClient(base=retrying, cache=CompletionCache(rundir.path(CACHE_FILE)))


def build_oracle(cfg: RunConfig) -> SecurityOracle:
    if cfg.rules_dir is not None:
        return SecurityOracle(load_rule_packs(cfg.resolve(cfg.rules_dir)))
    return SecurityOracle()


def _rows_with_run_id(records, run_id: str) -> list[dict]:
    return [{"run_id": run_id, **r.to_dict()} for r in records]


def _map_bounded(fn, items, max_inflight: int) -> list:
    if max_inflight <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_inflight) as pool:
        return list(pool.map(fn, items))


# --- stage bodies ---------------------------------------------------------


def _stage_synth(cfg: RunConfig, rundir: RunDir, client: CachingClient) -> StageOutcome:
    targets = load_cwe_targets(cfg.resolve(cfg.targets))
    seed_stats: dict = {}
    seeds = load_seed_instructions(cfg.resolve(cfg.seeds), stats=seed_stats)
    embedder = HashingTrigramEmbedder()
    scenario_template = load_prompt(SCENARIO_TEMPLATE, cfg.prompts_dir and cfg.resolve(cfg.prompts_dir))
    compose_template = load_prompt(COMPOSE_TEMPLATE, cfg.prompts_dir and cfg.resolve(cfg.prompts_dir))
    params = GenerationParams(
        temperature=cfg.synth.temperature,
        top_p=cfg.synth.top_p,
        max_tokens=cfg.synth.max_tokens,
        n_samples=cfg.synth.n_scenario_samples,
        seed=cfg.seed,
    )
    per_pair: dict[str, dict] = {}
    files: list[str] = []
    for pair in targets:
        scenarios = query_cwe_scenarios(pair, params, client, template=scenario_template)
        relevant = relevant_instructions(
            seeds, pair, cap=cfg.synth.seed_cap, keywords=list(cfg.synth.keywords) or None
        )
        composed: list[Instruction] = []
        parse_failures = 0
        if scenarios and relevant:
            def _compose_one(indexed):
                idx, x_n = indexed
                scenario = scenarios[idx % len(scenarios)]
                try:
                    return compose(x_n, scenario, pair, params, client, template=compose_template)
                except CompositionParseError:
                    return None

            results = _map_bounded(_compose_one, list(enumerate(relevant)), cfg.max_inflight)
            composed = [r for r in results if r is not None]
            parse_failures = sum(1 for r in results if r is None)
        selected = cluster_select(composed, cfg.synth.k_clusters, embedder, cfg.seed) if composed else []
        rel_path = f"instructions.{pair.language}.{pair.cwe}.jsonl"
        write_jsonl(rundir.path(rel_path), _rows_with_run_id(selected, rundir.run_id))
        files.append(rel_path)
        per_pair[f"{pair.language}/{pair.cwe}"] = {
            "scenarios": len(scenarios),
            "relevant_seeds": len(relevant),
            "synthesized": len(composed),
            "parse_failures": parse_failures,
            "clustered": len(selected),
        }
    manifest = {
        "schema_version": 1,
        "run_id": rundir.run_id,
        "seed_stats": seed_stats,
        "per_pair": per_pair,
        "files": files,
    }
    write_json(rundir.path(FORGE_MANIFEST), manifest)
    counts = {
        "pairs": len(targets),
        "synthesized": sum(p["synthesized"] for p in per_pair.values()),
        "parse_failures": sum(p["parse_failures"] for p in per_pair.values()),
        "clustered": sum(p["clustered"] for p in per_pair.values()),
    }
    return StageOutcome(stage="synth", status="complete", counts=counts,
                        outputs={rel: "" for rel in files + [FORGE_MANIFEST]})


def _load_synth_instructions(rundir: RunDir) -> list[Instruction]:
    with open(rundir.path(FORGE_MANIFEST), "r", encoding="utf-8") as f:
        manifest = json.load(f)
    out: list[Instruction] = []
    for rel in manifest["files"]:
        for row in read_jsonl(rundir.path(rel)):
            row = dict(row)
            row.pop("run_id", None)
            out.append(Instruction.from_dict(row))
    return out


def _stage_build(cfg: RunConfig, rundir: RunDir, client: CachingClient, oracle: SecurityOracle) -> StageOutcome:
    vuln_instrs = _load_synth_instructions(rundir)
    seeds = load_seed_instructions(cfg.resolve(cfg.seeds))
    instr_store = {i.id: i for i in seeds}
    instr_store.update({i.id: i for i in vuln_instrs})
    params = GenerationParams(
        temperature=cfg.build.temperature,
        top_p=cfg.build.top_p,
        max_tokens=cfg.build.max_tokens,
        seed=cfg.seed,
    )
    sec = build_sec(
        vuln_instrs,
        oracle,
        client,
        params,
        n_vuln_samples=cfg.build.n_vuln_samples,
        n_fix_samples=cfg.build.n_fix_samples,
        max_pairs_per_instruction=cfg.build.max_pairs_per_instruction,
        allow_clean_as_win=cfg.build.allow_clean_as_win,
    )
    norm = build_norm(
        sec.sec_triples,
        instr_store,
        oracle,
        client,
        params,
        n_norm_samples=cfg.build.n_norm_samples,
        max_norm_per_sec=cfg.build.max_norm_per_sec,
    )
    samples = dict(sec.samples)
    samples.update(norm.samples)
    write_jsonl(
        rundir.path(SAMPLES_FILE),
        _rows_with_run_id([samples[k] for k in sorted(samples)], rundir.run_id),
    )
    write_jsonl(rundir.path(DSEC_CANDIDATES), _rows_with_run_id(sorted(sec.sec_triples, key=lambda t: t.id), rundir.run_id))
    write_jsonl(rundir.path(DNORM_CANDIDATES), _rows_with_run_id(sorted(norm.norm_triples, key=lambda t: t.id), rundir.run_id))
    counts = {"sec": sec.counts, "norm": norm.counts}
    return StageOutcome(
        stage="build-prefs",
        status="complete",
        counts=counts,
        outputs={rel: "" for rel in (SAMPLES_FILE, DSEC_CANDIDATES, DNORM_CANDIDATES)},
    )


def _read_records(rundir: RunDir, rel: str, cls):
    out = []
    for row in read_jsonl(rundir.path(rel)):
        row = dict(row)
        row.pop("run_id", None)
        out.append(cls.from_dict(row))
    return out


def _sample_texts(rundir: RunDir) -> dict[str, str]:
    return {s.id: s.text for s in _read_records(rundir, SAMPLES_FILE, CodeSample)}


def _stage_filter(cfg: RunConfig, rundir: RunDir) -> StageOutcome:
    candidates = _read_records(rundir, DSEC_CANDIDATES, SecTriple)
    texts = _sample_texts(rundir)
    result = heuristic_filter_sec(candidates, texts, cfg.filter_thresholds)
    write_jsonl(rundir.path(DSEC_STAR), _rows_with_run_id(result.kept, rundir.run_id))
    counts = {"candidates": len(candidates), **result.to_manifest()}
    return StageOutcome(stage="filter", status="complete", counts=counts, outputs={DSEC_STAR: ""})


def _stage_influence(cfg: RunConfig, rundir: RunDir) -> StageOutcome:
    candidates = _read_records(rundir, DNORM_CANDIDATES, NormTriple)
    kept_sec = {t.id for t in _read_records(rundir, DSEC_STAR, SecTriple)}
    linked = [c for c in candidates if c.sec_link in kept_sec]
    unlinked = len(candidates) - len(linked)
    traces = load_traces(cfg.resolve(cfg.influence.traces))
    for warning in traces.warnings:
        log.warning("traces: %s", warning)
    scores = {c.id: influence(c, traces, cfg.influence.measure) for c in linked}
    selected = select_norm(linked, scores, cfg.influence.top_k, cfg.influence.discard_quantile)
    orphans = orphaned_sec_ids(kept_sec, selected)
    score_rows = [scores[k].to_dict() for k in sorted(scores)]
    write_jsonl(rundir.path(SCORES_FILE), [{"run_id": rundir.run_id, **r} for r in score_rows])
    write_jsonl(rundir.path(DNORM_STAR), _rows_with_run_id(selected, rundir.run_id))
    counts = {
        "candidates": len(candidates),
        "unlinked_dropped": unlinked,
        "scored": len(scores),
        "no_signal": sum(1 for s in scores.values() if s.no_signal),
        "selected": len(selected),
        "orphaned_sec": len(orphans),
        "trace_warnings": len(traces.warnings),
    }
    return StageOutcome(stage="influence", status="complete", counts=counts,
                        outputs={SCORES_FILE: "", DNORM_STAR: ""})


def _stage_finalize(cfg: RunConfig, rundir: RunDir) -> StageOutcome:
    dsec_star = _read_records(rundir, DSEC_STAR, SecTriple)
    dnorm_star = _read_records(rundir, DNORM_STAR, NormTriple)
    seeds = load_seed_instructions(cfg.resolve(cfg.seeds))
    instr_texts = {i.id: i.text for i in seeds}
    instr_texts.update({i.id: i.text for i in _load_synth_instructions(rundir)})
    result = finalize(
        dsec_star,
        dnorm_star,
        seed=cfg.seed,
        instruction_texts=instr_texts,
        sample_texts=_sample_texts(rundir),
        norm_ratio=cfg.finalize_norm_ratio,
        out_path=rundir.path(FINAL_PREFS),
        manifest_path=rundir.path(FINAL_MANIFEST),
    )
    return StageOutcome(stage="finalize", status="complete", counts=result.manifest["counts"],
                        outputs={FINAL_PREFS: "", FINAL_MANIFEST: ""})


def _stage_eval(cfg: RunConfig, rundir: RunDir, client: CachingClient, oracle: SecurityOracle) -> StageOutcome:
    if cfg.eval.suite is None:
        raise ValidationError("eval stage requires eval.suite in the config (or --suite)")
    cases = load_eval_suite(cfg.resolve(cfg.eval.suite))
    params = GenerationParams(
        temperature=cfg.build.temperature,
        top_p=cfg.build.top_p,
        max_tokens=cfg.build.max_tokens,
        seed=cfg.seed,
    )
    report = secure_ratio(cases, client, oracle, cfg.eval.n_per_instr, params)
    write_json(rundir.path(EVAL_REPORT), report.to_dict())
    write_jsonl(rundir.path(EVAL_SAMPLES), report.sample_rows)
    counts = {
        "cases": len(cases),
        "aggregate_ratio": report.aggregate_ratio,
        "micro_ratio": report.micro_ratio,
        **report.coverage,
    }
    return StageOutcome(stage="eval", status="complete", counts=counts,
                        outputs={EVAL_REPORT: "", EVAL_SAMPLES: ""})


def _stage_loss_report(cfg: RunConfig, rundir: RunDir) -> StageOutcome:
    rows, warnings = load_pairlogprobs(cfg.resolve(cfg.loss.pairlogprobs))
    report = loss_report(rows, cfg.loss.beta, cfg.loss.gamma, warnings)
    write_json(rundir.path(LOSS_REPORT), report)
    counts = {"rows": len(rows), "warnings": len(warnings), "mean": report["summary"]["mean"]}
    return StageOutcome(stage="loss-report", status="complete", counts=counts, outputs={LOSS_REPORT: ""})


# --- inputs per stage -----------------------------------------------------


def _stage_inputs(stage: str, cfg: RunConfig, rundir: RunDir) -> dict[str, str]:
    """Hashes of the external files a stage consumes (upstream outputs are
    checked separately against the manifest)."""
    inputs: dict[str, str] = {}

    def add_file(label: str, rel: str):
        path = cfg.resolve(rel)
        if path.exists():
            inputs[label] = file_hash(path)

    if stage == "synth":
        add_file("targets", cfg.targets)
        add_file("seeds", cfg.seeds)
        prompts_dir = cfg.prompts_dir and cfg.resolve(cfg.prompts_dir)
        inputs["template:scenario"] = text_hash(load_prompt(SCENARIO_TEMPLATE, prompts_dir))
        inputs["template:compose"] = text_hash(load_prompt(COMPOSE_TEMPLATE, prompts_dir))
    elif stage == "build-prefs":
        add_file("seeds", cfg.seeds)
    elif stage == "influence":
        add_file("traces", cfg.influence.traces)
    elif stage == "finalize":
        add_file("seeds", cfg.seeds)
    elif stage == "eval":
        if cfg.eval.suite:
            add_file("suite", cfg.eval.suite)
    elif stage == "loss-report":
        add_file("pairlogprobs", cfg.loss.pairlogprobs)
    return inputs


def run_stage(stage: str, cfg: RunConfig, runs_root: str | Path = "runs", force: bool = False) -> StageOutcome:
    """Execute one stage with upstream freshness checks and manifest updates.

    A completed stage whose inputs and outputs still hash-match is skipped;
    modified upstream outputs raise StaleInputError naming the stage to rerun.
    """
    if stage not in STAGES:
        raise ValidationError(f"unknown stage {stage!r}; stages: {', '.join(STAGES)}")
    rundir = RunDir(runs_root, cfg)
    manifest = rundir.load_manifest()
    states = manifest["stage_states"]

    for dep in DEPENDENCIES[stage]:
        dep_state = states.get(dep)
        if not force and (dep_state is None or dep_state.get("status") != "complete"):
            raise StaleInputError(f"stage {stage!r} needs {dep!r} to run first", rerun_stage=dep)
        if dep_state is not None:
            for rel, recorded in dep_state.get("output_hashes", {}).items():
                path = rundir.path(rel)
                if not path.exists() or file_hash(path) != recorded:
                    raise StaleInputError(
                        f"output {rel!r} of stage {dep!r} is missing or modified; rerun {dep!r}",
                        rerun_stage=dep,
                    )

    inputs = _stage_inputs(stage, cfg, rundir)
    state = states.get(stage)
    if state is not None and not force and state.get("status") == "complete":
        if state.get("input_hashes") == inputs:
            outputs_ok = all(
                rundir.path(rel).exists() and file_hash(rundir.path(rel)) == recorded
                for rel, recorded in state.get("output_hashes", {}).items()
            )
            if outputs_ok:
                log.info("stage %s already complete; skipping", stage)
                return StageOutcome(stage=stage, status="skipped", counts=state.get("counts", {}),
                                    outputs=state.get("output_hashes", {}))

    client = None
    tally_before = None
    if stage in ("synth", "build-prefs", "eval"):
        client = build_client(cfg, rundir)
        tally_before = client.tally.to_dict()

    if stage == "synth":
        outcome = _stage_synth(cfg, rundir, client)
    elif stage == "build-prefs":
        outcome = _stage_build(cfg, rundir, client, build_oracle(cfg))
    elif stage == "filter":
        outcome = _stage_filter(cfg, rundir)
    elif stage == "influence":
        outcome = _stage_influence(cfg, rundir)
    elif stage == "finalize":
        outcome = _stage_finalize(cfg, rundir)
    elif stage == "eval":
        outcome = _stage_eval(cfg, rundir, client, build_oracle(cfg))
    else:
        outcome = _stage_loss_report(cfg, rundir)

    if client is not None and tally_before is not None:
        after = client.tally.to_dict()
        outcome.counts["usage"] = {k: after[k] - tally_before[k] for k in after}

    outcome.outputs = rundir.hash_outputs(list(outcome.outputs))
    states[outcome.stage] = {
        "status": outcome.status,
        "input_hashes": inputs,
        "output_hashes": outcome.outputs,
        "counts": outcome.counts,
    }
    rundir.save_manifest(manifest)
    return outcome
