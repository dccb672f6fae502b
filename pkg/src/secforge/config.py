"""Run configuration: one TOML file drives every stage.

Paths are resolved relative to the config file's directory so a run config
travels with its inputs; the config hash is over raw file bytes, making the
run id machine-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .canonical import file_hash
from .errors import ValidationError
from .select import FilterThresholds
from .toml_compat import load_toml


@dataclass
class SynthConfig:
    n_scenario_samples: int = 4
    seed_cap: int = 2000
    keywords: tuple[str, ...] = ()
    k_clusters: int = 2000
    temperature: float = 1.0
    top_p: float = 0.95
    max_tokens: int = 1024


@dataclass
class BuildConfig:
    n_vuln_samples: int = 16
    n_fix_samples: int = 8
    n_norm_samples: int = 8
    max_pairs_per_instruction: int = 4
    max_norm_per_sec: int = 8
    allow_clean_as_win: bool = False
    temperature: float = 0.8
    top_p: float = 0.95
    max_tokens: int = 1024


@dataclass
class InfluenceConfig:
    traces: str = "dynamics.jsonl"
    measure: str = "default"
    top_k: int = 2
    discard_quantile: float = 0.2


@dataclass
class EvalConfig:
    suite: str | None = None
    n_per_instr: int = 10
    max_iters: int = 5


@dataclass
class LossConfig:
    pairlogprobs: str = "pairlogprobs.jsonl"
    beta: float = 1.5
    gamma: float = 0.5


@dataclass
class ClientConfig:
    kind: str = "mock"  # "mock" | "http"
    model: str = "mock-model"
    script: str | None = None
    retries: int = 3
    backoff: float = 0.25


@dataclass
class RunConfig:
    config_path: Path
    config_hash: str
    seed: int = 0
    max_inflight: int = 1
    targets: str = "targets.toml"
    seeds: str = "seeds.jsonl"
    rules_dir: str | None = None
    prompts_dir: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    build: BuildConfig = field(default_factory=BuildConfig)
    filter_thresholds: FilterThresholds = field(default_factory=FilterThresholds)
    influence: InfluenceConfig = field(default_factory=InfluenceConfig)
    finalize_norm_ratio: float | None = None
    eval: EvalConfig = field(default_factory=EvalConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    client: ClientConfig = field(default_factory=ClientConfig)

    def resolve(self, rel: str) -> Path:
        path = Path(rel)
        return path if path.is_absolute() else self.config_path.parent / path


def _take(d: dict, cls, **renames):
    kwargs = {}
    names = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
    for key, value in d.items():
        key = renames.get(key, key)
        if key not in names:
            raise ValidationError(f"unknown config key {key!r} for {cls.__name__}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    raw = load_toml(path)
    cfg = RunConfig(config_path=path, config_hash=file_hash(path))
    cfg.seed = int(raw.get("seed", 0))
    cfg.max_inflight = int(raw.get("max_inflight", 1))
    paths = raw.get("paths", {})
    cfg.targets = paths.get("targets", cfg.targets)
    cfg.seeds = paths.get("seeds", cfg.seeds)
    cfg.rules_dir = paths.get("rules_dir")
    cfg.prompts_dir = paths.get("prompts_dir")
    if "synth" in raw:
        cfg.synth = _take(raw["synth"], SynthConfig)
    if "build" in raw:
        cfg.build = _take(raw["build"], BuildConfig)
    if "filter" in raw:
        cfg.filter_thresholds = FilterThresholds.from_dict(raw["filter"])
    if "influence" in raw:
        cfg.influence = _take(raw["influence"], InfluenceConfig)
    if "finalize" in raw:
        ratio = raw["finalize"].get("norm_ratio")
        cfg.finalize_norm_ratio = float(ratio) if ratio is not None else None
    if "eval" in raw:
        cfg.eval = _take(raw["eval"], EvalConfig)
    if "loss" in raw:
        cfg.loss = _take(raw["loss"], LossConfig)
    if "client" in raw:
        cfg.client = _take(raw["client"], ClientConfig)
    if cfg.client.kind not in ("mock", "http"):
        raise ValidationError(f"client.kind must be 'mock' or 'http', got {cfg.client.kind!r}")
    if cfg.max_inflight < 1:
        raise ValidationError("max_inflight must be >= 1")
    return cfg
