"""Training configuration loaded from TOML."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib as _toml
except ImportError:  # pragma: no cover
    import tomli as _toml

from .objectives import OBJECTIVES


@dataclass
class TrainConfig:
    model_ref: str = "toy-v1"
    lr: float = 5e-2
    steps: int = 1000
    checkpoint_every: int = 100
    objective: str = "simpo"
    beta: float = 1.5
    gamma: float | None = 0.5
    adapter_rank: int = 8
    adapter_alpha: int = 16
    batch_size: int = 8
    vocab_size: int = 48

    def __post_init__(self):
        if self.steps < 1 or self.checkpoint_every < 1:
            raise ValueError("steps and checkpoint_every must be >= 1")
        if self.steps % self.checkpoint_every != 0:
            raise ValueError(
                f"checkpoint_every ({self.checkpoint_every}) must divide steps ({self.steps})"
            )
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.objective == "simpo" and self.gamma is None:
            raise ValueError("objective = simpo requires gamma")
        if self.lr <= 0 or self.beta <= 0:
            raise ValueError("lr and beta must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def num_checkpoints(self) -> int:
        return self.steps // self.checkpoint_every

    @property
    def checkpoint_grid(self) -> tuple[int, ...]:
        return tuple(range(self.checkpoint_every, self.steps + 1, self.checkpoint_every))


@dataclass
class BridgePaths:
    dataset: str = "final.prefs.jsonl"
    out_dir: str = "bridge-out"
    subjects: str = "subjects.jsonl"
    dynamics_out: str = "dynamics.jsonl"
    pairlogprobs_out: str = "pairlogprobs.jsonl"
    checkpoint: str | None = None


@dataclass
class BridgeConfig:
    config_path: Path
    train: TrainConfig
    paths: BridgePaths

    def resolve(self, rel: str) -> Path:
        path = Path(rel)
        return path if path.is_absolute() else self.config_path.parent / path


def load_bridge_config(path: str | Path) -> BridgeConfig:
    path = Path(path)
    with open(path, "rb") as f:
        raw = _toml.load(f)
    train_raw = dict(raw.get("train", {}))
    paths_raw = dict(raw.get("paths", {}))
    return BridgeConfig(
        config_path=path,
        train=TrainConfig(**train_raw),
        paths=BridgePaths(**paths_raw),
    )
