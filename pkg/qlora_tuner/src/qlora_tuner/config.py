"""Adapter and training configuration, plus per-model target presets.

Published decoder checkpoints name their projection modules differently, so
target-module lists ship as per-model presets. Each preset records the
projection shapes per layer, which is all the closed-form parameter count
needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path


@dataclass(frozen=True)
class AdapterConfig:
    """Low-rank adapter settings; quantization fields are recorded for the
    artifact manifest and applied only when the backend supports them."""

    r: int = 16
    alpha: int = 32
    dropout: float = 0.1
    target_modules: tuple[str, ...] = ("q_proj", "k_proj", "v_proj")
    quant_bits: int = 4
    quant_type: str = "nf4"
    double_quant: bool = True
    compute_dtype: str = "float16"

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("adapter rank r must be > 0")
        if self.alpha <= 0:
            raise ValueError("adapter scaling alpha must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("adapter dropout must be in [0, 1)")
        if not self.target_modules:
            raise ValueError("target_modules must be non-empty")

    @property
    def scaling(self) -> float:
        return self.alpha / self.r

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_modules"] = list(self.target_modules)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AdapterConfig":
        d = dict(d)
        d["target_modules"] = tuple(d["target_modules"])
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    """Supervised fine-tuning settings. Padding always uses the
    end-of-sequence token; biases stay frozen."""

    epochs: int = 5
    batch_size: int = 16
    learning_rate: float = 5e-4
    weight_decay: float = 0.2
    max_length: int = 512
    val_fraction: float = 0.2
    seed: int = 0
    mixed_precision: str = "fp16"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")


@dataclass(frozen=True)
class ModelPreset:
    """Geometry of a decoder checkpoint: per-layer projection shapes for the
    modules an adapter targets, and the full parameter count."""

    name: str
    n_layers: int
    # module name -> (d_in, d_out), one projection of this shape per layer
    projections: dict[str, tuple[int, int]] = field(hash=False)
    total_params: int = 0
    learning_rate: float = 5e-4

    def target_shapes(self, target_modules: tuple[str, ...]) -> list[tuple[int, int]]:
        missing = [m for m in target_modules if m not in self.projections]
        if missing:
            raise KeyError(f"preset {self.name} has no modules {missing}")
        return [self.projections[m] for _ in range(self.n_layers) for m in target_modules]


# Learning-rate pairing: 5e-4 below ~2B parameters, 5e-5 at 7B and up.
MODEL_PRESETS: dict[str, ModelPreset] = {
    "llama-3.2-1b": ModelPreset(
        name="llama-3.2-1b",
        n_layers=16,
        projections={
            "q_proj": (2048, 2048),
            "k_proj": (2048, 512),
            "v_proj": (2048, 512),
        },
        total_params=1_238_170_000,
        learning_rate=5e-4,
    ),
    "gpt2-medium": ModelPreset(
        name="gpt2-medium",
        n_layers=24,
        projections={"c_attn": (1024, 3072)},
        total_params=354_820_000,
        learning_rate=5e-4,
    ),
    "mistral-7b": ModelPreset(
        name="mistral-7b",
        n_layers=32,
        projections={
            "q_proj": (4096, 4096),
            "k_proj": (4096, 1024),
            "v_proj": (4096, 1024),
        },
        total_params=7_241_730_000,
        learning_rate=5e-5,
    ),
    "llama-3.1-8b": ModelPreset(
        name="llama-3.1-8b",
        n_layers=32,
        projections={
            "q_proj": (4096, 4096),
            "k_proj": (4096, 1024),
            "v_proj": (4096, 1024),
        },
        total_params=8_030_260_000,
        learning_rate=5e-5,
    ),
}

DEFAULT_TARGETS: dict[str, tuple[str, ...]] = {
    "llama-3.2-1b": ("q_proj", "k_proj", "v_proj"),
    "gpt2-medium": ("c_attn",),
    "mistral-7b": ("q_proj", "k_proj", "v_proj"),
    "llama-3.1-8b": ("q_proj", "k_proj", "v_proj"),
}


def save_config(cfg: AdapterConfig, path: Path) -> None:
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))


def load_config(path: Path) -> AdapterConfig:
    return AdapterConfig.from_dict(json.loads(Path(path).read_text()))
