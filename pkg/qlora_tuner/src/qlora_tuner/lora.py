"""Low-rank adapters over frozen linear layers, with parameter accounting.

A LoRA pair adds r*(d_in + d_out) trainable weights per targeted projection
(the A and B matrices); that closed form is the oracle the framework count
is checked against.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

import torch
from torch import nn

from .config import AdapterConfig, ModelPreset


class LoRALinear(nn.Module):
    """A frozen nn.Linear plus a trainable low-rank update.

    forward(x) = base(x) + dropout(x) @ A^T @ B^T * (alpha / r);
    B starts at zero so the wrapped model is initially unchanged.
    """

    def __init__(self, base: nn.Linear, cfg: AdapterConfig):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.empty(cfg.r, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, cfg.r))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.dropout = nn.Dropout(cfg.dropout)
        self.scaling = cfg.scaling

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        update = self.dropout(x) @ self.lora_a.T @ self.lora_b.T
        return self.base(x) + update * self.scaling


def apply_lora(model: nn.Module, cfg: AdapterConfig) -> nn.Module:
    """Wrap every targeted nn.Linear in place; freeze everything else."""
    for p in model.parameters():
        p.requires_grad_(False)
    wrapped = 0
    for module in list(model.modules()):
        for name, child in list(module.named_children()):
            if isinstance(child, nn.Linear) and name in cfg.target_modules:
                setattr(module, name, LoRALinear(child, cfg))
                wrapped += 1
    if wrapped == 0:
        raise ValueError(f"no modules named {cfg.target_modules} found to adapt")
    return model


def has_adapter(model: nn.Module) -> bool:
    return any(isinstance(m, LoRALinear) for m in model.modules())


def count_trainable(model: nn.Module) -> tuple[int, int, float]:
    """(trainable, total, fraction) over the adapted model."""
    if not has_adapter(model):
        raise ValueError("no adapter attached; call apply_lora first")
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    total = sum(p.numel() for p in model.parameters())
    return trainable, total, trainable / total


def lora_param_count(shapes: Iterable[tuple[int, int]], r: int) -> int:
    """Closed form: r*(d_in + d_out) per adapted projection."""
    return sum(r * (d_in + d_out) for d_in, d_out in shapes)


def preset_trainable(preset: ModelPreset, cfg: AdapterConfig) -> tuple[int, int, float]:
    """Adapter size for a published checkpoint, from its recorded geometry."""
    trainable = lora_param_count(preset.target_shapes(cfg.target_modules), cfg.r)
    return trainable, preset.total_params, trainable / preset.total_params


def trainable_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]


def adapter_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        k: v.detach().clone()
        for k, v in model.state_dict().items()
        if "lora_a" in k or "lora_b" in k
    }


def save_adapter(model: nn.Module, cfg: AdapterConfig, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(adapter_state_dict(model), out_dir / "adapter.pt")
    (out_dir / "adapter_config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
    )
    return out_dir


def load_adapter(model: nn.Module, adapter_dir: Path) -> nn.Module:
    """Load saved A/B matrices into an already-adapted model."""
    if not has_adapter(model):
        raise ValueError("no adapter attached; call apply_lora first")
    state = torch.load(Path(adapter_dir) / "adapter.pt", weights_only=True)
    missing = model.load_state_dict(state, strict=False)
    unexpected = list(missing.unexpected_keys)
    if unexpected:
        raise ValueError(f"adapter keys do not match the model: {unexpected}")
    return model
