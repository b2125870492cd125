"""Fine-tuning loop over exported prompt JSONL files.

Input is the classification-prompt export: one JSON object per line with at
least "prompt" (containing a supervised "Answer: <label>" tail). A metadata
first line without a "prompt" key is skipped.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .collator import Batch, build_masked_batch, masked_loss
from .config import AdapterConfig, TrainConfig, save_config
from .lora import apply_lora, count_trainable, save_adapter, trainable_parameters
from .model import TinyDecoder
from .tokenizer import SimpleTokenizer


class DatasetError(ValueError):
    pass


@dataclass
class TrainResult:
    adapter_dir: Path
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    trainable_params: int = 0
    total_params: int = 0


def load_jsonl(path: Path) -> list[dict]:
    examples = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"corrupt JSONL at line {lineno}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise DatasetError(f"corrupt JSONL at line {lineno}: expected an object")
        if "prompt" in obj:
            examples.append(obj)
    if not examples:
        raise DatasetError(f"{path}: no prompt examples found")
    return examples


def split_examples(examples: list[dict], val_fraction: float, seed: int):
    order = list(range(len(examples)))
    random.Random(seed).shuffle(order)
    n_val = int(round(len(examples) * val_fraction))
    val_idx = set(order[:n_val])
    train = [examples[i] for i in range(len(examples)) if i not in val_idx]
    val = [examples[i] for i in sorted(val_idx)]
    return train, val


def _batches(examples: list[dict], batch_size: int):
    for start in range(0, len(examples), batch_size):
        yield examples[start : start + batch_size]


@torch.no_grad()
def evaluate_loss(
    model: torch.nn.Module,
    examples: list[dict],
    tokenizer: SimpleTokenizer,
    train_cfg: TrainConfig,
) -> float:
    """Mean masked loss over the examples in eval mode (FP32, no dropout)."""
    model.eval()
    total, count = 0.0, 0
    for chunk in _batches(examples, train_cfg.batch_size):
        batch = build_masked_batch(chunk, tokenizer, max_length=train_cfg.max_length)
        loss = masked_loss(model(batch.input_ids, batch.attention_mask), batch)
        total += float(loss) * len(chunk)
        count += len(chunk)
    return total / count


def finetune(
    jsonl_path: Path,
    adapter_cfg: AdapterConfig,
    train_cfg: TrainConfig,
    out_dir: Path,
    model: torch.nn.Module | None = None,
    tokenizer: SimpleTokenizer | None = None,
) -> TrainResult:
    """Train a low-rank adapter on the export and save it with its log.

    Without an explicit model, a small decoder is built over a vocabulary
    drawn from the corpus itself.
    """
    examples = load_jsonl(jsonl_path)
    train_set, val_set = split_examples(examples, train_cfg.val_fraction, train_cfg.seed)
    if tokenizer is None:
        tokenizer = SimpleTokenizer.from_corpus(ex["prompt"] for ex in examples)
    if model is None:
        torch.manual_seed(train_cfg.seed)
        model = TinyDecoder(vocab_size=len(tokenizer), max_positions=train_cfg.max_length)
    apply_lora(model, adapter_cfg)
    trainable, total, _ = count_trainable(model)

    optimizer = torch.optim.AdamW(
        trainable_parameters(model),
        lr=train_cfg.learning_rate,
        weight_decay=train_cfg.weight_decay,
    )
    rng = random.Random(train_cfg.seed + 1)
    train_losses, val_losses = [], []
    for _ in range(train_cfg.epochs):
        model.train()
        order = list(range(len(train_set)))
        rng.shuffle(order)
        epoch_total, seen = 0.0, 0
        for chunk in _batches([train_set[i] for i in order], train_cfg.batch_size):
            batch = build_masked_batch(chunk, tokenizer, max_length=train_cfg.max_length)
            try:
                loss = masked_loss(model(batch.input_ids, batch.attention_mask), batch)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            except torch.cuda.OutOfMemoryError as exc:
                raise RuntimeError(
                    f"out of memory at batch_size={train_cfg.batch_size}; retry with a smaller batch size"
                ) from exc
            epoch_total += float(loss.detach()) * len(chunk)
            seen += len(chunk)
        train_losses.append(epoch_total / seen)
        if val_set:
            val_losses.append(evaluate_loss(model, val_set, tokenizer, train_cfg))

    out_dir = Path(out_dir)
    save_adapter(model, adapter_cfg, out_dir)
    tokenizer.save(out_dir / "tokenizer.json")
    save_config(adapter_cfg, out_dir / "adapter_config.json")
    metrics = {
        "train_losses": train_losses,
        "val_losses": val_losses,
        "trainable_params": trainable,
        "total_params": total,
        "epochs": train_cfg.epochs,
        "batch_size": train_cfg.batch_size,
        "learning_rate": train_cfg.learning_rate,
        "weight_decay": train_cfg.weight_decay,
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True))
    return TrainResult(
        adapter_dir=out_dir,
        train_losses=train_losses,
        val_losses=val_losses,
        trainable_params=trainable,
        total_params=total,
    )
