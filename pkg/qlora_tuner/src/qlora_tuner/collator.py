"""Loss-masking collator for supervised prompt/answer examples.

Each example ends in a single supervised "Answer: <label>" tail. Everything
at or before the final "Answer:" marker carries the ignore value in the
labels tensor; only the label tokens are supervised. The loss mask is frozen
at collation time, so the loss provably cannot depend on label values at
masked positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .tokenizer import SimpleTokenizer

ANSWER_MARKER = "Answer:"
IGNORE_INDEX = -100


class CollatorError(ValueError):
    pass


@dataclass
class Batch:
    input_ids: torch.Tensor  # (B, T) long
    attention_mask: torch.Tensor  # (B, T) long, 0 on padding
    labels: torch.Tensor  # (B, T) long, IGNORE_INDEX off the label tail
    loss_mask: torch.Tensor  # (B, T) bool, True exactly on supervised positions

    def to(self, device) -> "Batch":
        return Batch(*(t.to(device) for t in (self.input_ids, self.attention_mask, self.labels, self.loss_mask)))

    def __len__(self) -> int:
        return self.input_ids.shape[0]


def split_example(prompt: str) -> tuple[str, str]:
    """Split a supervised prompt into (context incl. marker, label tail)."""
    idx = prompt.rfind(ANSWER_MARKER)
    if idx < 0:
        raise CollatorError("example lacks an 'Answer:' marker")
    cut = idx + len(ANSWER_MARKER)
    context, tail = prompt[:cut], prompt[cut:]
    if not tail.strip():
        raise CollatorError("example lacks a label tail after 'Answer:'")
    return context, tail


def build_masked_batch(
    examples: list[dict],
    tokenizer: SimpleTokenizer,
    max_length: int = 512,
) -> Batch:
    """Tokenize, truncate to max_length, pad with eos, and mask the loss.

    Examples are dicts with at least a "prompt" key, as produced by the
    prompt JSONL export.
    """
    if not examples:
        raise CollatorError("empty batch")
    rows = []
    for ex in examples:
        context, tail = split_example(ex["prompt"])
        ctx_ids = tokenizer.encode(context)
        tail_ids = tokenizer.encode(tail)
        ids = (ctx_ids + tail_ids)[:max_length]
        n_label = max(0, len(ids) - len(ctx_ids))
        rows.append((ids, n_label))

    width = max(len(ids) for ids, _ in rows)
    pad = tokenizer.pad_id
    n = len(rows)
    input_ids = torch.full((n, width), pad, dtype=torch.long)
    attention_mask = torch.zeros((n, width), dtype=torch.long)
    labels = torch.full((n, width), IGNORE_INDEX, dtype=torch.long)
    loss_mask = torch.zeros((n, width), dtype=torch.bool)
    for i, (ids, n_label) in enumerate(rows):
        t = len(ids)
        input_ids[i, :t] = torch.tensor(ids, dtype=torch.long)
        attention_mask[i, :t] = 1
        if n_label:
            labels[i, t - n_label : t] = input_ids[i, t - n_label : t]
            loss_mask[i, t - n_label : t] = True
    return Batch(input_ids, attention_mask, labels, loss_mask)


def masked_loss(logits: torch.Tensor, batch: Batch) -> torch.Tensor:
    """Next-token cross-entropy restricted to the collation-time loss mask."""
    shift_logits = logits[:, :-1, :]
    shift_labels = batch.labels[:, 1:]
    shift_mask = batch.loss_mask[:, 1:]
    if not bool(shift_mask.any()):
        raise CollatorError("batch has no supervised positions")
    flat = shift_logits.reshape(-1, shift_logits.shape[-1])
    targets = shift_labels.reshape(-1).clamp_min(0)
    per_token = torch.nn.functional.cross_entropy(flat, targets, reduction="none")
    mask = shift_mask.reshape(-1).to(per_token.dtype)
    return (per_token * mask).sum() / mask.sum()
