"""Prompt rendering for flow classification, token budgets, answer extraction.

Two layouts: the supervised/inference prompt used for fine-tuning and direct
classification, and the retrieval-augmented prompt that prepends exemplars.
Feature pairs are joined with "; " inside braces; sections are newline
separated.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .errors import BudgetError
from .features import format_value
from .ingest import FlowRecord
from .schema import FeatureSchema

TASK_LINE = "Task: Network Attack Classification"
ANSWER_MARKER = "Answer:"
TRAINING_BUDGET = 512
RAG_BUDGET = 1015

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class TokenizerAdapter(Protocol):
    """Pluggable token counting; the default needs no model runtime."""

    name: str

    def count(self, text: str) -> int: ...

    def truncate(self, text: str, budget: int) -> str: ...


class WhitespacePunctTokenizer:
    """Words and single punctuation marks count as one token each.

    A conservative overestimate of subword tokenizers on this prompt style;
    a model-specific adapter can be plugged in for exact parity.
    """

    name = "whitespace-punct"

    def count(self, text: str) -> int:
        return len(_TOKEN_RE.findall(text))

    def truncate(self, text: str, budget: int) -> str:
        if budget <= 0:
            return ""
        end = 0
        for i, m in enumerate(_TOKEN_RE.finditer(text)):
            if i == budget:
                break
            end = m.end()
        return text[:end]


DEFAULT_TOKENIZER = WhitespacePunctTokenizer()


@dataclass(frozen=True)
class GenSettings:
    """Decoding controls sent to the completion endpoint."""

    max_new_tokens: int = 6
    temperature: float = 0.0  # 0 = greedy
    stop_sequences: tuple[str, ...] = ("\n",)

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


@dataclass(frozen=True)
class PromptText:
    """Rendered prompt plus token-count metadata."""

    text: str
    token_count: int
    answer_marker_offset: int

    def __post_init__(self):
        if ANSWER_MARKER not in self.text:
            raise ValueError("prompt lacks an Answer: marker")


def _finish(text: str, adapter: TokenizerAdapter) -> PromptText:
    # byte offset of the final marker
    offset = len(text[: text.rindex(ANSWER_MARKER)].encode("utf-8"))
    return PromptText(text=text, token_count=adapter.count(text), answer_marker_offset=offset)


def _feature_pairs(features: Sequence[float], schema: FeatureSchema) -> list[str]:
    if len(features) != len(schema):
        raise ValueError(f"record has {len(features)} features, schema expects {len(schema)}")
    return [
        f"{name} = {format_value(v)}"
        for name, v in zip(schema.display_names, features)
    ]


def render_training_prompt(
    record: FlowRecord,
    schema: FeatureSchema,
    class_list: Sequence[str],
    label: str | None = None,
    adapter: TokenizerAdapter = DEFAULT_TOKENIZER,
    budget: int = TRAINING_BUDGET,
) -> PromptText:
    """Supervised prompt when label is given, inference prompt otherwise.

    Over-budget prompts drop trailing feature pairs before failing.
    """
    if label is not None and label not in class_list:
        raise ValueError(f"label {label!r} not in class list")
    pairs = _feature_pairs(record.features, schema)
    classes = ", ".join(class_list)
    tail = f"{ANSWER_MARKER} {label}" if label is not None else ANSWER_MARKER
    while True:
        text = (
            f"{TASK_LINE}\n"
            f"Input Features: {{{'; '.join(pairs)}}}\n"
            f"Possible Classes: [{classes}]\n"
            f"{tail}"
        )
        if adapter.count(text) <= budget:
            return _finish(text, adapter)
        if not pairs:
            raise BudgetError(
                f"training prompt exceeds {budget} tokens even with no features"
            )
        pairs.pop()


def render_rag_prompt(
    query: FlowRecord,
    exemplars: Sequence[tuple[Sequence[float], str]],
    schema: FeatureSchema,
    adapter: TokenizerAdapter = DEFAULT_TOKENIZER,
    budget: int = RAG_BUDGET,
) -> PromptText:
    """Retrieval-augmented prompt: exemplars, task line, candidate classes, query.

    Candidate classes are the retained exemplars' labels, deduplicated in
    first-appearance order. Exemplars are dropped last-first when over budget.
    """
    if not 1 <= len(exemplars) <= 3:
        raise ValueError(f"need 1..3 exemplars, got {len(exemplars)}")
    kept = list(exemplars)
    query_pairs = "; ".join(_feature_pairs(query.features, schema))
    while kept:
        blocks = []
        for feats, lbl in kept:
            feats = feats.features if hasattr(feats, "features") else feats
            blocks.append(
                f"Input: {{{'; '.join(_feature_pairs(feats, schema))}}}\n{ANSWER_MARKER} {lbl}"
            )
        classes: list[str] = []
        for _, lbl in kept:
            if lbl not in classes:
                classes.append(lbl)
        text = (
            "Retrieved Examples:\n"
            + "\n".join(blocks)
            + f"\n{TASK_LINE}\n"
            + f"Possible Classes: [{', '.join(classes)}]\n"
            + f"Example Input: {{{query_pairs}}}\n"
            + ANSWER_MARKER
        )
        if adapter.count(text) <= budget:
            return _finish(text, adapter)
        kept.pop()
    raise BudgetError(f"RAG prompt exceeds {budget} tokens with zero exemplars remaining")


def extract_answer(generated: str, class_list: Iterable[str]) -> str:
    """Parse the class name after the last "Answer:" marker.

    Exact match first, then the longest class name that prefixes the text;
    anything else is "unmatched" (a valid, wrong prediction).
    """
    idx = generated.rfind(ANSWER_MARKER)
    tail = generated[idx + len(ANSWER_MARKER):] if idx >= 0 else generated
    tail = re.sub(r"\s+", " ", tail).strip().lower()
    classes = list(class_list)
    if tail in classes:
        return tail
    best = ""
    for cls in classes:
        if tail.startswith(cls) and len(cls) > len(best):
            best = cls
    return best or "unmatched"


def class_list_id(class_list: Sequence[str]) -> str:
    """Stable id for a class ordering, embedded in prompt exports."""
    return hashlib.sha256("\x1f".join(class_list).encode("utf-8")).hexdigest()[:12]


def export_prompts_jsonl(
    items: Iterable[tuple[FlowRecord, str]],
    schema: FeatureSchema,
    class_list: Sequence[str],
    path: str | Path,
    adapter: TokenizerAdapter = DEFAULT_TOKENIZER,
    meta: dict | None = None,
) -> int:
    """Write {prompt, label, split, class_list_id} lines; returns line count.

    This JSONL is the hand-off format consumed by the fine-tuning harness.
    """
    cid = class_list_id(class_list)
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for record, split in items:
            prompt = render_training_prompt(
                record, schema, class_list, label=record.label, adapter=adapter
            )
            fh.write(
                json.dumps(
                    {
                        "prompt": prompt.text,
                        "label": record.label,
                        "split": split,
                        "class_list_id": cid,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            n += 1
    return n
