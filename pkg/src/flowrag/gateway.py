"""Completion-endpoint client, deterministic mock model, and the
classification loops (direct and retrieval-augmented).

Wire protocol: POST a JSON object {model, prompt, max_tokens, temperature,
stop} to the configured URL; the response is a JSON object {text}.
"""

from __future__ import annotations

import json
import re
import time
import uuid
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np
import requests

from .errors import (
    EndpointStatusError,
    EndpointTimeout,
    MalformedResponse,
    RetryExhausted,
)
from .features import Standardizer
from .ingest import FlowRecord
from .kb import KnowledgeBase, retrieve, select_exemplars
from .prompts import (
    ANSWER_MARKER,
    DEFAULT_TOKENIZER,
    GenSettings,
    PromptText,
    TokenizerAdapter,
    extract_answer,
    render_rag_prompt,
    render_training_prompt,
)
from .schema import FeatureSchema

MOCK_MODES = ("first-exemplar", "majority-exemplar", "fixed-label")


class Completer(Protocol):
    def complete(self, prompt: PromptText, gen: GenSettings) -> str: ...


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_id: str = "default"
    timeout: float = 30.0
    max_concurrent: int = 4
    retries: int = 3
    auth_token: str | None = None
    backoff_base: float = 0.1

    def __post_init__(self):
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class HttpCompleter:
    """Requests-based client with exponential backoff on transient failures."""

    def __init__(self, cfg: EndpointConfig, sleep: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        self._sleep = sleep
        self._session = requests.Session()

    def complete(self, prompt: PromptText, gen: GenSettings) -> str:
        request_id = uuid.uuid4().hex
        payload = {
            "model": self.cfg.model_id,
            "prompt": prompt.text,
            "max_tokens": gen.max_new_tokens,
            "temperature": gen.temperature,
            "stop": list(gen.stop_sequences),
        }
        headers = {"Content-Type": "application/json", "X-Request-ID": request_id}
        if self.cfg.auth_token:
            headers["Authorization"] = f"Bearer {self.cfg.auth_token}"
        last_error = None
        for attempt in range(self.cfg.retries + 1):
            if attempt:
                self._sleep(self.cfg.backoff_base * 2 ** (attempt - 1))
            try:
                resp = self._session.post(
                    self.cfg.base_url,
                    data=json.dumps(payload),
                    headers=headers,
                    timeout=self.cfg.timeout,
                )
            except requests.Timeout:
                last_error = EndpointTimeout(
                    f"request {request_id} timed out after {self.cfg.timeout}s", request_id
                )
                continue
            except requests.ConnectionError as exc:
                last_error = EndpointTimeout(f"request {request_id}: {exc}", request_id)
                continue
            if 500 <= resp.status_code < 600:
                last_error = EndpointStatusError(
                    f"request {request_id}: server error {resp.status_code}",
                    resp.status_code,
                    request_id,
                )
                continue
            if resp.status_code != 200:
                raise EndpointStatusError(
                    f"request {request_id}: status {resp.status_code}",
                    resp.status_code,
                    request_id,
                )
            try:
                body = resp.json()
                return body["text"]
            except (ValueError, KeyError, TypeError):
                raise MalformedResponse(
                    f"request {request_id}: response lacks a 'text' field", request_id
                ) from None
        raise RetryExhausted(
            f"request {request_id}: retries exhausted ({self.cfg.retries + 1} attempts): "
            f"{last_error}",
            request_id,
        )


_EXEMPLAR_ANSWER_RE = re.compile(r"Answer:[ \t]*(\S[^\n]*)")


class MockCompleter:
    """Deterministic stand-in for a fine-tuned model.

    Modes: first-exemplar echoes the first exemplar's label from the prompt,
    majority-exemplar the most frequent (first-appearance tie-break),
    fixed-label a constant.
    """

    def __init__(self, mode: str, label: str = "benign"):
        if mode not in MOCK_MODES:
            raise ValueError(f"unknown mock mode {mode!r}; expected one of {MOCK_MODES}")
        self.mode = mode
        self.label = label

    def complete(self, prompt: PromptText, gen: GenSettings) -> str:
        if self.mode == "fixed-label":
            return f" {self.label}"
        labels = [m.group(1).strip() for m in _EXEMPLAR_ANSWER_RE.finditer(prompt.text)]
        if not labels:
            return ""
        if self.mode == "first-exemplar":
            return f" {labels[0]}"
        counts = Counter(labels)
        best = max(counts.values())
        for lbl in labels:  # first-appearance order among tied labels
            if counts[lbl] == best:
                return f" {lbl}"
        return ""


def classify_direct(
    record: FlowRecord,
    class_list: Sequence[str],
    completer: Completer,
    schema: FeatureSchema,
    gen: GenSettings = GenSettings(),
    adapter: TokenizerAdapter = DEFAULT_TOKENIZER,
    budget: int | None = None,
) -> str:
    from .prompts import TRAINING_BUDGET

    prompt = render_training_prompt(
        record, schema, class_list, label=None, adapter=adapter,
        budget=budget if budget is not None else TRAINING_BUDGET,
    )
    generated = completer.complete(prompt, gen)
    return extract_answer(prompt.text + generated, class_list)


@dataclass
class Prediction:
    record_id: str
    gold: str
    predicted: str
    similarity_top1: float | None = None
    exemplar_labels: list[str] | None = None
    latency_ms: float = 0.0
    reason: str = "ok"

    def to_json(self) -> str:
        return json.dumps(
            {
                "record_id": self.record_id,
                "gold": self.gold,
                "predicted": self.predicted,
                "similarity_top1": self.similarity_top1,
                "exemplar_labels": self.exemplar_labels,
                "latency_ms": self.latency_ms,
                "reason": self.reason,
            },
            sort_keys=True,
        )


def classify_rag(
    record: FlowRecord,
    kb: KnowledgeBase,
    completer: Completer,
    schema: FeatureSchema,
    stats: Standardizer,
    k: int = 20,
    m: int = 3,
    gen: GenSettings = GenSettings(),
    adapter: TokenizerAdapter = DEFAULT_TOKENIZER,
    budget: int | None = None,
) -> Prediction:
    """standardize -> retrieve -> exemplars -> RAG prompt -> complete -> extract."""
    from .prompts import RAG_BUDGET

    query = stats.transform(np.asarray(record.features, dtype=np.float64))
    hits = select_exemplars(retrieve(kb, query, k=min(k, len(kb))), m=min(m, len(kb)))
    exemplars = [(kb.raw_vectors[h.index], h.label) for h in hits]
    prompt = render_rag_prompt(
        record, exemplars, schema, adapter=adapter,
        budget=budget if budget is not None else RAG_BUDGET,
    )
    generated = completer.complete(prompt, gen)
    predicted = extract_answer(prompt.text + generated, [h.label for h in hits])
    return Prediction(
        record_id=f"{record.source}:{record.row}",
        gold=record.label,
        predicted=predicted,
        similarity_top1=hits[0].similarity,
        exemplar_labels=[h.label for h in hits],
        reason="ok" if predicted != "unmatched" else "unmatched",
    )


def _record_id(record: FlowRecord) -> str:
    return f"{record.source}:{record.row}"


def classify_batch(
    records: Sequence[FlowRecord],
    classify_one: Callable[[FlowRecord], Prediction],
    max_concurrent: int = 1,
    measure_latency: bool = True,
) -> list[Prediction]:
    """Run classification with bounded concurrency, preserving input order.

    Endpoint failures become reason-coded predictions instead of aborting
    the batch. With measure_latency off (mock mode) latency is pinned to 0
    so outputs stay byte-identical across runs.
    """

    def run(record: FlowRecord) -> Prediction:
        start = time.perf_counter()
        try:
            pred = classify_one(record)
        except (EndpointTimeout, EndpointStatusError, MalformedResponse, RetryExhausted) as exc:
            pred = Prediction(
                record_id=_record_id(record),
                gold=record.label,
                predicted="unmatched",
                reason=f"endpoint_error:{type(exc).__name__}",
            )
        if measure_latency:
            pred.latency_ms = (time.perf_counter() - start) * 1000.0
        return pred

    if max_concurrent <= 1:
        return [run(r) for r in records]
    with ThreadPoolExecutor(max_workers=max_concurrent) as pool:
        return list(pool.map(run, records))


def write_predictions(
    predictions: Iterable[Prediction], path: str | Path, meta: dict | None = None
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for pred in predictions:
            fh.write(pred.to_json() + "\n")


def read_predictions(path: str | Path) -> tuple[dict, list[Prediction]]:
    meta: dict = {}
    preds: list[Prediction] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "meta" in obj and "record_id" not in obj:
                meta = obj["meta"]
                continue
            preds.append(
                Prediction(
                    record_id=obj["record_id"],
                    gold=obj["gold"],
                    predicted=obj["predicted"],
                    similarity_top1=obj.get("similarity_top1"),
                    exemplar_labels=obj.get("exemplar_labels"),
                    latency_ms=obj.get("latency_ms", 0.0),
                    reason=obj.get("reason", "ok"),
                )
            )
    return meta, preds
