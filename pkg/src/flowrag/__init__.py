"""flowrag: IoT network-flow attack classification pipeline.

Structured flow records are serialized to text prompts, classified by a
completion model (or a deterministic mock) with cosine-retrieval support for
unseen classes, and scored with per-class precision/recall/F1 reports.
"""

__version__ = "0.1.0"

from .baselines import ScratchLogisticRegression, ScratchRandomForest
from .features import Standardizer, format_value, pearson_matrix, prune_correlated
from .gateway import EndpointConfig, HttpCompleter, MockCompleter, classify_direct, classify_rag
from .ingest import FlowRecord, SplitSpec, SplitSet, make_splits, parse_flow_csv
from .kb import KnowledgeBase, build_kb, cosine, retrieve, select_exemplars, top3_recall
from .labels import SEEN_CLASSES, UNSEEN_CLASSES, LabelMap, standardize_label
from .prompts import (
    GenSettings,
    PromptText,
    extract_answer,
    render_rag_prompt,
    render_training_prompt,
)
from .report import ClassificationReport, classification_report, emit_report, time_block
from .schema import FeatureSchema, canonical_schema

__all__ = [
    "ClassificationReport",
    "EndpointConfig",
    "FeatureSchema",
    "FlowRecord",
    "GenSettings",
    "HttpCompleter",
    "KnowledgeBase",
    "LabelMap",
    "MockCompleter",
    "PromptText",
    "ScratchLogisticRegression",
    "ScratchRandomForest",
    "SEEN_CLASSES",
    "SplitSet",
    "SplitSpec",
    "Standardizer",
    "UNSEEN_CLASSES",
    "build_kb",
    "canonical_schema",
    "classification_report",
    "classify_direct",
    "classify_rag",
    "cosine",
    "emit_report",
    "extract_answer",
    "format_value",
    "make_splits",
    "parse_flow_csv",
    "pearson_matrix",
    "prune_correlated",
    "render_rag_prompt",
    "render_training_prompt",
    "retrieve",
    "select_exemplars",
    "standardize_label",
    "time_block",
    "top3_recall",
]
