"""Operator CLI: config-driven subcommands covering the whole pipeline.

Every artifact embeds the producing config hash; downstream subcommands
refuse inputs whose hash differs from the active config. Exit codes:
0 ok, 2 config error, 3 data error, 4 endpoint error, 5 budget violation.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .baselines import ScratchLogisticRegression, ScratchRandomForest, load_model
from .errors import BudgetError, ConfigError, DataError, EndpointError
from .features import Standardizer, pearson_matrix, prune_correlated, to_matrix
from .gateway import (
    EndpointConfig,
    GenSettings,
    HttpCompleter,
    MockCompleter,
    Prediction,
    classify_batch,
    classify_direct,
    classify_rag,
    read_predictions,
    write_predictions,
)
from .ingest import SplitSpec, apply_manifest, make_splits, parse_flow_csv, split_manifest
from .kb import build_kb, load_kb, save_kb, top3_recall
from .labels import DEFAULT_LABEL_MAP
from .prompts import DEFAULT_TOKENIZER, RAG_BUDGET, TRAINING_BUDGET, export_prompts_jsonl
from .report import classification_report, emit_report
from .schema import FeatureSchema, canonical_schema

AUTH_TOKEN_ENV = "FLOWRAG_AUTH_TOKEN"


@dataclass
class PipelineConfig:
    data_csv: list[str]
    output_dir: str
    seed: int = 0
    split: SplitSpec = field(default_factory=SplitSpec)
    schema_mode: str = "canonical"  # or "auto"
    prune_threshold: float = 0.98
    tokenizer: str = "whitespace-punct"
    training_budget: int = TRAINING_BUDGET
    rag_budget: int = RAG_BUDGET
    mock: dict | None = None
    endpoint: dict | None = None
    gen: GenSettings = field(default_factory=GenSettings)
    baseline: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


def load_config(path: str) -> PipelineConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None

    def require(key, typ):
        if key not in raw:
            raise ConfigError(f"missing config field: {key}")
        if not isinstance(raw[key], typ):
            raise ConfigError(f"config field {key} has wrong type")
        return raw[key]

    data_csv = require("data_csv", list)
    output_dir = require("output_dir", str)
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("config field seed must be an integer")
    try:
        split = SplitSpec(seed=seed, **raw.get("split", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field split: {exc}") from None
    schema_cfg = raw.get("schema", {"mode": "canonical"})
    mode = schema_cfg.get("mode", "canonical")
    if mode not in ("canonical", "auto"):
        raise ConfigError(f"config field schema.mode must be canonical or auto, got {mode!r}")
    budgets = raw.get("budgets", {})
    for key in budgets:
        if budgets[key] <= 0:
            raise ConfigError(f"config field budgets.{key} must be positive")
    if ("mock" in raw) == ("endpoint" in raw):
        raise ConfigError("exactly one of config fields mock/endpoint must be set")
    gen_cfg = raw.get("gen", {})
    try:
        gen = GenSettings(
            max_new_tokens=gen_cfg.get("max_new_tokens", 6),
            temperature=gen_cfg.get("temperature", 0.0),
            stop_sequences=tuple(gen_cfg.get("stop", ["\n"])),
        )
    except ValueError as exc:
        raise ConfigError(f"config field gen: {exc}") from None
    return PipelineConfig(
        data_csv=data_csv,
        output_dir=output_dir,
        seed=seed,
        split=split,
        schema_mode=mode,
        prune_threshold=schema_cfg.get("threshold", 0.98),
        tokenizer=raw.get("tokenizer", "whitespace-punct"),
        training_budget=budgets.get("training", TRAINING_BUDGET),
        rag_budget=budgets.get("rag", RAG_BUDGET),
        mock=raw.get("mock"),
        endpoint=raw.get("endpoint"),
        gen=gen,
        baseline=raw.get("baseline", {}),
        raw=raw,
    )


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_artifact(cfg: PipelineConfig, name: str, produced_by: str) -> dict:
    path = cfg.out / name
    if not path.exists():
        raise DataError(f"missing artifact {name}; run the {produced_by!r} subcommand first")
    doc = json.loads(path.read_text())
    if doc.get("config_hash") != cfg.config_hash:
        raise DataError(
            f"artifact {name} was produced by config {doc.get('config_hash')}, "
            f"current config is {cfg.config_hash}; re-run {produced_by!r}"
        )
    return doc


def _update_run_manifest(cfg: PipelineConfig, subcommand: str, artifacts: list[str]) -> None:
    path = cfg.out / "run_manifest.json"
    doc = {"config_hash": cfg.config_hash, "seed": cfg.seed, "version": __version__, "runs": {}}
    if path.exists():
        prev = json.loads(path.read_text())
        if prev.get("config_hash") == cfg.config_hash:
            doc["runs"] = prev.get("runs", {})
    doc["runs"][subcommand] = {"artifacts": sorted(artifacts)}
    _write_json(path, doc)


def _load_records(cfg: PipelineConfig, schema: FeatureSchema):
    records = []
    for path in cfg.data_csv:
        if not Path(path).exists():
            raise DataError(f"dataset file not found: {path}")
        records.extend(parse_flow_csv(path, schema))
    if not records:
        raise DataError("no records parsed from configured data_csv files")
    return records


def _load_schema(cfg: PipelineConfig) -> FeatureSchema:
    doc = _read_artifact(cfg, "schema.json", "features")
    return FeatureSchema.from_dict(doc["schema"])


def _load_splits(cfg: PipelineConfig, schema: FeatureSchema):
    doc = _read_artifact(cfg, "splits.json", "prepare")
    return apply_manifest(_load_records(cfg, schema), doc)


def _load_stats(cfg: PipelineConfig, name: str) -> Standardizer:
    doc = _read_artifact(cfg, name, "features")
    return Standardizer.from_dict(doc["stats"])


def _completer(cfg: PipelineConfig, mock_override: str | None):
    if mock_override is not None:
        return MockCompleter(mock_override), False
    if cfg.mock is not None:
        return MockCompleter(cfg.mock.get("mode", "first-exemplar"), cfg.mock.get("label", "benign")), False
    ep = dict(cfg.endpoint or {})
    ep.setdefault("auth_token", os.environ.get(AUTH_TOKEN_ENV))
    try:
        endpoint = EndpointConfig(**ep)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field endpoint: {exc}") from None
    return HttpCompleter(endpoint), True


@click.group()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Pipeline config JSON.")
@click.pass_context
def cli(ctx, config_path):
    """Flow-classification pipeline: splits, prompts, baselines, RAG, reports."""
    ctx.obj = load_config(config_path)


@cli.command()
@click.pass_obj
def prepare(cfg: PipelineConfig):
    """Parse CSVs and write the deterministic split manifest."""
    schema = canonical_schema()
    records = _load_records(cfg, schema)
    splits = make_splits(records, cfg.split)
    doc = split_manifest(splits)
    doc["config_hash"] = cfg.config_hash
    _write_json(cfg.out / "splits.json", doc)
    _update_run_manifest(cfg, "prepare", ["splits.json"])
    click.echo(f"prepare: {sum(len(v) for v in splits.as_dict().values())} records assigned")


@cli.command()
@click.pass_obj
def features(cfg: PipelineConfig):
    """Fit standardizers (train and KB partitions) and fix the feature schema."""
    schema = canonical_schema()
    splits = _load_splits(cfg, schema)
    if cfg.schema_mode == "auto":
        corr = pearson_matrix(to_matrix(splits.train))
        kept = set(prune_correlated(corr, schema.names, cfg.prune_threshold))
        schema = FeatureSchema(
            names=schema.names,
            display_names=schema.display_names,
            selected=tuple(n in kept for n in schema.names),
        )
    stats_train = Standardizer().fit(to_matrix(splits.train))
    stats_kb = Standardizer().fit(to_matrix(splits.rag_kb))
    _write_json(cfg.out / "schema.json", {"config_hash": cfg.config_hash, "schema": schema.to_dict()})
    _write_json(
        cfg.out / "stats_train.json", {"config_hash": cfg.config_hash, "stats": stats_train.to_dict()}
    )
    _write_json(cfg.out / "stats_kb.json", {"config_hash": cfg.config_hash, "stats": stats_kb.to_dict()})
    _update_run_manifest(cfg, "features", ["schema.json", "stats_train.json", "stats_kb.json"])
    click.echo(f"features: schema has {sum(schema.selected)} selected features")


@cli.command("export-prompts")
@click.pass_obj
def export_prompts(cfg: PipelineConfig):
    """Render supervised prompts for train/val/test into JSONL."""
    schema = _load_schema(cfg)
    splits = _load_splits(cfg, schema)
    class_list = sorted(DEFAULT_LABEL_MAP.seen_classes)
    items = [
        (rec, split)
        for split in ("train", "val", "test")
        for rec in getattr(splits, split)
    ]
    path = cfg.out / "prompts.jsonl"
    n = export_prompts_jsonl(
        items, schema, class_list, path, meta={"config_hash": cfg.config_hash}
    )
    _update_run_manifest(cfg, "export-prompts", ["prompts.jsonl"])
    click.echo(f"export-prompts: wrote {n} prompts")


@cli.command("train-baseline")
@click.option("--model", "model_name", type=click.Choice(["lr", "rf"]), required=True)
@click.pass_obj
def train_baseline(cfg: PipelineConfig, model_name: str):
    """Train a from-scratch baseline on standardized vectors and report on test."""
    schema = _load_schema(cfg)
    splits = _load_splits(cfg, schema)
    stats = _load_stats(cfg, "stats_train.json")
    X_train = stats.transform(to_matrix(splits.train))
    y_train = [r.label for r in splits.train]
    params = cfg.baseline.get(model_name, {})
    if model_name == "lr":
        model = ScratchLogisticRegression(**params)
    else:
        params.setdefault("seed", cfg.seed)
        params.setdefault("n_trees", 100)
        model = ScratchRandomForest(**params)
    from .report import time_block

    with time_block(f"train-{model_name}") as t_train:
        model.fit(X_train, y_train)
    X_test = stats.transform(to_matrix(splits.test))
    with time_block(f"predict-{model_name}") as t_pred:
        preds = model.predict(X_test)
    report = classification_report(
        list(preds),
        [r.label for r in splits.test],
        sorted(DEFAULT_LABEL_MAP.seen_classes),
        runtime_seconds=t_pred.seconds,
    )
    _write_json(
        cfg.out / f"model_{model_name}.json",
        {"config_hash": cfg.config_hash, "model": model.to_dict()},
    )
    _write_json(
        cfg.out / f"baseline_report_{model_name}.json",
        {"config_hash": cfg.config_hash, "report": report.to_dict()},
    )
    _update_run_manifest(
        cfg,
        f"train-baseline-{model_name}",
        [f"model_{model_name}.json", f"baseline_report_{model_name}.json"],
    )
    click.echo(
        f"train-baseline[{model_name}]: accuracy {report.accuracy:.4f} "
        f"(train {t_train.seconds:.1f}s, predict {t_pred.seconds:.4f}s)"
    )


@cli.command("build-kb")
@click.pass_obj
def build_kb_cmd(cfg: PipelineConfig):
    """Standardize the KB partition and write the binary knowledge base."""
    schema = _load_schema(cfg)
    splits = _load_splits(cfg, schema)
    stats = _load_stats(cfg, "stats_kb.json")
    raw = to_matrix(splits.rag_kb)
    kb = build_kb(
        stats.transform(raw),
        [r.label for r in splits.rag_kb],
        stats_id=stats.stats_id,
        raw_vectors=raw,
    )
    save_kb(kb, cfg.out / "kb.bin", manifest_extra={"config_hash": cfg.config_hash})
    _update_run_manifest(cfg, "build-kb", ["kb.bin", "kb.bin.manifest.json"])
    click.echo(f"build-kb: {len(kb)} vectors, dim {kb.dim}")


@cli.command("retrieve-audit")
@click.pass_obj
def retrieve_audit(cfg: PipelineConfig):
    """Top-3 recall of the KB against the held-out unseen-class test split."""
    schema = _load_schema(cfg)
    splits = _load_splits(cfg, schema)
    stats = _load_stats(cfg, "stats_kb.json")
    kb = load_kb(cfg.out / "kb.bin")
    queries = stats.transform(to_matrix(splits.rag_test))
    report = top3_recall(kb, list(zip(queries, [r.label for r in splits.rag_test])))
    doc = {"config_hash": cfg.config_hash, "recall": report.to_dict(), "formatted": report.formatted()}
    _write_json(cfg.out / "recall.json", doc)
    _update_run_manifest(cfg, "retrieve-audit", ["recall.json"])
    click.echo(f"retrieve-audit: overall top-3 recall {report.formatted()['overall']}")


@cli.command()
@click.option("--mode", type=click.Choice(["direct", "rag"]), default="rag", show_default=True)
@click.option("--mock", "mock_override", type=click.Choice(["first-exemplar", "majority-exemplar", "fixed-label"]), default=None)
@click.pass_obj
def classify(cfg: PipelineConfig, mode: str, mock_override: str | None):
    """Classify the test split (direct) or the unseen-class split (rag)."""
    schema = _load_schema(cfg)
    splits = _load_splits(cfg, schema)
    completer, is_endpoint = _completer(cfg, mock_override)
    if mode == "rag":
        stats = _load_stats(cfg, "stats_kb.json")
        kb = load_kb(cfg.out / "kb.bin")
        records = splits.rag_test
        classes = sorted(DEFAULT_LABEL_MAP.unseen_classes)

        def one(rec):
            return classify_rag(
                rec, kb, completer, schema, stats, gen=cfg.gen, budget=cfg.rag_budget
            )

    else:
        records = splits.test
        classes = sorted(DEFAULT_LABEL_MAP.seen_classes)

        def one(rec):
            predicted = classify_direct(
                rec, classes, completer, schema, gen=cfg.gen, budget=cfg.training_budget
            )
            return Prediction(
                record_id=f"{rec.source}:{rec.row}",
                gold=rec.label,
                predicted=predicted,
                reason="ok" if predicted != "unmatched" else "unmatched",
            )

    max_concurrent = (cfg.endpoint or {}).get("max_concurrent", 1) if is_endpoint else 1
    preds = classify_batch(records, one, max_concurrent=max_concurrent, measure_latency=is_endpoint)
    write_predictions(
        preds,
        cfg.out / "predictions.jsonl",
        meta={"config_hash": cfg.config_hash, "mode": mode, "classes": classes},
    )
    _update_run_manifest(cfg, "classify", ["predictions.jsonl"])
    click.echo(f"classify[{mode}]: {len(preds)} predictions")


@cli.command()
@click.pass_obj
def evaluate(cfg: PipelineConfig):
    """Score predictions.jsonl into json/csv/markdown/plotdata reports."""
    path = cfg.out / "predictions.jsonl"
    if not path.exists():
        raise DataError("missing artifact predictions.jsonl; run the 'classify' subcommand first")
    meta, preds = read_predictions(path)
    if meta.get("config_hash") != cfg.config_hash:
        raise DataError(
            f"predictions.jsonl was produced by config {meta.get('config_hash')}, "
            f"current config is {cfg.config_hash}; re-run 'classify'"
        )
    report = classification_report(
        [p.predicted for p in preds], [p.gold for p in preds], meta["classes"]
    )
    artifacts = []
    for fmt, name in (
        ("json", "report.json"),
        ("csv", "report.csv"),
        ("markdown", "report.md"),
        ("plotdata", "report_plotdata.csv"),
    ):
        emit_report(report, fmt, cfg.out / name)
        artifacts.append(name)
    _update_run_manifest(cfg, "evaluate", artifacts)
    click.echo(f"evaluate: accuracy {report.accuracy:.4f} over {len(preds)} predictions")


@cli.command("all")
@click.option("--mock", "mock_override", type=click.Choice(["first-exemplar", "majority-exemplar", "fixed-label"]), default=None)
@click.pass_context
def run_all(ctx, mock_override):
    """prepare -> features -> export-prompts -> build-kb -> retrieve-audit -> classify -> evaluate."""
    ctx.invoke(prepare)
    ctx.invoke(features)
    ctx.invoke(export_prompts)
    ctx.invoke(build_kb_cmd)
    ctx.invoke(retrieve_audit)
    ctx.invoke(classify, mode="rag", mock_override=mock_override)
    ctx.invoke(evaluate)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.Abort:
        return 2
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 3
    except EndpointError as exc:
        click.echo(f"endpoint error: {exc}", err=True)
        return 4
    except BudgetError as exc:
        click.echo(f"budget error: {exc}", err=True)
        return 5


if __name__ == "__main__":
    sys.exit(main())
