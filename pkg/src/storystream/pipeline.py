"""End-to-end orchestration: stream processing, outputs, tuning, evaluation.

The stream loop is strictly sequential over batches. Within a batch the
frequency tables are advanced first, every document is featurized against
the end-of-batch state, each language registry advances independently, and
(when embeddings are available) one crosslingual linking round runs. All
randomness is derived from the run seed, so identical configuration and
inputs reproduce identical output bytes.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import time
from dataclasses import replace
from typing import Mapping, Sequence

from .config import RunConfig
from .corpus import DfTable, featurize, load_corpus, make_batches, update_df
from .crosslink import (
    CrosslinkConfig,
    EmbeddingStore,
    MultilingualRegistry,
    finalize_links,
    link_stories,
)
from .errors import InputError, ValidationError
from .metrics import EvaluationReport, report
from .similarity import load_weights
from .stories import MERGED, ReplayConfig, StoryRegistry, advance, replay_stats

log = logging.getLogger("storystream")

LANG_ORDER = ("en", "es", "de")


def derive_seed(base: int, *parts) -> int:
    """Stable sub-seed for one pipeline step; immune to hash randomization."""
    digest = hashlib.sha256(repr((base,) + parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def run_stream(
    documents: Sequence,
    weights_by_lang: Mapping,
    cfg: RunConfig,
    embeddings: EmbeddingStore | None = None,
):
    """Process a document stream; returns (registries, ml_registry or None)."""
    registries = {}
    tables = {}
    replay_cfg = ReplayConfig(cfg.t1(), cfg.replay_recency)
    cross_cfg = CrosslinkConfig(cfg.t2, cfg.max_age)
    ml_registry = MultilingualRegistry() if embeddings is not None else None

    last_batch = -1
    for batch in make_batches(documents, cfg.window_seconds):
        started = time.perf_counter()
        grouped = {}
        for doc in batch.documents:
            grouped.setdefault(doc.language, []).append(doc)
        for lang in LANG_ORDER:
            if lang in grouped:
                if lang not in tables:
                    tables[lang] = DfTable(lang)
                update_df(tables[lang], grouped[lang])
        features = {
            doc.id: featurize(doc, tables[doc.language]) for doc in batch.documents
        }
        for lang in LANG_ORDER:
            if lang not in grouped:
                continue
            if lang not in weights_by_lang:
                raise ValidationError(f"no weights available for language {lang!r}")
            if lang not in registries:
                registries[lang] = StoryRegistry(lang)
            _, lineage = advance(
                registries[lang],
                batch.index,
                grouped[lang],
                features,
                weights_by_lang[lang],
                replay_cfg,
                cfg.gamma,
                cfg.prune_epsilon,
                derive_seed(cfg.seed, "louvain", batch.index, lang),
            )
            if ml_registry is not None:
                for event in lineage.events:
                    if event.kind == MERGED:
                        ml_registry.note_merge(event.story, event.source)
        if ml_registry is not None:
            link_stories(registries, ml_registry, embeddings, cross_cfg, batch.index)
        last_batch = batch.index
        stats = replay_stats(registries)
        log.info(
            "batch %d: %d docs, %.3fs, replay rate %.4f",
            batch.index,
            len(batch.documents),
            time.perf_counter() - started,
            stats["replay_rate"],
        )
    if ml_registry is not None and last_batch >= 0:
        finalize_links(registries, ml_registry, last_batch)
    return registries, ml_registry


def final_assignments(
    documents: Sequence,
    registries: Mapping,
    ml_registry: MultilingualRegistry | None = None,
) -> list:
    """Rows of {"id", "story"[, "multilingual_story"]} in corpus order."""
    story_of = {}
    for registry in registries.values():
        story_of.update(registry.assignments())
    ml_of = ml_registry.assignments(registries) if ml_registry is not None else None
    rows = []
    for doc in documents:
        row = {"id": doc.id, "story": story_of[doc.id]}
        if ml_of is not None:
            row["multilingual_story"] = ml_of[doc.id]
        rows.append(row)
    return rows


def monolingual_report(documents: Sequence, assignment_rows: Sequence) -> EvaluationReport:
    """Score monolingual story assignments against gold labels.

    The overall block treats each (language, gold label) combination as its
    own gold cluster, which keeps cross-language pairs out of a monolingual
    comparison while still aggregating over all documents.
    """
    gold = _gold_clusters(documents)
    languages = {doc.id: doc.language for doc in documents}
    pred = {row["id"]: row["story"] for row in assignment_rows}
    scoped_gold = {
        doc.id: f"{doc.language}:{gold[doc.id]}" for doc in documents
    }
    return report(pred, scoped_gold, languages)


def crosslingual_report(documents: Sequence, assignment_rows: Sequence) -> EvaluationReport:
    gold = _gold_clusters(documents)
    pred = {}
    for row in assignment_rows:
        if "multilingual_story" not in row:
            raise ValidationError("assignments carry no multilingual story column")
        pred[row["id"]] = row["multilingual_story"]
    languages = {doc.id: doc.language for doc in documents}
    return report(pred, gold, languages)


def _gold_clusters(documents: Sequence) -> dict:
    missing = [doc.id for doc in documents if doc.gold_story is None]
    if missing:
        raise ValidationError(
            f"corpus lacks gold labels for {len(missing)} documents, e.g. {missing[:3]}"
        )
    return {doc.id: doc.gold_story for doc in documents}


def run_pipeline(cfg: RunConfig, evaluate: bool = False) -> dict:
    """Execute a full run from files to files; returns the stats payload."""
    cfg.validate()
    if not cfg.corpus:
        raise ValidationError("no corpus path configured")
    if not cfg.weights:
        raise ValidationError("no weights path configured")
    try:
        documents = load_corpus(cfg.corpus)
    except OSError as exc:
        raise InputError(f"cannot read corpus {cfg.corpus}: {exc}") from exc
    weights = _load_weights_file(cfg.weights)
    embeddings = None
    if cfg.embeddings:
        embeddings = EmbeddingStore.load(cfg.embeddings)

    registries, ml_registry = run_stream(documents, weights, cfg, embeddings)
    rows = final_assignments(documents, registries, ml_registry)

    stats = replay_stats(registries)
    if ml_registry is not None:
        stats["multilingual_stories"] = len(ml_registry.stories)
        stats["ml_conflicts"] = ml_registry.conflicts

    if cfg.assignments:
        _write_jsonl(cfg.assignments, rows)
    if cfg.stats:
        with open(cfg.stats, "w", encoding="utf-8") as handle:
            handle.write(json.dumps(stats) + "\n")
    if evaluate:
        payload = {"monolingual": monolingual_report(documents, rows).as_dict()}
        if ml_registry is not None:
            payload["crosslingual"] = crosslingual_report(documents, rows).as_dict()
        if cfg.report:
            with open(cfg.report, "w", encoding="utf-8") as handle:
                handle.write(json.dumps(payload, indent=2) + "\n")
        stats["evaluation"] = payload
    return stats


def _load_weights_file(path) -> dict:
    try:
        return load_weights(path)
    except OSError as exc:
        raise InputError(f"cannot read weights {path}: {exc}") from exc


def _write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")


def grid_search(
    documents: Sequence,
    weights_by_lang: Mapping,
    grid: Mapping,
    base_cfg: RunConfig,
    embeddings: EmbeddingStore | None = None,
    crosslingual: bool = False,
):
    """Exhaustive search maximizing (standard F1 + BCubed F1) / 2.

    The grid maps config field names to candidate values; the meta key "t1"
    fans out to all three per-language thresholds. Monolingual objectives
    average the per-language scores; with crosslingual=True the objective is
    computed on the multilingual clustering instead (embeddings required).
    Ties prefer fewer predicted clusters, then lower thresholds, then the
    earlier grid point. Returns (best config, score table).
    """
    if not grid:
        raise ValidationError("empty parameter grid")
    if crosslingual and embeddings is None:
        raise ValidationError("crosslingual tuning needs an embedding store")
    _gold_clusters(documents)

    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys)))
    table = []
    best = None
    for index, combo in enumerate(combos):
        point = dict(zip(keys, combo))
        expanded = {}
        for key, value in point.items():
            if key == "t1":
                expanded.update({"t1_en": value, "t1_es": value, "t1_de": value})
            else:
                expanded[key] = value
        cfg = replace(base_cfg, **expanded).validate()
        registries, ml_registry = run_stream(
            documents, weights_by_lang, cfg, embeddings if crosslingual else None
        )
        rows = final_assignments(documents, registries, ml_registry)
        if crosslingual:
            rep = crosslingual_report(documents, rows)
            objective = (rep.pairwise.f1 + rep.bcubed.f1) / 2.0
            clusters = rep.pred_clusters
            entry_scores = {"overall": rep.as_dict()}
        else:
            rep = monolingual_report(documents, rows)
            per_lang = rep.by_language or {}
            objective = (
                sum((r.pairwise.f1 + r.bcubed.f1) / 2.0 for r in per_lang.values())
                / len(per_lang)
                if per_lang
                else (rep.pairwise.f1 + rep.bcubed.f1) / 2.0
            )
            clusters = sum(r.pred_clusters for r in per_lang.values()) or rep.pred_clusters
            entry_scores = {"overall": rep.as_dict()}
        t1_total = cfg.t1_en + cfg.t1_es + cfg.t1_de
        entry = {
            "params": point,
            "objective": objective,
            "pred_clusters": clusters,
            "scores": entry_scores,
        }
        table.append(entry)
        rank = (-objective, clusters, t1_total, index)
        if best is None or rank < best[0]:
            best = (rank, cfg)
        log.info("grid point %s -> objective %.4f", point, objective)
    return best[1], table
