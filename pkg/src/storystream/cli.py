"""Command line entry point.

Subcommands mirror the train / tune / run / evaluate protocol:

  synth          generate a labeled synthetic corpus and embedding file
  train-weights  fit per-language slot weights on a labeled corpus
  tune           grid search over thresholds on a labeled dev corpus
  run            process a stream end to end, optionally crosslinking
  link           crosslink an existing monolingual assignment file
  eval           score an assignment file against gold labels
  stats          descriptive corpus statistics

Exit codes: 0 success, 1 validation problem, 2 input problem, 3 broken
internal invariant.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import RunConfig, load_config_file, merge_config, save_config_file
from .corpus import LANGUAGES, load_corpus, make_batches
from .crosslink import (
    CrosslinkConfig,
    EmbeddingStore,
    MultilingualRegistry,
    finalize_links,
    link_stories,
)
from .errors import InputError, StoryStreamError, ValidationError
from .metrics import format_table
from .similarity import build_training_pairs, fit_beta, normalize_weights, save_weights
from .stories import StoryRegistry, StoryRecord
from .corpus import FeatureSet
from .synthetic import SyntheticSpec, write_synthetic

log = logging.getLogger("storystream")

_CONFIG_FLAGS = (
    ("--corpus", "corpus", str),
    ("--weights", "weights", str),
    ("--embeddings", "embeddings", str),
    ("--assignments", "assignments", str),
    ("--stats", "stats", str),
    ("--report", "report", str),
    ("--window-hours", "window_hours", float),
    ("--gamma", "gamma", float),
    ("--prune-epsilon", "prune_epsilon", float),
    ("--t1-en", "t1_en", float),
    ("--t1-es", "t1_es", float),
    ("--t1-de", "t1_de", float),
    ("--replay-recency", "replay_recency", int),
    ("--t2", "t2", float),
    ("--max-age", "max_age", int),
    ("--seed", "seed", int),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--t1", type=float, help="set all three per-language thresholds")
    for flag, dest, kind in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=None)


def _build_config(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else None
    overrides = {}
    if getattr(args, "t1", None) is not None:
        overrides.update({"t1_en": args.t1, "t1_es": args.t1, "t1_de": args.t1})
    for _, dest, _ in _CONFIG_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            overrides[dest] = value
    return merge_config(file_values, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="storystream", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled stream")
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings-out")
    p.add_argument("--stories", type=int, default=10)
    p.add_argument("--docs", type=int, default=300)
    p.add_argument("--languages", default="en,es,de")
    p.add_argument("--batches", type=int, default=5)
    p.add_argument("--story-span", type=int, default=3)
    p.add_argument("--vocabulary", type=int, default=4000)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train-weights", help="fit per-language slot weights")
    p.add_argument("--out", required=True)
    p.add_argument("--negative-ratio", type=float, default=1.0)
    p.add_argument(
        "--raw",
        action="store_true",
        help="keep raw coefficients instead of rescaling them to sum to one",
    )
    _add_config_flags(p)

    p = sub.add_parser("tune", help="grid search over thresholds on a dev corpus")
    p.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...")
    p.add_argument("--best-out", help="write the winning config file here")
    p.add_argument("--table-out", help="write the full score table (JSON) here")
    p.add_argument("--crosslingual", action="store_true")
    _add_config_flags(p)

    p = sub.add_parser("run", help="process a stream end to end")
    p.add_argument("--eval", action="store_true", dest="evaluate")
    _add_config_flags(p)

    p = sub.add_parser("link", help="crosslink an existing assignment file")
    p.add_argument("--pred", required=True, help="monolingual assignments JSONL")
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("eval", help="score an assignment file against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--crosslingual", action="store_true")
    _add_config_flags(p)

    p = sub.add_parser("stats", help="descriptive corpus statistics")
    _add_config_flags(p)
    return parser


def _cmd_synth(args) -> int:
    languages = tuple(lang.strip() for lang in args.languages.split(",") if lang.strip())
    for lang in languages:
        if lang not in LANGUAGES:
            raise ValidationError(f"unsupported language {lang!r}")
    spec = SyntheticSpec(
        stories=args.stories,
        total_docs=args.docs,
        languages=languages,
        vocabulary=args.vocabulary,
        batches=args.batches,
        story_span=args.story_span,
        embedding_dim=args.dim,
        seed=args.seed,
    )
    count = write_synthetic(spec, args.out, args.embeddings_out)
    print(f"wrote {count} documents to {args.out}")
    return 0


def _cmd_train_weights(args) -> int:
    cfg = _build_config(args)
    if not cfg.corpus:
        raise ValidationError("train-weights needs --corpus")
    documents = load_corpus(cfg.corpus)
    trained = []
    for lang in LANGUAGES:
        docs = [d for d in documents if d.language == lang]
        if not docs:
            continue
        pairs = build_training_pairs(
            docs, cfg.window_seconds, args.negative_ratio, cfg.seed
        )
        fitted = fit_beta(pairs, lang)
        trained.append(fitted if args.raw else normalize_weights(fitted))
        log.info("%s: %d pairs", lang, len(pairs))
    if not trained:
        raise ValidationError("corpus contains no documents in a supported language")
    save_weights(args.out, trained)
    print(f"wrote weights for {len(trained)} languages to {args.out}")
    return 0


def _parse_grid(items) -> dict:
    grid = {}
    for item in items:
        if "=" not in item:
            raise ValidationError(f"grid entries look like key=v1,v2 (got {item!r})")
        key, _, values = item.partition("=")
        key = key.strip().replace("-", "_")
        try:
            grid[key] = [float(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ValidationError(f"bad grid values in {item!r}") from exc
        if not grid[key]:
            raise ValidationError(f"no values for grid key {key!r}")
    return grid


def _cmd_tune(args) -> int:
    cfg = _build_config(args)
    if not cfg.corpus or not cfg.weights:
        raise ValidationError("tune needs --corpus and --weights")
    documents = load_corpus(cfg.corpus)
    weights = pipeline._load_weights_file(cfg.weights)
    embeddings = EmbeddingStore.load(cfg.embeddings) if cfg.embeddings else None
    best, table = pipeline.grid_search(
        documents, weights, _parse_grid(args.grid), cfg, embeddings, args.crosslingual
    )
    if args.table_out:
        with open(args.table_out, "w", encoding="utf-8") as handle:
            handle.write(json.dumps(table, indent=2) + "\n")
    if args.best_out:
        save_config_file(best, args.best_out)
    print(json.dumps({k: getattr(best, k) for k in ("t1_en", "t1_es", "t1_de", "gamma", "t2")}))
    return 0


def _cmd_run(args) -> int:
    cfg = _build_config(args)
    stats = pipeline.run_pipeline(cfg, evaluate=args.evaluate)
    print(json.dumps(stats))
    return 0


def _load_assignment_rows(path) -> list:
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise InputError(f"{path}:{lineno}: invalid JSON: {exc.msg}")
    except OSError as exc:
        raise InputError(f"cannot read assignments {path}: {exc}") from exc
    return rows


def _cmd_link(args) -> int:
    """Replay the per-batch crosslinking schedule over finished assignments."""
    cfg = _build_config(args)
    if not cfg.corpus or not cfg.embeddings:
        raise ValidationError("link needs --corpus and --embeddings")
    documents = load_corpus(cfg.corpus)
    rows = _load_assignment_rows(args.pred)
    story_of = {row["id"]: row["story"] for row in rows}
    missing = [d.id for d in documents if d.id not in story_of]
    if missing:
        raise ValidationError(f"assignments missing for {len(missing)} documents")
    store = EmbeddingStore.load(cfg.embeddings)

    by_doc = {doc.id: doc for doc in documents}
    registries = {}
    ml_registry = MultilingualRegistry()
    cross_cfg = CrosslinkConfig(cfg.t2, cfg.max_age)
    last_index = -1
    for batch in make_batches(documents, cfg.window_seconds):
        for doc in batch.documents:
            sid = story_of[doc.id]
            lang = doc.language
            registry = registries.setdefault(lang, StoryRegistry(lang))
            story = registry.stories.get(sid)
            if story is None:
                registry.stories[sid] = StoryRecord(
                    id=sid,
                    language=lang,
                    members=[doc.id],
                    centroid=FeatureSet.empty(),
                    created_batch=batch.index,
                    last_active=batch.index,
                )
            else:
                if by_doc[doc.id].language != story.language:
                    raise ValidationError(f"story {sid!r} mixes languages")
                story.members.append(doc.id)
                story.last_active = batch.index
        link_stories(registries, ml_registry, store, cross_cfg, batch.index)
        last_index = batch.index
    finalize_links(registries, ml_registry, last_index)

    ml_of = ml_registry.assignments(registries)
    out_rows = [
        {"id": d.id, "story": story_of[d.id], "multilingual_story": ml_of[d.id]}
        for d in documents
    ]
    pipeline._write_jsonl(args.out, out_rows)
    print(f"wrote {len(out_rows)} crosslinked assignments to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _build_config(args)
    if not cfg.corpus:
        raise ValidationError("eval needs --corpus")
    documents = load_corpus(cfg.corpus)
    rows = _load_assignment_rows(args.pred)
    if args.crosslingual:
        rep = pipeline.crosslingual_report(documents, rows)
    else:
        rep = pipeline.monolingual_report(documents, rows)
    blocks = dict(rep.by_language or {})
    blocks["all"] = rep
    print(format_table(blocks))
    if cfg.report:
        with open(cfg.report, "w", encoding="utf-8") as handle:
            handle.write(json.dumps(rep.as_dict(), indent=2) + "\n")
    return 0


def _cmd_stats(args) -> int:
    cfg = _build_config(args)
    if not cfg.corpus:
        raise ValidationError("stats needs --corpus")
    documents = load_corpus(cfg.corpus)
    payload = {"documents": len(documents), "languages": {}}
    for lang in LANGUAGES:
        docs = [d for d in documents if d.language == lang]
        if not docs:
            continue
        clusters = {}
        for d in docs:
            if d.gold_story is not None:
                clusters.setdefault(d.gold_story, 0)
                clusters[d.gold_story] += 1
        block = {"documents": len(docs)}
        if clusters:
            block["clusters"] = len(clusters)
            block["avg_cluster_size"] = round(len(docs) / len(clusters), 2)
        payload["languages"][lang] = block
    all_clusters = {d.gold_story for d in documents if d.gold_story is not None}
    if all_clusters:
        payload["clusters"] = len(all_clusters)
    print(json.dumps(payload, indent=2))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train-weights": _cmd_train_weights,
    "tune": _cmd_tune,
    "run": _cmd_run,
    "link": _cmd_link,
    "eval": _cmd_eval,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except StoryStreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
