"""Corpus ingestion, time batching and sparse TF-IDF featurization.

Documents arrive as JSON Lines with pre-extracted token, lemma and entity
annotations for title and body. Each document is represented by nine sparse
bag-of-words sub-vectors, one per (section, field) combination: sections are
title, body and their concatenation; fields are tokens, lemmas and entities.
Slot order is row-major with section outer and field inner, so slot 0 is
(title, tokens) and slot 8 is (title+body, entities). That order is fixed:
learned per-slot weights index into it.

Sub-vector weights are tf * idf with tf the raw in-section count and
idf = ln((1 + N) / (1 + df)) + 1, then L2-normalized per sub-vector.
Document frequencies are kept per language and accumulate over the stream
with no decay. A document is featurized once, with the statistics as of the
end of its own batch, and its vectors are never recomputed afterwards, which
keeps story centroids comparable across batches.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Iterator, Sequence

from .errors import CorpusParseError, ValidationError

LANGUAGES = ("en", "es", "de")
FIELDS = ("tokens", "lemmas", "entities")
SECTIONS = ("title", "body", "title_body")
NUM_SLOTS = len(SECTIONS) * len(FIELDS)

SparseVector = dict  # term -> non-negative finite weight, no explicit zeros


def slot_index(section: str, fld: str) -> int:
    """Flat index of a (section, field) sub-vector slot."""
    return SECTIONS.index(section) * len(FIELDS) + FIELDS.index(fld)


SLOT_NAMES = tuple(f"{s}/{f}" for s in SECTIONS for f in FIELDS)


@dataclass(frozen=True)
class Section:
    tokens: tuple = ()
    lemmas: tuple = ()
    entities: tuple = ()

    def field(self, name: str) -> tuple:
        return getattr(self, name)


@dataclass(frozen=True)
class Document:
    id: str
    timestamp: float  # seconds since epoch, UTC
    language: str
    title: Section
    body: Section
    gold_story: str | None = None


@dataclass(frozen=True)
class Batch:
    index: int
    start: float
    end: float
    documents: tuple = ()

    def __len__(self) -> int:
        return len(self.documents)


class DfTable:
    """Streaming per-language document frequencies, one map per field kind."""

    def __init__(self, language: str):
        if language not in LANGUAGES:
            raise ValidationError(f"unsupported language {language!r}")
        self.language = language
        self.counts = {f: {} for f in FIELDS}
        self.total_docs = 0

    def df(self, fld: str, term: str) -> int:
        return self.counts[fld].get(term, 0)


@dataclass(frozen=True)
class FeatureSet:
    """The nine sparse sub-vectors of a document or story centroid."""

    vectors: tuple  # NUM_SLOTS sparse vectors
    norms: tuple  # precomputed L2 norms, one per slot

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseVector]) -> "FeatureSet":
        if len(vectors) != NUM_SLOTS:
            raise ValidationError(f"expected {NUM_SLOTS} sub-vectors, got {len(vectors)}")
        vecs = tuple(dict(v) for v in vectors)
        norms = tuple(math.sqrt(sum(w * w for w in v.values())) for v in vecs)
        return cls(vecs, norms)

    @classmethod
    def empty(cls) -> "FeatureSet":
        return cls.from_vectors([{} for _ in range(NUM_SLOTS)])


def parse_corpus(stream: Iterable | IO) -> list:
    """Parse a JSON Lines corpus into documents, preserving input order.

    Each line must carry id, date (ISO-8601), lang and annotated title/body
    sections; a "cluster" key, when present, becomes the gold story label.
    Malformed lines raise CorpusParseError with the 1-based line number.
    """
    documents = []
    seen_ids = set()
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusParseError(lineno, f"not valid UTF-8: {exc}") from exc
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(lineno, f"invalid JSON: {exc.msg}") from exc
        documents.append(_document_from_record(record, lineno, seen_ids))
    return documents


def load_corpus(path) -> list:
    with open(path, "rb") as handle:
        return parse_corpus(handle)


def _document_from_record(record, lineno: int, seen_ids: set) -> Document:
    if not isinstance(record, dict):
        raise CorpusParseError(lineno, "record is not a JSON object")
    for key in ("id", "date", "lang", "title", "body"):
        if key not in record:
            raise CorpusParseError(lineno, f"missing required field {key!r}")
    doc_id = str(record["id"])
    if doc_id in seen_ids:
        raise CorpusParseError(lineno, f"duplicate document id {doc_id!r}")
    seen_ids.add(doc_id)
    lang = record["lang"]
    if lang not in LANGUAGES:
        raise CorpusParseError(lineno, f"unknown language code {lang!r}")
    timestamp = _parse_timestamp(record["date"], lineno)
    title = _parse_section(record["title"], "title", lineno)
    body = _parse_section(record["body"], "body", lineno)
    gold = record.get("cluster")
    if gold is not None:
        gold = str(gold)
    return Document(doc_id, timestamp, lang, title, body, gold)


def _parse_timestamp(value, lineno: int) -> float:
    if not isinstance(value, str):
        raise CorpusParseError(lineno, f"date must be an ISO-8601 string, got {value!r}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise CorpusParseError(lineno, f"bad date {value!r}: {exc}") from exc
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.timestamp()


def _parse_section(value, name: str, lineno: int) -> Section:
    if not isinstance(value, dict):
        raise CorpusParseError(lineno, f"{name} must be an object")
    lists = []
    for fld in FIELDS:
        if fld not in value:
            raise CorpusParseError(lineno, f"{name} is missing the {fld!r} list")
        items = value[fld]
        if not isinstance(items, list) or any(not isinstance(x, str) for x in items):
            raise CorpusParseError(lineno, f"{name}.{fld} must be a list of strings")
        lists.append(tuple(items))
    return Section(*lists)


def make_batches(documents: Sequence, window_seconds: float) -> list:
    """Bucket documents into fixed, contiguous time windows.

    Windows are anchored at the earliest timestamp; a document at time ts
    falls into window floor((ts - t0) / window). Empty windows produce no
    Batch, but indices keep advancing with time so recency arithmetic stays
    meaningful across quiet periods.
    """
    if window_seconds <= 0:
        raise ValidationError(f"window length must be positive, got {window_seconds}")
    if not documents:
        return []
    order = sorted(range(len(documents)), key=lambda i: (documents[i].timestamp, i))
    t0 = documents[order[0]].timestamp
    buckets = {}
    for i in order:
        idx = int((documents[i].timestamp - t0) // window_seconds)
        buckets.setdefault(idx, []).append(documents[i])
    return [
        Batch(
            index=idx,
            start=t0 + idx * window_seconds,
            end=t0 + (idx + 1) * window_seconds,
            documents=tuple(buckets[idx]),
        )
        for idx in sorted(buckets)
    ]


def update_df(df: DfTable, documents: Sequence) -> DfTable:
    """Fold a batch of same-language documents into the frequency table.

    Each term counts once per document per field kind, over the union of its
    title and body occurrences. Call this exactly once per original document;
    replayed documents are never re-ingested.
    """
    for doc in documents:
        if doc.language != df.language:
            raise ValidationError(
                f"document {doc.id!r} is {doc.language!r}, table is {df.language!r}"
            )
    for doc in documents:
        for fld in FIELDS:
            bucket = df.counts[fld]
            for term in set(doc.title.field(fld)) | set(doc.body.field(fld)):
                bucket[term] = bucket.get(term, 0) + 1
        df.total_docs += 1
    return df


def featurize(doc: Document, df: DfTable) -> FeatureSet:
    """Build the nine L2-normalized tf-idf sub-vectors of one document.

    The frequency table must reflect the stream state at the end of the
    document's batch. Terms absent from the table get df = 0. Deterministic:
    identical inputs yield bit-identical vectors.
    """
    total = df.total_docs
    vectors = []
    for section in SECTIONS:
        for fld in FIELDS:
            if section == "title_body":
                terms = doc.title.field(fld) + doc.body.field(fld)
            elif section == "title":
                terms = doc.title.field(fld)
            else:
                terms = doc.body.field(fld)
            if not terms:
                vectors.append({})
                continue
            counts = Counter(terms)
            vec = {}
            for term, tf in counts.items():
                idf = math.log((1.0 + total) / (1.0 + df.df(fld, term))) + 1.0
                vec[term] = tf * idf
            norm = math.sqrt(sum(w * w for w in vec.values()))
            for term in vec:
                vec[term] /= norm
            vectors.append(vec)
    return FeatureSet.from_vectors(vectors)


def mean_features(feature_sets: Sequence[FeatureSet]) -> FeatureSet:
    """Slot-wise arithmetic mean, the centroid of a set of feature sets."""
    if not feature_sets:
        raise ValidationError("cannot average an empty set of feature sets")
    n = len(feature_sets)
    vectors = []
    for k in range(NUM_SLOTS):
        acc = {}
        for fs in feature_sets:
            for term, w in fs.vectors[k].items():
                acc[term] = acc.get(term, 0.0) + w
        vectors.append({term: w / n for term, w in acc.items()})
    return FeatureSet.from_vectors(vectors)


def stream_featurized_batches(
    documents: Sequence, window_seconds: float
) -> Iterator[tuple]:
    """Yield (batch, features_by_doc_id) with frequencies updated per batch.

    Frequency tables are advanced with the whole batch before any of its
    documents is featurized, so every vector sees the end-of-batch state.
    """
    tables = {}
    for batch in make_batches(documents, window_seconds):
        grouped = {}
        for doc in batch.documents:
            grouped.setdefault(doc.language, []).append(doc)
        for lang, docs in grouped.items():
            if lang not in tables:
                tables[lang] = DfTable(lang)
            update_df(tables[lang], docs)
        features = {doc.id: featurize(doc, tables[doc.language]) for doc in batch.documents}
        yield batch, features
