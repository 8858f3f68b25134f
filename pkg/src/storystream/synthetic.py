"""Synthetic labeled news streams for desk-scale verification.

Each planted story owns a signature token set, disjoint from every other
story's, shared by all of its articles in every language. Articles mix
signature tokens with noise drawn from a common pool, so same-story articles
look alike and cross-story articles overlap only by accident. The matching
embedding file assigns every article its story's planted unit vector plus
bounded uniform noise. Output bytes are a pure function of the spec.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import ValidationError

DAY = 86400.0
STREAM_START = datetime(2021, 3, 1, tzinfo=timezone.utc).timestamp()


@dataclass(frozen=True)
class SyntheticSpec:
    stories: int = 10
    total_docs: int = 300
    languages: tuple = ("en", "es", "de")
    vocabulary: int = 4000
    signature_tokens: int = 12
    noise_tokens: int = 8
    batches: int = 5  # stream length in day-long windows
    story_span: int = 3  # max consecutive batches a story stays productive
    continuation_prob: float = 0.15  # chance a story runs into the next batch
    embedding_dim: int = 32
    embedding_noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.stories, self.total_docs, self.batches, self.story_span) < 1:
            raise ValidationError("story, document and batch counts must be positive")
        if not self.languages:
            raise ValidationError("need at least one language")
        if self.total_docs < self.stories * len(self.languages):
            raise ValidationError("not enough documents to cover every story and language")
        if self.vocabulary < self.stories * self.signature_tokens + self.noise_tokens:
            raise ValidationError(
                "vocabulary too small for disjoint story signatures plus noise"
            )
        if not 0.0 <= self.continuation_prob < 1.0:
            raise ValidationError("continuation probability must lie in [0, 1)")


def generate_synthetic(spec: SyntheticSpec):
    """Build (documents as JSON-ready dicts, embedding lines) for the spec.

    Documents come out sorted by timestamp. The first record of the
    embedding lines is the dimension header.
    """
    rng = random.Random(spec.seed)
    n_langs = len(spec.languages)

    vocab = [f"tok{v:05d}" for v in range(spec.vocabulary)]
    signatures = [
        vocab[k * spec.signature_tokens : (k + 1) * spec.signature_tokens]
        for k in range(spec.stories)
    ]
    noise_pool = vocab[spec.stories * spec.signature_tokens :]

    # Deterministic story size split: every story gets at least one document
    # per language, the remainder is spread by repeated random increments.
    sizes = [n_langs] * spec.stories
    for _ in range(spec.total_docs - spec.stories * n_langs):
        sizes[rng.randrange(spec.stories)] += 1

    centers = []
    for _ in range(spec.stories):
        vec = np.array([rng.gauss(0.0, 1.0) for _ in range(spec.embedding_dim)])
        centers.append(vec / np.linalg.norm(vec))

    documents = []
    embeddings = []
    for k in range(spec.stories):
        span = 1
        while span < min(spec.story_span, spec.batches) and rng.random() < spec.continuation_prob:
            span += 1
        start_batch = rng.randint(0, spec.batches - span)
        signature = signatures[k]
        for d in range(sizes[k]):
            language = spec.languages[d % n_langs]
            offset = rng.uniform(0.0, span * DAY)
            timestamp = STREAM_START + start_batch * DAY + offset
            title_toks = rng.sample(signature, min(4, len(signature)))
            body_sig = rng.sample(signature, min(spec.signature_tokens, len(signature)))
            body_noise = [rng.choice(noise_pool) for _ in range(spec.noise_tokens)]
            body_toks = body_sig + body_noise
            rng.shuffle(body_toks)
            entities = sorted(signature[:3])
            doc_id = f"doc-{k:03d}-{d:04d}"
            documents.append(
                {
                    "id": doc_id,
                    "date": _iso(timestamp),
                    "lang": language,
                    "cluster": f"story-{k:03d}",
                    "title": {
                        "tokens": title_toks,
                        "lemmas": [f"l_{t}" for t in title_toks],
                        "entities": entities[:1],
                    },
                    "body": {
                        "tokens": body_toks,
                        "lemmas": [f"l_{t}" for t in body_toks],
                        "entities": entities,
                    },
                }
            )
            noise = np.array(
                [rng.uniform(-spec.embedding_noise, spec.embedding_noise) for _ in range(spec.embedding_dim)]
            )
            embeddings.append(
                {"id": doc_id, "vector": [round(float(x), 8) for x in centers[k] + noise]}
            )

    order = sorted(range(len(documents)), key=lambda i: (documents[i]["date"], documents[i]["id"]))
    documents = [documents[i] for i in order]
    embeddings = [embeddings[i] for i in order]
    return documents, [{"dim": spec.embedding_dim}] + embeddings


def write_synthetic(spec: SyntheticSpec, corpus_path, embeddings_path=None) -> int:
    """Write the corpus (and optionally the embedding store) to disk."""
    documents, embeddings = generate_synthetic(spec)
    with open(corpus_path, "w", encoding="utf-8") as handle:
        for doc in documents:
            handle.write(json.dumps(doc) + "\n")
    if embeddings_path is not None:
        with open(embeddings_path, "w", encoding="utf-8") as handle:
            for record in embeddings:
                handle.write(json.dumps(record) + "\n")
    return len(documents)


def _iso(timestamp: float) -> str:
    return (
        datetime.fromtimestamp(round(timestamp), tz=timezone.utc)
        .isoformat()
        .replace("+00:00", "Z")
    )
