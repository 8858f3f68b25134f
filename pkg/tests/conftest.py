import io
import json

import pytest

from storystream.corpus import Document, Section, parse_corpus

HOUR = 3600.0
DAY = 86400.0


def record(
    doc_id="d1",
    date="2021-03-01T00:00:00Z",
    lang="en",
    cluster=None,
    title_tokens=("alpha",),
    body_tokens=("beta", "gamma"),
    **overrides,
):
    rec = {
        "id": doc_id,
        "date": date,
        "lang": lang,
        "title": {
            "tokens": list(title_tokens),
            "lemmas": [f"l_{t}" for t in title_tokens],
            "entities": [],
        },
        "body": {
            "tokens": list(body_tokens),
            "lemmas": [f"l_{t}" for t in body_tokens],
            "entities": [],
        },
    }
    if cluster is not None:
        rec["cluster"] = cluster
    rec.update(overrides)
    return rec


def corpus_lines(records):
    return io.StringIO("\n".join(json.dumps(r) for r in records))


def corpus_from(records):
    return parse_corpus(corpus_lines(records))


def make_doc(
    doc_id,
    hours=0.0,
    lang="en",
    story=None,
    title_tokens=(),
    body_tokens=(),
    title_entities=(),
    body_entities=(),
):
    """Document built directly, lemmas mirroring tokens with an l_ prefix."""
    return Document(
        id=doc_id,
        timestamp=hours * HOUR,
        language=lang,
        title=Section(
            tokens=tuple(title_tokens),
            lemmas=tuple(f"l_{t}" for t in title_tokens),
            entities=tuple(title_entities),
        ),
        body=Section(
            tokens=tuple(body_tokens),
            lemmas=tuple(f"l_{t}" for t in body_tokens),
            entities=tuple(body_entities),
        ),
        gold_story=story,
    )


@pytest.fixture
def tmp_text_file(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
