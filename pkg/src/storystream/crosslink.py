"""Crosslingual story linking over dense article embeddings.

Every monolingual story is represented by the arithmetic mean of its member
articles' dense vectors. English is the pivot: per batch, eligible Spanish
and German stories are matched against English anchors (unassigned English
stories, or existing multilingual stories with an English member and a free
slot for the candidate's language) by solving a minimum-cost assignment on
the cosine-distance matrix. Cells at or above the distance threshold are
forbidden, so every accepted link is strictly closer than the threshold.
Stories that never link become singleton multilingual stories once they age
out of the linking window, which keeps the crosslingual evaluation total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .assignment import FORBIDDEN, hungarian
from .errors import InputError, InvariantError, MissingEmbeddingError, ValidationError
from .stories import ACTIVE, StoryRecord, StoryRegistry

PIVOT = "en"
LINKABLE = ("es", "de")


class EmbeddingStore:
    """Document id -> dense vector, all sharing one dimension."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValidationError(f"embedding dimension must be positive, got {dim}")
        self.dim = dim
        self.vectors = {}

    def put(self, doc_id: str, vector) -> None:
        arr = np.asarray(vector, dtype=float)
        if arr.shape != (self.dim,):
            raise InputError(
                f"vector for {doc_id!r} has shape {arr.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(arr)):
            raise InputError(f"vector for {doc_id!r} has non-finite components")
        self.vectors[doc_id] = arr

    def get(self, doc_id: str) -> np.ndarray:
        try:
            return self.vectors[doc_id]
        except KeyError:
            raise MissingEmbeddingError(doc_id) from None

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.vectors

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        """Read the JSONL format: a {"dim": D} header line, then id/vector lines."""
        with open(path, "r", encoding="utf-8") as handle:
            header = None
            store = None
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise InputError(f"embeddings line {lineno}: invalid JSON: {exc.msg}")
                if header is None:
                    if "dim" not in record:
                        raise InputError("embeddings file must start with a dim header")
                    header = int(record["dim"])
                    store = cls(header)
                    continue
                if "id" not in record or "vector" not in record:
                    raise InputError(f"embeddings line {lineno}: missing id or vector")
                store.put(str(record["id"]), record["vector"])
        if store is None:
            raise InputError("embeddings file is empty")
        return store

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(json.dumps({"dim": self.dim}) + "\n")
            for doc_id, vector in self.vectors.items():
                handle.write(
                    json.dumps({"id": doc_id, "vector": [float(x) for x in vector]})
                    + "\n"
                )


@dataclass(frozen=True)
class StoryEmbedding:
    story_id: str
    vector: np.ndarray


@dataclass
class MultilingualStory:
    id: str
    members: dict  # language -> story id, at most one per language
    created_batch: int


@dataclass(frozen=True)
class CrosslinkConfig:
    t2: float = 0.22  # cosine-distance threshold, links must be strictly below
    max_age: int = 4  # batches a story stays linkable after its last activity

    def __post_init__(self):
        if not 0.0 <= self.t2 <= 2.0:
            raise ValidationError(f"t2 must lie in [0, 2], got {self.t2}")
        if self.max_age < 1:
            raise ValidationError(f"max_age must be at least 1, got {self.max_age}")


def story_embedding(story: StoryRecord, store: EmbeddingStore) -> StoryEmbedding:
    """Componentwise mean of the member documents' vectors."""
    if not story.members:
        raise ValidationError(f"story {story.id!r} has no members")
    acc = np.zeros(store.dim)
    for doc_id in story.members:
        acc += store.get(doc_id)
    return StoryEmbedding(story.id, acc / len(story.members))


def dense_cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class MultilingualRegistry:
    """Multilingual story state; assignments are made once and never moved."""

    def __init__(self):
        self.stories = {}
        self.story_to_ml = {}
        self.conflicts = 0
        self._counter = 0

    def _new_id(self, batch_index: int) -> str:
        ml_id = f"ms-{batch_index}-{self._counter}"
        self._counter += 1
        return ml_id

    def create(self, members: Mapping, batch_index: int) -> MultilingualStory:
        for lang, sid in members.items():
            if sid in self.story_to_ml:
                raise InvariantError(f"story {sid!r} is already assigned")
        ml = MultilingualStory(self._new_id(batch_index), dict(members), batch_index)
        self.stories[ml.id] = ml
        for sid in members.values():
            self.story_to_ml[sid] = ml.id
        return ml

    def join(self, ml_id: str, language: str, story_id: str) -> None:
        ml = self.stories[ml_id]
        if language in ml.members:
            raise InvariantError(
                f"{ml_id} already holds a {language!r} story; cannot add {story_id!r}"
            )
        if story_id in self.story_to_ml:
            raise InvariantError(f"story {story_id!r} is already assigned")
        ml.members[language] = story_id
        self.story_to_ml[story_id] = ml_id

    def note_merge(self, loser_id: str, survivor_id: str) -> None:
        """Keep crosslingual structure consistent after a monolingual merge.

        The merged story's documents now live in the survivor, so the dead
        story is detached from its multilingual story. When both stories had
        different multilingual assignments this loses gold coverage for the
        old group; the event is counted as a conflict.
        """
        loser_ml = self.story_to_ml.pop(loser_id, None)
        if loser_ml is None:
            return
        survivor_ml = self.story_to_ml.get(survivor_id)
        if survivor_ml is not None and survivor_ml != loser_ml:
            self.conflicts += 1
        ml = self.stories[loser_ml]
        for lang, sid in list(ml.members.items()):
            if sid == loser_id:
                del ml.members[lang]
        if not ml.members:
            del self.stories[loser_ml]

    def assignments(self, registries: Mapping) -> dict:
        """document id -> multilingual story id, over active member stories."""
        out = {}
        for ml_id, ml in self.stories.items():
            for lang, sid in ml.members.items():
                story = registries[lang].stories[sid]
                for doc_id in story.members:
                    out[doc_id] = ml_id
        return out


def _eligible_candidates(registry: StoryRegistry, assigned, batch_index: int, max_age: int):
    out = []
    for story in registry.active_stories():
        if story.id in assigned:
            continue
        if story.last_active < batch_index - max_age:
            continue
        out.append(story)
    return out


def link_stories(
    registries: Mapping,
    ml_registry: MultilingualRegistry,
    store: EmbeddingStore,
    cfg: CrosslinkConfig,
    batch_index: int,
) -> MultilingualRegistry:
    """One linking round against the English pivot, then age-out conversion.

    For each non-English language, eligible stories are assigned to English
    anchors by minimum total cosine distance, with cells at or beyond t2
    forbidden. Anchors are recomputed between languages so a story linked
    through Spanish can immediately receive a German member through its
    multilingual story. Afterwards every story that fell out of the linking
    window without an assignment becomes a singleton multilingual story.
    """
    for language in LINKABLE:
        if language not in registries or PIVOT not in registries:
            continue
        rows = _eligible_candidates(
            registries[language], ml_registry.story_to_ml, batch_index, cfg.max_age
        )
        if not rows:
            continue
        anchors = []  # (kind, key, english story record)
        for story in _eligible_candidates(
            registries[PIVOT], ml_registry.story_to_ml, batch_index, cfg.max_age
        ):
            anchors.append(("story", story.id, story))
        for ml_id in sorted(ml_registry.stories):
            ml = ml_registry.stories[ml_id]
            en_sid = ml.members.get(PIVOT)
            if en_sid is None or language in ml.members:
                continue
            en_story = registries[PIVOT].stories[en_sid]
            if en_story.status != ACTIVE:
                continue
            if en_story.last_active < batch_index - cfg.max_age:
                continue
            anchors.append(("ml", ml_id, en_story))
        if not anchors:
            continue

        row_vecs = [story_embedding(s, store).vector for s in rows]
        col_vecs = [story_embedding(a[2], store).vector for a in anchors]
        cost = []
        for rv in row_vecs:
            cost.append(
                [
                    d if (d := 1.0 - dense_cosine(rv, cv)) < cfg.t2 else FORBIDDEN
                    for cv in col_vecs
                ]
            )
        for i, j in hungarian(cost):
            if not cost[i][j] < cfg.t2:
                raise InvariantError("accepted link at or beyond the distance threshold")
            kind, key, en_story = anchors[j]
            if kind == "story":
                ml_registry.create(
                    {PIVOT: en_story.id, language: rows[i].id}, batch_index
                )
            else:
                ml_registry.join(key, language, rows[i].id)

    for language in sorted(registries):
        for story in registries[language].active_stories():
            if story.id in ml_registry.story_to_ml:
                continue
            if story.last_active < batch_index - cfg.max_age:
                ml_registry.create({language: story.id}, batch_index)
    return ml_registry


def finalize_links(
    registries: Mapping, ml_registry: MultilingualRegistry, batch_index: int
) -> MultilingualRegistry:
    """End of stream: every still-unassigned story becomes a singleton."""
    for language in sorted(registries):
        for story in registries[language].active_stories():
            if story.id not in ml_registry.story_to_ml:
                ml_registry.create({language: story.id}, batch_index)
    return ml_registry
