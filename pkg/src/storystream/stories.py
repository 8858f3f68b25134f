"""Cross-batch story tracking through topic replay.

Stories are per-language clusters persisted across batches. When a new batch
arrives, every active recent story whose centroid is similar enough to some
new article (above the per-language threshold) is "replayed": all of its
member documents are re-inserted into the batch, and topic detection runs on
the augmented document set. The resulting topics are then reconciled with the
replayed stories:

  * a topic without replayed documents starts a new story;
  * a replayed story's id is inherited by the single topic holding the
    plurality of its replayed documents (ties go to the topic containing the
    story's earliest-timestamp document among the tied topics); the other
    topics holding its documents become fresh stories (a split);
  * a topic inheriting several story ids keeps the oldest one (ties broken by
    the lexicographically smallest id) and the rest are closed as merged.

A resolved topic's story owns exactly the topic's documents afterwards, so
every ingested document always belongs to exactly one active story. Replayed
documents keep the feature vectors computed in their original batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import FeatureSet, mean_features
from .errors import ConsistencyError, SequencingError, ValidationError
from .similarity import WeightVector, pair_similarity
from .topics import detect_topics

ACTIVE = "active"
MERGED = "merged"


@dataclass
class StoryRecord:
    id: str
    language: str
    members: list  # original document ids, each exactly once
    centroid: FeatureSet  # unnormalized mean of member feature sets
    created_batch: int
    last_active: int
    status: str = ACTIVE
    merged_into: str | None = None


@dataclass(frozen=True)
class ReplayConfig:
    """Replay threshold per language and how far back stories stay eligible."""

    t1: Mapping  # language -> similarity threshold
    recency: int = 1

    def __post_init__(self):
        if self.recency < 1:
            raise ValidationError("replay recency must be at least 1 batch")
        for lang, value in self.t1.items():
            if value != value or value in (float("inf"), float("-inf")):
                raise ValidationError(f"threshold for {lang!r} must be finite")

    def threshold(self, language: str) -> float:
        try:
            return self.t1[language]
        except KeyError:
            raise ValidationError(f"no replay threshold configured for {language!r}")


@dataclass(frozen=True)
class LineageEvent:
    story: str
    topic: int  # topic position within the batch
    kind: str  # "new" | "subsist" | "split" | "merged"
    source: str | None = None  # parent for splits, survivor for merges
    new_docs: int = 0


@dataclass
class LineageReport:
    batch_index: int
    events: list = field(default_factory=list)

    def resolved(self) -> dict:
        """topic position -> story id, for topics that own documents."""
        return {e.topic: e.story for e in self.events if e.kind != MERGED}


class StoryRegistry:
    """Single-language story state plus the immutable per-document caches."""

    def __init__(self, language: str):
        self.language = language
        self.stories = {}
        self.doc_features = {}
        self.doc_timestamps = {}
        self.last_batch = -1
        self.replayed_docs = 0
        self.total_docs = 0
        self._counter = 0

    def new_story_id(self, batch_index: int) -> str:
        story_id = f"s-{self.language}-{batch_index}-{self._counter}"
        self._counter += 1
        return story_id

    def active_stories(self) -> list:
        return [s for _, s in sorted(self.stories.items()) if s.status == ACTIVE]

    def assignments(self) -> dict:
        """Final document -> story mapping over active stories."""
        out = {}
        for story in self.active_stories():
            for doc_id in story.members:
                out[doc_id] = story.id
        return out


def select_replays(
    new_docs: Sequence,
    features: Mapping,
    registry: StoryRegistry,
    cfg: ReplayConfig,
    weights: WeightVector,
    batch_index: int,
) -> list:
    """Ids of stories to replay into the batch, in sorted order.

    A story qualifies when it is active, was last touched within the recency
    window, and at least one new article scores strictly above the language
    threshold against its centroid.
    """
    threshold = cfg.threshold(registry.language)
    selected = []
    for story in registry.active_stories():
        if story.last_active < batch_index - cfg.recency:
            continue
        for doc in new_docs:
            if pair_similarity(features[doc.id], story.centroid, weights) > threshold:
                selected.append(story.id)
                break
    return selected


def resolve_lineage(
    topics: Sequence,
    replayed_ids: Sequence,
    registry: StoryRegistry,
    new_doc_ids: set,
    batch_index: int,
) -> LineageReport:
    """Reconcile a batch's topics with the stories that were replayed into it.

    Mutates the registry: surviving stories take over their topic's documents
    and recompute centroids, merge losers become terminal, and fresh stories
    are created for new or split-off topics.
    """
    report = LineageReport(batch_index)
    source_of = {}
    for sid in replayed_ids:
        for doc_id in registry.stories[sid].members:
            source_of[doc_id] = sid

    replay_spread = {sid: {} for sid in replayed_ids}
    topic_new_docs = []
    for position, topic in enumerate(topics):
        fresh = []
        for doc_id in topic.members:
            sid = source_of.get(doc_id)
            if sid is not None:
                replay_spread[sid][position] = replay_spread[sid].get(position, 0) + 1
            elif doc_id in new_doc_ids:
                fresh.append(doc_id)
            else:
                raise ConsistencyError(
                    f"document {doc_id!r} in batch {batch_index} belongs to no input set"
                )
        topic_new_docs.append(fresh)

    inherited = {position: [] for position in range(len(topics))}
    for sid in replayed_ids:
        spread = replay_spread[sid]
        if not spread:
            continue
        best = max(spread.values())
        tied = [p for p, count in spread.items() if count == best]
        winner = tied[0]
        if len(tied) > 1:
            timestamps = registry.doc_timestamps
            docs_in = lambda p: [
                d for d in topics[p].members if source_of.get(d) == sid
            ]
            winner = min(
                tied, key=lambda p: min((timestamps[d], d) for d in docs_in(p)) + (p,)
            )
        inherited[winner].append(sid)

    for position, topic in enumerate(topics):
        owners = inherited[position]
        if not owners:
            parent = _dominant_source(topic, source_of, registry)
            story_id = registry.new_story_id(batch_index)
            kind = "split" if parent else "new"
            registry.stories[story_id] = StoryRecord(
                id=story_id,
                language=registry.language,
                members=[],
                centroid=FeatureSet.empty(),
                created_batch=batch_index,
                last_active=batch_index,
            )
            report.events.append(
                LineageEvent(story_id, position, kind, parent, len(topic_new_docs[position]))
            )
        else:
            survivor = min(
                owners, key=lambda s: (registry.stories[s].created_batch, s)
            )
            for loser_id in owners:
                if loser_id == survivor:
                    continue
                loser = registry.stories[loser_id]
                loser.status = MERGED
                loser.merged_into = survivor
                loser.last_active = batch_index
                report.events.append(LineageEvent(loser_id, position, MERGED, survivor))
            story_id = survivor
            report.events.append(
                LineageEvent(
                    story_id, position, "subsist", None, len(topic_new_docs[position])
                )
            )
        story = registry.stories[story_id]
        story.members = list(topic.members)
        story.centroid = mean_features([registry.doc_features[d] for d in story.members])
        story.last_active = batch_index
    return report


def _dominant_source(topic, source_of, registry):
    """Report-only: which story contributed most replayed docs to a split topic."""
    counts = {}
    for doc_id in topic.members:
        sid = source_of.get(doc_id)
        if sid is not None:
            counts[sid] = counts.get(sid, 0) + 1
    if not counts:
        return None
    best = max(counts.values())
    tied = [s for s, c in counts.items() if c == best]
    return min(tied, key=lambda s: (registry.stories[s].created_batch, s))


def advance(
    registry: StoryRegistry,
    batch_index: int,
    documents: Sequence,
    features: Mapping,
    weights: WeightVector,
    cfg: ReplayConfig,
    resolution: float = 1.0,
    prune_epsilon: float = 0.0,
    seed: int = 0,
) -> tuple:
    """Process one batch for one language: replay, detect topics, resolve.

    Returns (per-document story assignment for the augmented batch, lineage
    report). Assignments are provisional; a replayed document's story can
    still change in later batches, so final output should read the registry
    at the end of the stream.
    """
    if batch_index <= registry.last_batch:
        raise SequencingError(
            f"batch {batch_index} arrived after batch {registry.last_batch}"
        )
    for doc in documents:
        if doc.language != registry.language:
            raise ValidationError(
                f"document {doc.id!r} is {doc.language!r}, registry is {registry.language!r}"
            )

    if not documents:
        registry.last_batch = batch_index
        return {}, LineageReport(batch_index)

    for doc in documents:
        registry.doc_features[doc.id] = features[doc.id]
        registry.doc_timestamps[doc.id] = doc.timestamp

    replayed_ids = select_replays(documents, features, registry, cfg, weights, batch_index)
    augmented = [(doc.id, features[doc.id]) for doc in documents]
    for sid in replayed_ids:
        story = registry.stories[sid]
        registry.replayed_docs += len(story.members)
        augmented.extend((d, registry.doc_features[d]) for d in story.members)

    topics = detect_topics(
        augmented,
        registry.language,
        batch_index,
        weights,
        resolution,
        prune_epsilon,
        seed,
    )
    new_doc_ids = {doc.id for doc in documents}
    report = resolve_lineage(topics, replayed_ids, registry, new_doc_ids, batch_index)

    registry.total_docs += len(documents)
    registry.last_batch = batch_index

    assignments = {}
    resolved = report.resolved()
    for position, topic in enumerate(topics):
        for doc_id in topic.members:
            assignments[doc_id] = resolved[position]
    return assignments, report


def replay_stats(registries: Mapping) -> dict:
    """Aggregate replay accounting across languages."""
    replayed = sum(r.replayed_docs for r in registries.values())
    total = sum(r.total_docs for r in registries.values())
    stories = sum(len(r.active_stories()) for r in registries.values())
    return {
        "replayed_docs": replayed,
        "total_docs": total,
        "replay_rate": (replayed / total) if total else 0.0,
        "stories": stories,
    }
