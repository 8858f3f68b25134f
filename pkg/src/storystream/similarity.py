"""Pairwise article similarity and the per-language slot weights behind it.

Two articles are compared by the weighted sum of the cosine similarities of
their nine sub-vectors. The weights are learned per language with a plain
logistic regression over labeled article pairs: a pair is positive when both
articles belong to the same gold story. Scoring uses the raw coefficients
with no intercept and no sigmoid; downstream thresholds are tuned against
these raw scores and absorb any offset.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import NUM_SLOTS, FeatureSet, stream_featurized_batches
from .errors import DegenerateDataError, ValidationError


@dataclass(frozen=True)
class WeightVector:
    """Learned per-slot coefficients for one language.

    The intercept is kept for diagnostics only; scoring never applies it.
    """

    language: str
    beta: tuple
    intercept: float = 0.0

    def __post_init__(self):
        if len(self.beta) != NUM_SLOTS:
            raise ValidationError(f"expected {NUM_SLOTS} coefficients, got {len(self.beta)}")
        if not all(math.isfinite(b) for b in self.beta) or not math.isfinite(self.intercept):
            raise ValidationError("weight coefficients must be finite")

    @classmethod
    def uniform(cls, language: str) -> "WeightVector":
        return cls(language, tuple([1.0 / NUM_SLOTS] * NUM_SLOTS))


@dataclass(frozen=True)
class LabeledPair:
    features: tuple  # nine cosine similarities, each in [0, 1]
    label: bool

    def __post_init__(self):
        if len(self.features) != NUM_SLOTS:
            raise ValidationError(f"expected {NUM_SLOTS} features, got {len(self.features)}")


def cosine(a: dict, b: dict) -> float:
    """Cosine similarity of two sparse vectors; 0.0 when either is empty."""
    if not a or not b:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    dot = 0.0
    for term, wa in a.items():
        wb = b.get(term)
        if wb is not None:
            dot += wa * wb
    if dot == 0.0:
        return 0.0
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    return min(1.0, max(0.0, dot / (na * nb)))


def _slot_cosine(a: FeatureSet, b: FeatureSet, k: int) -> float:
    va, vb = a.vectors[k], b.vectors[k]
    if not va or not vb:
        return 0.0
    if len(vb) < len(va):
        va, vb = vb, va
    dot = 0.0
    for term, wa in va.items():
        wb = vb.get(term)
        if wb is not None:
            dot += wa * wb
    if dot == 0.0:
        return 0.0
    return min(1.0, max(0.0, dot / (a.norms[k] * b.norms[k])))


def slot_cosines(a: FeatureSet, b: FeatureSet) -> tuple:
    return tuple(_slot_cosine(a, b, k) for k in range(NUM_SLOTS))


def pair_similarity(a: FeatureSet, b: FeatureSet, weights: WeightVector) -> float:
    """Weighted sum of per-slot cosines; symmetric, intercept excluded."""
    total = 0.0
    for k, beta in enumerate(weights.beta):
        if beta != 0.0:
            total += beta * _slot_cosine(a, b, k)
    return total


def build_training_pairs(
    documents: Sequence,
    window_seconds: float,
    negative_ratio: float = 1.0,
    seed: int = 0,
) -> list:
    """Turn one language's labeled documents into training pairs.

    Positives are all same-story pairs whose timestamps lie within one
    batching window of each other. Negatives are different-story pairs under
    the same temporal constraint, sampled uniformly without replacement to
    negative_ratio times the positive count (capped at availability).
    Features are computed with the same streaming featurization the pipeline
    uses, so the learned weights see deployment-like cosines.
    """
    if len(documents) < 2:
        raise DegenerateDataError("need at least two documents to build pairs")
    languages = {doc.language for doc in documents}
    if len(languages) != 1:
        raise ValidationError(f"documents span several languages: {sorted(languages)}")
    missing = [doc.id for doc in documents if doc.gold_story is None]
    if missing:
        raise ValidationError(f"documents without gold story labels: {missing[:5]}")

    features = {}
    for _, batch_features in stream_featurized_batches(documents, window_seconds):
        features.update(batch_features)

    docs = sorted(documents, key=lambda d: (d.timestamp, d.id))
    positives = []
    negative_pool = []
    hi = 0
    for i, left in enumerate(docs):
        limit = left.timestamp + window_seconds
        if hi < i + 1:
            hi = i + 1
        while hi < len(docs) and docs[hi].timestamp <= limit:
            hi += 1
        for j in range(i + 1, hi):
            right = docs[j]
            if left.gold_story == right.gold_story:
                positives.append((left.id, right.id))
            else:
                negative_pool.append((left.id, right.id))
    if not positives:
        raise DegenerateDataError("no positive pairs within the temporal window")

    rng = random.Random(seed)
    wanted = int(round(negative_ratio * len(positives)))
    negatives = (
        rng.sample(negative_pool, wanted)
        if wanted < len(negative_pool)
        else list(negative_pool)
    )

    pairs = []
    for (a, b), label in [(p, True) for p in positives] + [(n, False) for n in negatives]:
        pairs.append(LabeledPair(slot_cosines(features[a], features[b]), label))
    return pairs


def log_loss(weights: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy of the linear model [beta..., intercept]."""
    z = x @ weights
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def log_loss_gradient(weights: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    z = np.clip(x @ weights, -500.0, 500.0)
    prob = 1.0 / (1.0 + np.exp(-z))
    return x.T @ (prob - y) / len(y)


def fit_beta(
    pairs: Sequence[LabeledPair],
    language: str,
    learning_rate: float = 1.0,
    max_iters: int = 500,
    tolerance: float = 1e-10,
) -> WeightVector:
    """Fit the slot weights with full-batch gradient descent on log-loss.

    Each step backtracks (halving) until the loss does not increase, so the
    recorded loss sequence is non-increasing. Training stops when a step
    improves the loss by less than the tolerance or the iteration budget
    runs out. Deterministic: no randomness is involved.
    """
    if learning_rate <= 0 or max_iters < 1 or tolerance < 0:
        raise ValidationError("bad optimizer settings")
    labels = {pair.label for pair in pairs}
    if labels != {True, False}:
        raise DegenerateDataError("training pairs must contain both labels")

    x = np.array([pair.features + (1.0,) for pair in pairs], dtype=float)
    y = np.array([1.0 if pair.label else 0.0 for pair in pairs])
    w = np.zeros(NUM_SLOTS + 1)
    current = log_loss(w, x, y)
    for _ in range(max_iters):
        grad = log_loss_gradient(w, x, y)
        step = learning_rate
        candidate = w - step * grad
        new_loss = log_loss(candidate, x, y)
        while new_loss > current and step > 1e-16:
            step /= 2.0
            candidate = w - step * grad
            new_loss = log_loss(candidate, x, y)
        if new_loss > current:
            break
        improvement = current - new_loss
        w, current = candidate, new_loss
        if improvement < tolerance:
            break
    return WeightVector(language, tuple(float(b) for b in w[:NUM_SLOTS]), float(w[NUM_SLOTS]))


def normalize_weights(weights: WeightVector) -> WeightVector:
    """Rescale coefficients so they sum to one; rankings are unchanged.

    Uniform positive scaling of the coefficients scales every pairwise score
    by the same factor, so downstream threshold tuning sees an equivalent
    but unit-scale problem. Left untouched when the coefficient sum is not
    positive.
    """
    total = sum(weights.beta)
    if total <= 0.0:
        return weights
    return WeightVector(
        weights.language,
        tuple(b / total for b in weights.beta),
        weights.intercept / total,
    )


def save_weights(path, weights: Sequence[WeightVector]) -> None:
    """Write one JSON object per language: {"lang", "beta", "intercept"}."""
    with open(path, "w", encoding="utf-8") as handle:
        for w in weights:
            handle.write(
                json.dumps(
                    {"lang": w.language, "beta": list(w.beta), "intercept": w.intercept}
                )
                + "\n"
            )


def load_weights(path) -> dict:
    from .errors import InputError

    table = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                table[record["lang"]] = WeightVector(
                    record["lang"],
                    tuple(float(b) for b in record["beta"]),
                    float(record.get("intercept", 0.0)),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"bad weights record on line {lineno}: {exc}") from exc
    return table
