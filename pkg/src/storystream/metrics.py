"""Clustering evaluation: pairwise and BCubed precision/recall/F1.

Pairwise scores count unordered document pairs: a true positive is a pair
placed together by both the prediction and the gold labels. BCubed scores
average, per document, the fraction of its predicted cluster that shares its
gold cluster (precision) and vice versa (recall). Both are computed from the
prediction/gold contingency table, so evaluation is O(n) in documents while
agreeing exactly with the quadratic definitions. Pair counts use Python
integers, which are exact at any corpus size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DocumentSetMismatchError, ValidationError


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class EvaluationReport:
    documents: int
    pred_clusters: int
    gold_clusters: int
    pairwise: Scores
    bcubed: Scores
    by_language: dict | None = None

    def as_dict(self) -> dict:
        out = {
            "documents": self.documents,
            "pred_clusters": self.pred_clusters,
            "gold_clusters": self.gold_clusters,
            "pairwise": self.pairwise.as_dict(),
            "bcubed": self.bcubed.as_dict(),
        }
        if self.by_language is not None:
            out["by_language"] = {
                lang: sub.as_dict() for lang, sub in self.by_language.items()
            }
        return out


def _check_same_documents(pred: Mapping, gold: Mapping) -> None:
    if pred.keys() != gold.keys():
        only_pred = set(pred) - set(gold)
        only_gold = set(gold) - set(pred)
        raise DocumentSetMismatchError(only_pred, only_gold)


def _contingency(pred: Mapping, gold: Mapping):
    pred_sizes = {}
    gold_sizes = {}
    cells = {}
    for doc, p in pred.items():
        g = gold[doc]
        pred_sizes[p] = pred_sizes.get(p, 0) + 1
        gold_sizes[g] = gold_sizes.get(g, 0) + 1
        cells[(p, g)] = cells.get((p, g), 0) + 1
    return pred_sizes, gold_sizes, cells


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def pairwise_scores(pred: Mapping, gold: Mapping) -> Scores:
    """Instance-pair precision/recall/F1; 0/0 ratios count as 1."""
    _check_same_documents(pred, gold)
    pred_sizes, gold_sizes, cells = _contingency(pred, gold)
    same_pred = sum(n * (n - 1) // 2 for n in pred_sizes.values())
    same_gold = sum(n * (n - 1) // 2 for n in gold_sizes.values())
    true_pos = sum(n * (n - 1) // 2 for n in cells.values())
    precision = true_pos / same_pred if same_pred else 1.0
    recall = true_pos / same_gold if same_gold else 1.0
    return Scores(precision, recall, _f1(precision, recall))


def bcubed_scores(pred: Mapping, gold: Mapping) -> Scores:
    """Per-item BCubed precision/recall/F1."""
    _check_same_documents(pred, gold)
    pred_sizes, gold_sizes, cells = _contingency(pred, gold)
    n = len(pred)
    if n == 0:
        raise ValidationError("empty document set")
    precision = sum(c * c / pred_sizes[p] for (p, _), c in cells.items()) / n
    recall = sum(c * c / gold_sizes[g] for (_, g), c in cells.items()) / n
    return Scores(precision, recall, _f1(precision, recall))


def report(
    pred: Mapping, gold: Mapping, languages: Mapping | None = None
) -> EvaluationReport:
    """Full evaluation: both metric families plus cluster counts.

    When a document -> language mapping is supplied, the same scores are
    also computed per language over that language's documents.
    """
    _check_same_documents(pred, gold)
    if not pred:
        raise ValidationError("empty document set")
    by_language = None
    if languages is not None:
        by_language = {}
        for lang in sorted(set(languages.values())):
            ids = [d for d in pred if languages[d] == lang]
            sub_pred = {d: pred[d] for d in ids}
            sub_gold = {d: gold[d] for d in ids}
            by_language[lang] = report(sub_pred, sub_gold)
    return EvaluationReport(
        documents=len(pred),
        pred_clusters=len(set(pred.values())),
        gold_clusters=len(set(gold.values())),
        pairwise=pairwise_scores(pred, gold),
        bcubed=bcubed_scores(pred, gold),
        by_language=by_language,
    )


def format_table(reports: Mapping) -> str:
    """Aligned text table, one row per label, scores in percent."""
    header = (
        f"{'':<10} {'BCubed':>21} {'Standard':>21} {'Clusters':>9} {'Gold':>6}\n"
        f"{'':<10} {'F1':>7}{'P':>7}{'R':>7} {'F1':>7}{'P':>7}{'R':>7}"
    )
    lines = [header]
    for label, rep in reports.items():
        b, s = rep.bcubed, rep.pairwise
        lines.append(
            f"{label:<10} "
            f"{100 * b.f1:>7.2f}{100 * b.precision:>7.2f}{100 * b.recall:>7.2f} "
            f"{100 * s.f1:>7.2f}{100 * s.precision:>7.2f}{100 * s.recall:>7.2f} "
            f"{rep.pred_clusters:>9d} {rep.gold_clusters:>6d}"
        )
    return "\n".join(lines)
