"""Span evaluation: exact-match P/R/F1, character Jaccard, error categories.

Exact precision/recall/F1 count a predicted span as a true positive only on
an exact (start, end) match within its utterance; everything else is a false
positive, and unmatched gold spans are false negatives. The Jaccard score
first finds, per message, the one-to-one assignment of predicted to gold
spans maximizing total character overlap; each matched pair contributes
intersection-over-union of its character index sets and each unmatched span
contributes 0. Both metrics are micro-aggregated over the corpus (the macro
per-message mean of the Jaccard score is also reported).

An utterance flagged unparseable is scored as having zero predicted spans
and counted separately; this penalizes recall, never precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Corpus, MentionSpan
from .errors import IoError, KeyMismatch

Key = tuple[str, int]  # (dialogue_id, utterance_index)


@dataclass(frozen=True)
class PredictionSet:
    """Per-utterance predicted spans keyed by (dialogue_id, index).

    Keys must form a subset of the corpus's utterances; utterances absent
    from the set are treated as having no predicted spans. ``failures`` flags
    utterances whose raw model output could not be parsed.
    """

    spans: Mapping[Key, tuple[MentionSpan, ...]]
    failures: Mapping[Key, str] = field(default_factory=dict)

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "PredictionSet":
        """Gold-shaped set covering every utterance."""
        table = {}
        for dialogue in corpus.dialogues:
            for utt in dialogue.utterances:
                table[(dialogue.dialogue_id, utt.index)] = utt.mentions
        return cls(spans=table)

    def get(self, key: Key) -> tuple[MentionSpan, ...]:
        if key in self.failures:
            return ()
        return self.spans.get(key, ())


def check_keys(gold: PredictionSet, pred: PredictionSet) -> None:
    gold_keys = set(gold.spans)
    stray = (set(pred.spans) | set(pred.failures)) - gold_keys
    if stray:
        examples = ", ".join(map(str, sorted(stray)[:3]))
        raise KeyMismatch(f"{len(stray)} prediction keys outside the corpus: {examples}")


def overlap(a: MentionSpan, b: MentionSpan) -> int:
    """Number of character indices shared by two spans."""
    return max(0, min(a.end, b.end) - max(a.start, b.start))


# ---------------------------------------------------------------------------
# exact match


@dataclass(frozen=True)
class PrfResult:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _safe_ratio(tp: int, denominator: int, other_denominator: int) -> float:
    if denominator:
        return tp / denominator
    # nothing on this side: perfect only if the other side is empty too
    return 1.0 if other_denominator == 0 else 0.0


def exact_prf(gold: PredictionSet, pred: PredictionSet) -> PrfResult:
    """Micro-aggregated exact span matching over the corpus."""
    check_keys(gold, pred)
    tp = fp = fn = 0
    for key, gold_spans in gold.spans.items():
        gold_set = set(gold_spans)
        pred_set = set(pred.get(key))
        hits = len(gold_set & pred_set)
        tp += hits
        fp += len(pred_set) - hits
        fn += len(gold_set) - hits
    precision = _safe_ratio(tp, tp + fp, tp + fn)
    recall = _safe_ratio(tp, tp + fn, tp + fp)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return PrfResult(precision, recall, f1, tp, fp, fn)


# ---------------------------------------------------------------------------
# optimal assignment + Jaccard


def optimal_assignment(gold: list[MentionSpan] | tuple[MentionSpan, ...],
                       pred: list[MentionSpan] | tuple[MentionSpan, ...],
                       ) -> list[tuple[int, int]]:
    """One-to-one partial matching maximizing total character intersection.

    Pairs with zero intersection never match. Among maximum-weight matchings
    the result is the lexicographically first by (gold index, pred index),
    preferring to match an earlier gold span over leaving it unmatched.
    Solved exactly; per-message span counts are small in this domain.
    """
    n, m = len(gold), len(pred)
    if n == 0 or m == 0:
        return []
    weights = [[overlap(g, p) for p in pred] for g in gold]
    memo: dict[tuple[int, int], int] = {}

    def best(i: int, used: int) -> int:
        if i == n:
            return 0
        state = (i, used)
        cached = memo.get(state)
        if cached is not None:
            return cached
        value = best(i + 1, used)  # leave gold i unmatched
        for j in range(m):
            if weights[i][j] > 0 and not used & (1 << j):
                value = max(value, weights[i][j] + best(i + 1, used | (1 << j)))
        memo[state] = value
        return value

    pairs: list[tuple[int, int]] = []
    used = 0
    for i in range(n):
        target = best(i, used)
        for j in range(m):
            if weights[i][j] > 0 and not used & (1 << j) \
                    and weights[i][j] + best(i + 1, used | (1 << j)) == target:
                pairs.append((i, j))
                used |= 1 << j
                break
    return pairs


@dataclass(frozen=True)
class JaccardResult:
    jaccard: float
    jaccard_macro: float
    matched_pairs: int
    unmatched_gold: int
    unmatched_pred: int


def jaccard_score(gold: PredictionSet, pred: PredictionSet) -> JaccardResult:
    """Character-level Jaccard with per-message optimal assignment."""
    check_keys(gold, pred)
    total_contribution = 0.0
    total_denominator = 0
    matched = unmatched_gold = unmatched_pred = 0
    per_message: list[float] = []
    for key, gold_spans in gold.spans.items():
        pred_spans = pred.get(key)
        pairs = optimal_assignment(gold_spans, pred_spans)
        contribution = 0.0
        for gi, pi in pairs:
            inter = overlap(gold_spans[gi], pred_spans[pi])
            union = len(gold_spans[gi]) + len(pred_spans[pi]) - inter
            contribution += inter / union
        denominator = len(gold_spans) + len(pred_spans) - len(pairs)
        matched += len(pairs)
        unmatched_gold += len(gold_spans) - len(pairs)
        unmatched_pred += len(pred_spans) - len(pairs)
        total_contribution += contribution
        total_denominator += denominator
        if denominator:
            per_message.append(contribution / denominator)
    micro = total_contribution / total_denominator if total_denominator else 1.0
    macro = sum(per_message) / len(per_message) if per_message else 1.0
    return JaccardResult(micro, macro, matched, unmatched_gold, unmatched_pred)


# ---------------------------------------------------------------------------
# error categorization


@dataclass(frozen=True)
class ErrorBreakdown:
    exact: int = 0
    boundary_partial: int = 0
    split: int = 0
    merge: int = 0
    spurious: int = 0
    missed: int = 0

    def __add__(self, other: "ErrorBreakdown") -> "ErrorBreakdown":
        return ErrorBreakdown(*(getattr(self, f) + getattr(other, f)
                                for f in ("exact", "boundary_partial", "split",
                                          "merge", "spurious", "missed")))


def _categorize_one(gold: tuple[MentionSpan, ...],
                    pred: tuple[MentionSpan, ...]) -> ErrorBreakdown:
    overlaps_g = [[j for j, p in enumerate(pred) if overlap(g, p) > 0] for g in gold]
    overlaps_p = [[i for i, g in enumerate(gold) if overlap(g, p) > 0] for p in pred]
    gold_used = [False] * len(gold)
    pred_used = [False] * len(pred)
    exact = split = merge = boundary = 0
    # exact pairs first; identical spans cannot take part in split/merge
    for i, g in enumerate(gold):
        for j, p in enumerate(pred):
            if not pred_used[j] and g == p:
                gold_used[i] = pred_used[j] = True
                exact += 1
                break
    # precedence: split, then merge, then 1-to-1 boundary mismatches
    for i in range(len(gold)):
        if gold_used[i]:
            continue
        live = [j for j in overlaps_g[i] if not pred_used[j]]
        if len(live) >= 2:
            split += 1
            gold_used[i] = True
            for j in live:
                pred_used[j] = True
    for j in range(len(pred)):
        if pred_used[j]:
            continue
        live = [i for i in overlaps_p[j] if not gold_used[i]]
        if len(live) >= 2:
            merge += 1
            pred_used[j] = True
            for i in live:
                gold_used[i] = True
    for i in range(len(gold)):
        if gold_used[i]:
            continue
        live = [j for j in overlaps_g[i] if not pred_used[j]]
        if len(live) == 1:
            j = live[0]
            if [k for k in overlaps_p[j] if not gold_used[k]] == [i]:
                boundary += 1
                gold_used[i] = pred_used[j] = True
    # zero-overlap cases are judged on the raw overlap graph
    spurious = sum(1 for j in range(len(pred)) if not overlaps_p[j])
    missed = sum(1 for i in range(len(gold)) if not overlaps_g[i])
    return ErrorBreakdown(exact, boundary, split, merge, spurious, missed)


def categorize_errors(gold: PredictionSet, pred: PredictionSet) -> ErrorBreakdown:
    """Aggregate error categories over the corpus."""
    check_keys(gold, pred)
    total = ErrorBreakdown()
    for key, gold_spans in gold.spans.items():
        total = total + _categorize_one(gold_spans, pred.get(key))
    return total


# ---------------------------------------------------------------------------
# full report


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    jaccard: float
    jaccard_macro: float
    tp: int
    fp: int
    fn: int
    matched_pairs: int
    unmatched_gold: int
    unmatched_pred: int
    error_breakdown: ErrorBreakdown
    n_unparseable: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "jaccard": self.jaccard,
            "jaccard_macro": self.jaccard_macro,
            "counts": {
                "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "matched_pairs": self.matched_pairs,
                "unmatched_gold": self.unmatched_gold,
                "unmatched_pred": self.unmatched_pred,
                "unparseable_utterances": self.n_unparseable,
            },
            "error_breakdown": {
                "exact": self.error_breakdown.exact,
                "boundary_partial": self.error_breakdown.boundary_partial,
                "split": self.error_breakdown.split,
                "merge": self.error_breakdown.merge,
                "spurious": self.error_breakdown.spurious,
                "missed": self.error_breakdown.missed,
            },
        }


def evaluate(gold: PredictionSet, pred: PredictionSet) -> EvalReport:
    prf = exact_prf(gold, pred)
    jac = jaccard_score(gold, pred)
    errors = categorize_errors(gold, pred)
    return EvalReport(
        precision=prf.precision, recall=prf.recall, f1=prf.f1,
        jaccard=jac.jaccard, jaccard_macro=jac.jaccard_macro,
        tp=prf.tp, fp=prf.fp, fn=prf.fn,
        matched_pairs=jac.matched_pairs,
        unmatched_gold=jac.unmatched_gold, unmatched_pred=jac.unmatched_pred,
        error_breakdown=errors, n_unparseable=len(pred.failures),
    )


def render_report_table(report: EvalReport, title: str = "") -> str:
    """Plain-text table in P / R / F1 / J row order."""
    rows = [("P", report.precision), ("R", report.recall),
            ("F1", report.f1), ("J", report.jaccard)]
    lines = []
    if title:
        lines.append(title)
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        lines.append(f"{label:<{width}}  {value:.3f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# prediction file I/O


def load_predictions(path: str | Path) -> PredictionSet:
    """Read a JSONL prediction file.

    One record per utterance: ``{"dialogue_id": str, "index": int, "spans":
    [{"start": int, "end": int}, ...], "parse_error": str|null}``.
    """
    table: dict[Key, tuple[MentionSpan, ...]] = {}
    failures: dict[Key, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    key = (str(record["dialogue_id"]), int(record["index"]))
                    spans = tuple(sorted(MentionSpan(int(s["start"]), int(s["end"]))
                                         for s in record.get("spans", [])))
                except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                    raise IoError(f"{path}:{line_no}: bad prediction record: {exc!r}") from exc
                table[key] = spans
                if record.get("parse_error"):
                    failures[key] = str(record["parse_error"])
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return PredictionSet(spans=table, failures=failures)


def save_predictions(records: Iterable[tuple[Key, tuple[MentionSpan, ...], str | None]],
                     path: str | Path) -> int:
    """Write prediction records; returns the count written."""
    count = 0
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for (dialogue_id, index), spans, error in records:
                fh.write(json.dumps({
                    "dialogue_id": dialogue_id,
                    "index": index,
                    "spans": [{"start": s.start, "end": s.end} for s in spans],
                    "parse_error": error,
                }, ensure_ascii=False) + "\n")
                count += 1
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return count
