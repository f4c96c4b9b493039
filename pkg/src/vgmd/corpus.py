"""Canonical data model for visually grounded dialogues with mention spans.

A corpus is a list of dialogues; a dialogue is an ordered list of utterances
exchanged by speakers A and B; each utterance carries zero or more mention
spans given as character offsets (Unicode scalar indices, never bytes). The
visual context is carried only as an opaque image-set identifier.

The canonical file format is UTF-8 JSON, documented in :func:`load_corpus`.
All types are immutable values; all operations are pure functions.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import InvariantViolation, MalformedFile

SPEAKERS = ("A", "B")


@dataclass(frozen=True, order=True)
class MentionSpan:
    """Half-open character span [start, end) into its owning utterance."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise InvariantViolation(f"span [{self.start}, {self.end}) is empty or negative")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Utterance:
    """One message: 1-based index, speaker, text, and sorted mention spans."""

    index: int
    speaker: str
    text: str
    mentions: tuple[MentionSpan, ...] = ()


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    image_set_id: str
    category: str | None
    utterances: tuple[Utterance, ...]


@dataclass(frozen=True)
class Corpus:
    dataset_id: str
    dialogues: tuple[Dialogue, ...]


@dataclass(frozen=True)
class Violation:
    """One broken invariant with a machine-readable code and location."""

    code: str
    message: str
    dialogue_id: str | None = None
    utterance_index: int | None = None
    span: MentionSpan | None = None

    def __str__(self) -> str:
        where = ""
        if self.dialogue_id is not None:
            where = f" [dialogue={self.dialogue_id}"
            if self.utterance_index is not None:
                where += f" utterance={self.utterance_index}"
            where += "]"
        return f"{self.code}: {self.message}{where}"


def validate(corpus: Corpus) -> list[Violation]:
    """Return every broken invariant in the corpus (empty list iff valid)."""
    violations: list[Violation] = []
    seen_ids: set[str] = set()
    for dialogue in corpus.dialogues:
        if dialogue.dialogue_id in seen_ids:
            violations.append(
                Violation("DuplicateDialogueId", f"dialogue id {dialogue.dialogue_id!r} repeats",
                          dialogue_id=dialogue.dialogue_id))
        seen_ids.add(dialogue.dialogue_id)
        if not dialogue.utterances:
            violations.append(
                Violation("EmptyDialogue", "dialogue has no utterances",
                          dialogue_id=dialogue.dialogue_id))
        for pos, utterance in enumerate(dialogue.utterances, start=1):
            violations.extend(_validate_utterance(dialogue.dialogue_id, pos, utterance))
    return violations


def _validate_utterance(dialogue_id: str, expected_index: int, utt: Utterance) -> Iterator[Violation]:
    if utt.index != expected_index:
        yield Violation("NonContiguousIndex",
                        f"utterance index {utt.index} where {expected_index} expected",
                        dialogue_id, utt.index)
    if utt.speaker not in SPEAKERS:
        yield Violation("BadSpeaker", f"speaker {utt.speaker!r} not in {SPEAKERS}",
                        dialogue_id, utt.index)
    if not utt.text and utt.mentions:
        yield Violation("MentionsInEmptyText", "empty message cannot carry mentions",
                        dialogue_id, utt.index)
    n = len(utt.text)
    previous: MentionSpan | None = None
    for span in utt.mentions:
        if span.end > n:
            yield Violation("SpanOutOfBounds",
                            f"span [{span.start}, {span.end}) exceeds text length {n}",
                            dialogue_id, utt.index, span)
        if previous is not None:
            if span.start < previous.start or (span.start == previous.start and span.end < previous.end):
                yield Violation("MentionsUnsorted", "mentions not sorted by start",
                                dialogue_id, utt.index, span)
            nested = (previous.start <= span.start and span.end <= previous.end) or (
                span.start <= previous.start and previous.end <= span.end)
            if nested:
                yield Violation("NestingViolation",
                                f"span [{span.start}, {span.end}) nested with "
                                f"[{previous.start}, {previous.end})",
                                dialogue_id, utt.index, span)
            elif span.start < previous.end:
                yield Violation("OverlapViolation",
                                f"span [{span.start}, {span.end}) overlaps "
                                f"[{previous.start}, {previous.end})",
                                dialogue_id, utt.index, span)
        previous = span


# ---------------------------------------------------------------------------
# canonical file format


def load_corpus(path: str | Path, format: str = "canonical") -> Corpus:
    """Load and validate a corpus from its canonical UTF-8 JSON file.

    Schema: ``{"dataset_id": str, "dialogues": [{"dialogue_id": str,
    "image_set_id": str, "category": str|null, "utterances": [{"index": int,
    "speaker": "A"|"B", "text": str, "mentions": [{"start": int, "end": int},
    ...]}, ...]}, ...]}``. Offsets are Unicode scalar indices. Fails
    atomically: any invariant violation raises and nothing is returned.
    """
    if format != "canonical":
        raise MalformedFile(f"unknown corpus format {format!r}")
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: not valid JSON: {exc}") from exc
    corpus = corpus_from_dict(doc)
    violations = validate(corpus)
    if violations:
        detail = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        raise InvariantViolation(f"{path}: {detail}{more}")
    return corpus


def corpus_from_dict(doc: object) -> Corpus:
    """Build a Corpus from parsed JSON, raising MalformedFile on shape errors."""
    if not isinstance(doc, dict):
        raise MalformedFile("top level must be an object")
    try:
        dialogues = []
        for d in doc["dialogues"]:
            utterances = []
            for u in d["utterances"]:
                try:
                    mentions = tuple(sorted(
                        MentionSpan(int(m["start"]), int(m["end"])) for m in u.get("mentions", [])
                    ))
                except InvariantViolation as exc:
                    raise InvariantViolation(
                        f"{exc} [dialogue={d.get('dialogue_id')!r} "
                        f"utterance={u.get('index')!r}]") from None
                utterances.append(Utterance(
                    index=int(u["index"]), speaker=str(u["speaker"]),
                    text=str(u["text"]), mentions=mentions))
            dialogues.append(Dialogue(
                dialogue_id=str(d["dialogue_id"]),
                image_set_id=str(d["image_set_id"]),
                category=None if d.get("category") is None else str(d["category"]),
                utterances=tuple(utterances)))
        return Corpus(dataset_id=str(doc["dataset_id"]), dialogues=tuple(dialogues))
    except InvariantViolation:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"canonical schema violated: {exc!r}") from exc


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "dataset_id": corpus.dataset_id,
        "dialogues": [
            {
                "dialogue_id": d.dialogue_id,
                "image_set_id": d.image_set_id,
                "category": d.category,
                "utterances": [
                    {
                        "index": u.index,
                        "speaker": u.speaker,
                        "text": u.text,
                        "mentions": [{"start": m.start, "end": m.end} for m in u.mentions],
                    }
                    for u in d.utterances
                ],
            }
            for d in corpus.dialogues
        ],
    }


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the byte-stable canonical serialization (load o save = identity)."""
    text = json.dumps(corpus_to_dict(corpus), ensure_ascii=False, indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# descriptive statistics


@dataclass(frozen=True)
class StatsReport:
    """Corpus-level descriptive statistics.

    Characters are Unicode scalars including spaces; words are maximal
    non-whitespace runs; mention counts are measured over the span substring.
    Percentages are stored unrounded in [0, 100]; standard deviations are
    population (divide by N).
    """

    n_dialogues: int
    n_messages: int
    n_mentions: int
    n_chars: int
    n_words: int
    pct_messages_with_mention: float
    pct_messages_with_multiple: float
    chars_in_mentions: int
    pct_chars_in_mentions: float
    words_in_mentions: int
    pct_words_in_mentions: float
    mean_chars_per_message: float
    sd_chars_per_message: float
    mean_chars_per_mention: float
    sd_chars_per_mention: float
    mean_words_per_message: float
    sd_words_per_message: float
    mean_words_per_mention: float
    sd_words_per_mention: float

    def __post_init__(self) -> None:
        counts = (self.n_dialogues, self.n_messages, self.n_mentions, self.n_chars,
                  self.n_words, self.chars_in_mentions, self.words_in_mentions)
        if any(c < 0 for c in counts):
            raise InvariantViolation("negative count in stats report")
        pcts = (self.pct_messages_with_mention, self.pct_messages_with_multiple,
                self.pct_chars_in_mentions, self.pct_words_in_mentions)
        if any(not 0.0 <= p <= 100.0 for p in pcts):
            raise InvariantViolation("percentage outside [0, 100]")


def count_words(text: str) -> int:
    return len(text.split())


def _pct(part: float, whole: float) -> float:
    return 100.0 * part / whole if whole else 0.0


def _mean_sd(values: list[int]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    mean = statistics.fmean(values)
    sd = statistics.pstdev(values) if len(values) > 1 else 0.0
    return mean, sd


def compute_stats(corpus: Corpus) -> StatsReport:
    """Descriptive statistics over a valid corpus (0/0 ratios defined as 0)."""
    chars_per_message: list[int] = []
    words_per_message: list[int] = []
    chars_per_mention: list[int] = []
    words_per_mention: list[int] = []
    messages_with_mention = 0
    messages_with_multiple = 0
    chars_in_mentions_per_message: list[int] = []
    words_in_mentions_per_message: list[int] = []

    for dialogue in corpus.dialogues:
        for utt in dialogue.utterances:
            chars_per_message.append(len(utt.text))
            words_per_message.append(count_words(utt.text))
            if utt.mentions:
                messages_with_mention += 1
            if len(utt.mentions) > 1:
                messages_with_multiple += 1
            mention_chars = 0
            mention_words = 0
            for span in utt.mentions:
                substring = utt.text[span.start:span.end]
                chars_per_mention.append(len(substring))
                words_per_mention.append(count_words(substring))
                mention_chars += len(substring)
                mention_words += count_words(substring)
            chars_in_mentions_per_message.append(mention_chars)
            words_in_mentions_per_message.append(mention_words)

    n_messages = len(chars_per_message)
    n_mentions = len(chars_per_mention)
    n_chars = sum(chars_per_message)
    n_words = sum(words_per_message)
    chars_in_mentions = sum(chars_in_mentions_per_message)
    words_in_mentions = sum(words_in_mentions_per_message)
    mean_cm, sd_cm = _mean_sd(chars_per_message)
    mean_cn, sd_cn = _mean_sd(chars_per_mention)
    mean_wm, sd_wm = _mean_sd(words_per_message)
    mean_wn, sd_wn = _mean_sd(words_per_mention)

    return StatsReport(
        n_dialogues=len(corpus.dialogues),
        n_messages=n_messages,
        n_mentions=n_mentions,
        n_chars=n_chars,
        n_words=n_words,
        pct_messages_with_mention=_pct(messages_with_mention, n_messages),
        pct_messages_with_multiple=_pct(messages_with_multiple, n_messages),
        chars_in_mentions=chars_in_mentions,
        pct_chars_in_mentions=_pct(chars_in_mentions, n_chars),
        words_in_mentions=words_in_mentions,
        pct_words_in_mentions=_pct(words_in_mentions, n_words),
        mean_chars_per_message=mean_cm,
        sd_chars_per_message=sd_cm,
        mean_chars_per_mention=mean_cn,
        sd_chars_per_mention=sd_cn,
        mean_words_per_message=mean_wm,
        sd_words_per_message=sd_wm,
        mean_words_per_mention=mean_wn,
        sd_words_per_mention=sd_wn,
    )
