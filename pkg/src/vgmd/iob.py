"""Token-level IOB labeling for the sequence-labeling baseline.

Span annotations are projected onto an externally supplied tokenization view
(B = first token overlapping a span, I = further tokens of the same span,
O = outside). Context windows concatenate history tokens labeled IGNORE with
target tokens labeled normally, mirroring loss masking over the preceding
dialogue context. A whitespace view ships for tests; real subword views are
supplied by the consumer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .corpus import Corpus, Dialogue, MentionSpan, Utterance
from .errors import IndexOutOfRange, IoError, ViewMismatch
from .samples import WindowSpec

B, I, O, IGNORE = "B", "I", "O", "IGNORE"

# any: a token belongs to a span if it shares any character with it
# full: only tokens fully inside the span belong to it
OVERLAP_POLICIES = ("any", "full")


class Token(NamedTuple):
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenizationView:
    """Offsets of each token of a single utterance, left to right."""

    tokens: tuple[Token, ...]

    @classmethod
    def build(cls, utterance_text: str, offsets: Iterable[tuple[int, int]]) -> "TokenizationView":
        tokens = tuple(Token(utterance_text[s:e], s, e) for s, e in offsets)
        view = cls(tokens)
        view.check_against(utterance_text)
        return view

    def check_against(self, text: str) -> None:
        previous_end = -1
        for token in self.tokens:
            if not 0 <= token.start < token.end <= len(text):
                raise ViewMismatch(f"token offsets [{token.start}, {token.end}) out of bounds")
            if token.start < previous_end:
                raise ViewMismatch(f"token at {token.start} overlaps its predecessor")
            if text[token.start:token.end] != token.text:
                raise ViewMismatch(
                    f"token text {token.text!r} != substring "
                    f"{text[token.start:token.end]!r}")
            previous_end = token.end


def whitespace_view(text: str) -> TokenizationView:
    """Maximal non-whitespace runs as tokens."""
    return TokenizationView(tuple(
        Token(m.group(), m.start(), m.end()) for m in re.finditer(r"\S+", text)))


def to_iob(utterance: Utterance, view: TokenizationView,
           overlap_policy: str = "any") -> list[str]:
    """Project the utterance's spans onto the view's tokens."""
    if overlap_policy not in OVERLAP_POLICIES:
        raise ValueError(f"overlap_policy must be one of {OVERLAP_POLICIES}")
    view.check_against(utterance.text)
    labels = [O] * len(view.tokens)
    for span in utterance.mentions:
        first = True
        for position, token in enumerate(view.tokens):
            if overlap_policy == "any":
                inside = token.start < span.end and span.start < token.end
            else:
                inside = span.start <= token.start and token.end <= span.end
            if inside:
                labels[position] = B if first else I
                first = False
    return labels


class IobDecode(NamedTuple):
    spans: list[MentionSpan]
    repairs: int


def from_iob(labels: list[str], view: TokenizationView) -> IobDecode:
    """Recover spans from a label sequence.

    Maximal B I* runs become spans from first token start to last token end.
    An I with no live span opens one (lenient repair, counted, never silent).
    """
    if len(labels) != len(view.tokens):
        raise ViewMismatch(f"{len(labels)} labels for {len(view.tokens)} tokens")
    spans: list[MentionSpan] = []
    repairs = 0
    open_start: int | None = None
    open_end = 0
    for token, label in zip(view.tokens, labels):
        if label == B or (label == I and open_start is None):
            if label == I:
                repairs += 1
            if open_start is not None and label == B:
                spans.append(MentionSpan(open_start, open_end))
            open_start, open_end = token.start, token.end
        elif label == I:
            open_end = token.end
        elif label in (O, IGNORE):
            if open_start is not None:
                spans.append(MentionSpan(open_start, open_end))
                open_start = None
        else:
            raise ViewMismatch(f"unknown label {label!r}")
    if open_start is not None:
        spans.append(MentionSpan(open_start, open_end))
    return IobDecode(spans, repairs)


@dataclass(frozen=True)
class LabeledSequence:
    """Window token sequence with labels; history is IGNOREd."""

    tokens: tuple[Token, ...]
    labels: tuple[str, ...]
    target_range: tuple[int, int]  # [start, end) token indices of the target
    dialogue_id: str
    utterance_index: int


def build_labeled_window(dialogue: Dialogue, index: int, spec: WindowSpec,
                         views: Mapping[int, TokenizationView],
                         overlap_policy: str = "any") -> LabeledSequence:
    """Concatenate history tokens (IGNORE) with labeled target tokens."""
    if not 1 <= index <= len(dialogue.utterances):
        raise IndexOutOfRange(f"utterance index {index} outside dialogue")
    h = min(spec.w, index - 1)
    tokens: list[Token] = []
    labels: list[str] = []
    for history_index in range(index - h, index):
        view = _view_for(dialogue, history_index, views)
        tokens.extend(view.tokens)
        labels.extend([IGNORE] * len(view.tokens))
    target_start = len(tokens)
    target_view = _view_for(dialogue, index, views)
    target_labels = to_iob(dialogue.utterances[index - 1], target_view, overlap_policy)
    tokens.extend(target_view.tokens)
    labels.extend(target_labels)
    return LabeledSequence(
        tokens=tuple(tokens), labels=tuple(labels),
        target_range=(target_start, len(tokens)),
        dialogue_id=dialogue.dialogue_id, utterance_index=index)


def _view_for(dialogue: Dialogue, index: int,
              views: Mapping[int, TokenizationView]) -> TokenizationView:
    view = views.get(index)
    if view is None:
        raise ViewMismatch(f"no tokenization view for utterance {index}")
    view.check_against(dialogue.utterances[index - 1].text)
    return view


# ---------------------------------------------------------------------------
# CoNLL-like export


def export_conll(corpus: Corpus, spec: WindowSpec, path: str | Path,
                 views_for=None, overlap_policy: str = "any") -> int:
    """Write one block per (utterance, window), blank-line separated.

    Block header: ``# dialogue=<id> index=<n> target=<a>:<b>``; lines are
    ``token<TAB>start<TAB>end<TAB>label``. The header keys re-imported blocks
    back to corpus utterances. ``views_for(dialogue)`` supplies per-utterance
    views (whitespace tokenization by default). Returns the block count.
    """
    if views_for is None:
        def views_for(dialogue: Dialogue) -> dict[int, TokenizationView]:
            return {u.index: whitespace_view(u.text) for u in dialogue.utterances}
    blocks = 0
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for dialogue in corpus.dialogues:
                views = views_for(dialogue)
                for index in range(1, len(dialogue.utterances) + 1):
                    window = build_labeled_window(dialogue, index, spec, views, overlap_policy)
                    a, b = window.target_range
                    fh.write(f"# dialogue={dialogue.dialogue_id} index={index} target={a}:{b}\n")
                    for token, label in zip(window.tokens, window.labels):
                        fh.write(f"{token.text}\t{token.start}\t{token.end}\t{label}\n")
                    fh.write("\n")
                    blocks += 1
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return blocks


def import_conll(path: str | Path) -> list[LabeledSequence]:
    """Inverse of export_conll (labels as found in the file)."""
    sequences: list[LabeledSequence] = []
    header_re = re.compile(r"# dialogue=(.*) index=(\d+) target=(\d+):(\d+)$")
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    current: list[tuple[Token, str]] | None = None
    meta: tuple[str, int, int, int] | None = None

    def flush() -> None:
        if current is not None and meta is not None:
            dialogue_id, index, a, b = meta
            sequences.append(LabeledSequence(
                tokens=tuple(t for t, _ in current),
                labels=tuple(label for _, label in current),
                target_range=(a, b), dialogue_id=dialogue_id, utterance_index=index))

    for line in lines:
        if not line.strip():
            flush()
            current, meta = None, None
            continue
        match = header_re.match(line)
        if match:
            flush()
            meta = (match.group(1), int(match.group(2)), int(match.group(3)),
                    int(match.group(4)))
            current = []
            continue
        parts = line.split("\t")
        if len(parts) != 4 or current is None:
            raise IoError(f"{path}: malformed line {line!r}")
        current.append((Token(parts[0], int(parts[1]), int(parts[2])), parts[3]))
    flush()
    return sequences
