"""Marker-annotated reproduction grammar for utterances.

An annotated reproduction is a verbatim copy of an utterance with span
boundary markers inserted around each mention, e.g.::

    then, for the third one, is >> the dark grey << one okay?

Canonical padding rule (``pad_with_space`` on): a marker inserted at a word
boundary is written as a space-separated token; an insertion point inside a
word gets the bare marker with no padding. Concretely, a start marker at
position ``p`` is rendered ``">> "`` when ``p`` is 0 or preceded by
whitespace, else ``">>"``; an end marker at position ``p`` is rendered
``" <<"`` when ``p`` is at end of text or followed by whitespace, else
``"<<"``. With padding off both markers are always bare.

:func:`parse` is the strict inverse: it accepts exactly the canonical
renders, scanning left to right with marker detection taking precedence over
content matching, and reports structured errors for anything else.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import MentionSpan
from .errors import (
    ContentMismatch,
    EmptySpan,
    MarkerCollision,
    TrailingContent,
    UnbalancedMarkers,
    VgmdError,
)

DEFAULT_START_MARKER = ">>"
DEFAULT_END_MARKER = "<<"


@dataclass(frozen=True)
class MarkerConfig:
    start_marker: str = DEFAULT_START_MARKER
    end_marker: str = DEFAULT_END_MARKER
    pad_with_space: bool = True

    def __post_init__(self) -> None:
        if not self.start_marker or not self.end_marker:
            raise ValueError("markers must be nonempty")
        if self.start_marker == self.end_marker:
            raise ValueError("markers must be distinct")
        if self.start_marker in self.end_marker or self.end_marker in self.start_marker:
            raise ValueError("neither marker may be a substring of the other")


DEFAULT_CONFIG = MarkerConfig()


@dataclass(frozen=True)
class AnnotatedUtterance:
    """An utterance together with its canonical annotated form."""

    original: str
    annotated: str
    spans: tuple[MentionSpan, ...]

    @classmethod
    def from_spans(cls, original: str, spans: list[MentionSpan] | tuple[MentionSpan, ...],
                   cfg: MarkerConfig = DEFAULT_CONFIG) -> "AnnotatedUtterance":
        ordered = tuple(sorted(spans))
        return cls(original=original, annotated=render(original, list(ordered), cfg),
                   spans=ordered)


def check_collision(text: str, cfg: MarkerConfig = DEFAULT_CONFIG) -> None:
    """Raise MarkerCollision if text contains either marker string."""
    for marker in (cfg.start_marker, cfg.end_marker):
        if marker in text:
            raise MarkerCollision(
                f"text contains marker {marker!r} at offset {text.index(marker)}")


def start_insertion(original: str, p: int, cfg: MarkerConfig) -> str:
    """Canonical text inserted for a span start at offset p."""
    at_boundary = p == 0 or original[p - 1].isspace()
    if cfg.pad_with_space and at_boundary:
        return cfg.start_marker + " "
    return cfg.start_marker


def end_insertion(original: str, p: int, cfg: MarkerConfig) -> str:
    """Canonical text inserted for a span end at offset p."""
    at_boundary = p == len(original) or original[p].isspace()
    if cfg.pad_with_space and at_boundary:
        return " " + cfg.end_marker
    return cfg.end_marker


def render(original: str, spans: list[MentionSpan] | tuple[MentionSpan, ...],
           cfg: MarkerConfig = DEFAULT_CONFIG) -> str:
    """Insert canonical span markers into the original text.

    Spans must be valid against the original (in-bounds, non-overlapping,
    non-nested); they may be given in any order.
    """
    check_collision(original, cfg)
    ordered = sorted(spans)
    previous_end = 0
    for span in ordered:
        if span.end > len(original):
            raise ValueError(f"span [{span.start}, {span.end}) exceeds text length")
        if span.start < previous_end:
            raise ValueError("spans overlap or nest")
        previous_end = span.end
    parts: list[str] = []
    cursor = 0
    for span in ordered:
        parts.append(original[cursor:span.start])
        parts.append(start_insertion(original, span.start, cfg))
        parts.append(original[span.start:span.end])
        parts.append(end_insertion(original, span.end, cfg))
        cursor = span.end
    parts.append(original[cursor:])
    return "".join(parts)


def parse(annotated: str, original: str, cfg: MarkerConfig = DEFAULT_CONFIG) -> list[MentionSpan]:
    """Recover mention spans from a canonical annotated reproduction.

    Left-to-right scan trying a canonical marker insertion before a content
    character at every offset, with backtracking when a committed marker
    reading dead-ends (a pad space is indistinguishable from a content space
    until a few characters later). Succeeds iff the entire original is
    reproduced, markers are balanced and non-nested, and every span is
    nonempty. On failure the error from the furthest-reaching reading is
    raised.

    Marker-first order makes the result deterministic. A handful of inputs
    render identically for two different span sets (spans whose edge
    characters are whitespace, or text abutting marker-prefix characters
    like a lone ``>``); those strings resolve to the leftmost marker reading.
    """
    check_collision(original, cfg)
    n = len(original)
    starts = [start_insertion(original, p, cfg) for p in range(n)]
    ends = [end_insertion(original, p, cfg) for p in range(n + 1)]
    spans: list[MentionSpan] = []
    # choice points: (annotated offset, original offset, open span start or -1,
    #                 committed span count, skip the marker alternative)
    stack: list[tuple[int, int, int, int, bool]] = [(0, 0, -1, 0, False)]
    furthest: tuple[int, VgmdError | None] = (-1, None)

    def note(i: int, exc: VgmdError) -> None:
        nonlocal furthest
        if i > furthest[0]:
            furthest = (i, exc)

    while stack:
        i, p, ss, committed, content_only = stack.pop()
        del spans[committed:]
        while True:
            insertion = None
            if ss < 0:
                if p < n and annotated.startswith(starts[p], i):
                    insertion = (starts[p], p, None)
            elif p > ss and annotated.startswith(ends[p], i):
                insertion = (ends[p], -1, MentionSpan(ss, p))
            if insertion is not None and not content_only:
                stack.append((i, p, ss, len(spans), True))  # content alternative
                text, ss, closed = insertion
                if closed is not None:
                    spans.append(closed)
                i += len(text)
                continue
            content_only = False
            if ss >= 0 and p == ss and _marker_ahead(annotated, i, cfg.end_marker, cfg):
                note(i, EmptySpan(f"empty span at original offset {p}"))
            if ss >= 0 and _marker_ahead(annotated, i, cfg.start_marker, cfg):
                note(i, UnbalancedMarkers(f"nested start marker at annotated offset {i}"))
            if ss < 0 and p == n and _marker_ahead(annotated, i, cfg.start_marker, cfg):
                note(i, EmptySpan("span opened at end of text"))
            if p < n:
                if i < len(annotated) and annotated[i] == original[p]:
                    i += 1
                    p += 1
                    continue
                if i >= len(annotated):
                    note(i, ContentMismatch(
                        f"annotated string ends before original offset {p}", p))
                else:
                    note(i, ContentMismatch(
                        f"annotated {annotated[i]!r} != original {original[p]!r} "
                        f"at original offset {p}", p))
                break
            if ss >= 0:
                note(i, UnbalancedMarkers(f"span opened at {ss} never closed"))
                break
            if i < len(annotated):
                if _marker_ahead(annotated, i, cfg.end_marker, cfg):
                    note(i, UnbalancedMarkers(
                        f"end marker without open span at annotated offset {i}"))
                else:
                    note(i, TrailingContent(
                        f"{len(annotated) - i} unexpected trailing characters"))
                break
            return spans
    assert furthest[1] is not None
    raise furthest[1]


def _marker_ahead(annotated: str, i: int, marker: str, cfg: MarkerConfig) -> bool:
    if annotated.startswith(marker, i):
        return True
    return cfg.pad_with_space and annotated.startswith(" " + marker, i)


def strip_markers(annotated: str, cfg: MarkerConfig = DEFAULT_CONFIG) -> str:
    """Best-effort removal of markers and their canonical pad spaces.

    This is the original-content projection used by parse; it never fails.
    """
    out: list[str] = []
    i = 0
    sm, em = cfg.start_marker, cfg.end_marker
    while i < len(annotated):
        if cfg.pad_with_space and annotated.startswith(" " + em, i):
            i += 1 + len(em)
        elif annotated.startswith(em, i):
            i += len(em)
        elif annotated.startswith(sm, i):
            i += len(sm)
            if cfg.pad_with_space and i < len(annotated) and annotated[i] == " ":
                i += 1
        else:
            out.append(annotated[i])
            i += 1
    return "".join(out)
