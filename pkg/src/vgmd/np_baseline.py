"""NP-extraction baseline over externally produced constituency parses.

Reads bracketed trees (Penn Treebank style), aligns their leaves back to the
raw utterance, extracts the most expansive noun phrases (NP nodes with no NP
ancestor), and drops first/second-person pronouns, which cannot refer to the
visual context in these text-only settings. The parser itself is an external
input; only its bracketed output format is consumed here.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import Corpus, MentionSpan
from .errors import IoError, LeafAlignmentFailure, UnbalancedBrackets
from .metrics import Key

# PTB-style token normalizations mapped back to raw text
PTB_SUBSTITUTIONS = {
    "-LRB-": "(", "-RRB-": ")",
    "-LSB-": "[", "-RSB-": "]",
    "-LCB-": "{", "-RCB-": "}",
    "``": '"', "''": '"',
}

DEFAULT_PRONOUN_STOPLIST = frozenset(
    {"i", "you", "me", "we", "us", "my", "your", "our", "mine", "yours", "ours"})


@dataclass(frozen=True)
class ParseTree:
    """Constituency node; leaves carry character offsets into the utterance."""

    label: str
    children: tuple["ParseTree", ...] = ()
    token: str | None = None
    start: int = 0
    end: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.token is not None


def _tokenize_brackets(bracketed: str) -> list[str]:
    return re.findall(r"\(|\)|[^\s()]+", bracketed)


def parse_ptb(bracketed: str, utterance: str) -> ParseTree:
    """Parse one bracketed tree and align its leaves to the utterance.

    Alignment is greedy left to right with whitespace skipping; tokens the
    parser normalized (brackets, quotes) are mapped back via a small table.
    """
    tokens = _tokenize_brackets(bracketed)
    if not tokens:
        raise UnbalancedBrackets("empty parse string")
    position = 0  # char cursor into the utterance

    def align_leaf(token: str) -> tuple[str, int, int]:
        nonlocal position
        while position < len(utterance) and utterance[position].isspace():
            position += 1
        for candidate in (token, PTB_SUBSTITUTIONS.get(token)):
            if candidate is not None and utterance.startswith(candidate, position):
                start = position
                position += len(candidate)
                return candidate, start, position
        raise LeafAlignmentFailure(
            f"leaf {token!r} does not match utterance at offset {position}: "
            f"{utterance[position:position + 20]!r}...")

    index = 0

    def parse_node() -> ParseTree:
        nonlocal index
        if tokens[index] != "(":
            raise UnbalancedBrackets(f"expected '(' at token {index}")
        index += 1
        if index >= len(tokens) or tokens[index] in ("(", ")"):
            raise UnbalancedBrackets("node without a label")
        label = tokens[index]
        index += 1
        children: list[ParseTree] = []
        bare_tokens = 0
        while index < len(tokens) and tokens[index] != ")":
            if tokens[index] == "(":
                children.append(parse_node())
            else:
                text, start, end = align_leaf(tokens[index])
                children.append(ParseTree(label=label, token=text, start=start, end=end))
                bare_tokens += 1
                index += 1
        if index >= len(tokens):
            raise UnbalancedBrackets("unclosed bracket")
        index += 1  # consume ')'
        if not children:
            raise UnbalancedBrackets(f"node {label!r} has no children")
        if len(children) == 1 and bare_tokens == 1:
            return children[0]  # true preterminal (LABEL token)
        return ParseTree(label=label, children=tuple(children),
                         start=children[0].start, end=children[-1].end)

    root = parse_node()
    if index != len(tokens):
        raise UnbalancedBrackets(f"{len(tokens) - index} tokens after root closes")
    return root


def _base_label(label: str) -> str:
    # strip PTB function tags (NP-SBJ) and indices (NP=2, NP-1)
    return re.split(r"[-=]", label, maxsplit=1)[0]


def extract_maximal_nps(tree: ParseTree) -> list[MentionSpan]:
    """Spans of NP nodes having no NP ancestor, left to right."""
    spans: list[MentionSpan] = []

    def walk(node: ParseTree) -> None:
        if _base_label(node.label) == "NP":
            spans.append(MentionSpan(node.start, node.end))
            return
        for child in node.children:
            walk(child)

    walk(tree)
    return spans


def filter_pronouns(spans: Iterable[MentionSpan], utterance: str,
                    stoplist: frozenset[str] = DEFAULT_PRONOUN_STOPLIST,
                    ) -> list[MentionSpan]:
    """Drop spans whose case-folded, trimmed text is a stoplisted pronoun."""
    return [span for span in spans
            if utterance[span.start:span.end].strip().casefold() not in stoplist]


# ---------------------------------------------------------------------------
# tree file -> prediction records


def load_trees(path: str | Path) -> dict[Key, str]:
    """Read JSONL tree records {"dialogue_id": str, "index": int, "tree": str}."""
    trees: dict[Key, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    trees[(str(record["dialogue_id"]), int(record["index"]))] = \
                        str(record["tree"])
                except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                    raise IoError(f"{path}:{line_no}: bad tree record: {exc!r}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return trees


def run_np_baseline(corpus: Corpus, trees: dict[Key, str],
                    stoplist: frozenset[str] = DEFAULT_PRONOUN_STOPLIST,
                    ) -> list[tuple[Key, tuple[MentionSpan, ...], str | None]]:
    """Predict spans for every utterance that has a tree record.

    Unparseable or unalignable trees yield a record with parse_error set, so
    downstream evaluation can score them as zero predictions.
    """
    records: list[tuple[Key, tuple[MentionSpan, ...], str | None]] = []
    texts: dict[Key, str] = {}
    for dialogue in corpus.dialogues:
        for utt in dialogue.utterances:
            texts[(dialogue.dialogue_id, utt.index)] = utt.text
    for key, bracketed in trees.items():
        text = texts.get(key)
        if text is None:
            records.append((key, (), "UtteranceNotInCorpus"))
            continue
        try:
            tree = parse_ptb(bracketed, text)
            spans = filter_pronouns(extract_maximal_nps(tree), text, stoplist)
            records.append((key, tuple(sorted(spans)), None))
        except (UnbalancedBrackets, LeafAlignmentFailure) as exc:
            records.append((key, (), exc.code))
    return records
