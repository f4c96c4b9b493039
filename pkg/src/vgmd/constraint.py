"""Constrained-decoding automaton for annotated reproductions.

Given a token vocabulary and a target string, a :class:`Session` tracks which
token emissions keep the decoded byte stream a prefix of *some* canonical
annotated form of the target (any set of non-overlapping, non-nested,
nonempty spans, rendered by :mod:`vgmd.grammar`). A terminated session has
therefore produced a complete, parseable annotated reproduction.

Matching is byte-level. Because a decoded prefix can be consistent with more
than one reading (a space may be target content or the canonical pad of a
marker insertion; a marker-prefix character may open a marker or be content),
a session keeps the small set of all live automaton states rather than a
single one. Mask computation walks the vocabulary's byte trie in lockstep
with that state set, so its cost scales with the number of tokens matching
the remaining target, not with vocabulary size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DisallowedToken, MalformedVocab, MarkerNotInVocab, SessionDone
from .grammar import DEFAULT_CONFIG, MarkerConfig, check_collision, end_insertion, start_insertion

_LEAF = -1  # trie key holding token ids that end at this node

# NFA state tuples. Boundary states sit between emission units:
#   (p, ss)            p chars of target consumed; ss = open span start or -1
# Mid-unit states are partway through one unit's byte string:
#   (p, ss, kind, off) kind: content char / start insertion / end insertion
_CONTENT, _START, _END = 0, 1, 2


class Vocab:
    """Immutable token table: id -> byte expansion, plus special roles."""

    def __init__(self, entries: Mapping[int, bytes], start_marker_ids: Iterable[int],
                 end_marker_ids: Iterable[int], eos_id: int,
                 cfg: MarkerConfig = DEFAULT_CONFIG):
        self.entries: dict[int, bytes] = {int(i): bytes(b) for i, b in entries.items()}
        self.start_marker_ids = frozenset(int(i) for i in start_marker_ids)
        self.end_marker_ids = frozenset(int(i) for i in end_marker_ids)
        self.eos_id = int(eos_id)
        self.cfg = cfg
        self._validate()
        self._trie: dict = {}
        for token_id, expansion in self.entries.items():
            if token_id == self.eos_id:
                continue  # eos never matches as content
            node = self._trie
            for byte in expansion:
                node = node.setdefault(byte, {})
            node.setdefault(_LEAF, []).append(token_id)

    def _validate(self) -> None:
        if self.eos_id in self.start_marker_ids or self.eos_id in self.end_marker_ids:
            raise MalformedVocab("eos_id cannot double as a marker id")
        for ids, marker in ((self.start_marker_ids, self.cfg.start_marker),
                            (self.end_marker_ids, self.cfg.end_marker)):
            for token_id in ids:
                expansion = self.entries.get(token_id)
                if expansion is None:
                    raise MarkerNotInVocab(f"marker id {token_id} not in entries")
                try:
                    text = expansion.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise MarkerNotInVocab(f"marker id {token_id} is not UTF-8") from exc
                if text != marker and text != " " + marker:
                    raise MarkerNotInVocab(
                        f"marker id {token_id} expands to {text!r}, expected "
                        f"{marker!r} with optional single leading space")

    def __len__(self) -> int:
        return len(self.entries)


def load_vocab(path: str | Path, cfg: MarkerConfig = DEFAULT_CONFIG) -> Vocab:
    """Load a vocabulary file.

    Format: UTF-8 JSON ``{"entries": {"<id>": [byte, ...], ...}, "special":
    {"start_marker_ids": [...], "end_marker_ids": [...], "eos_id": int}}``.
    Unknown top-level keys (e.g. an exporter's content digest) are ignored.
    """
    def reject_duplicates(pairs):
        keys = [k for k, _ in pairs]
        if len(keys) != len(set(keys)):
            raise MalformedVocab(f"{path}: duplicate keys in object")
        return dict(pairs)

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"),
                         object_pairs_hook=reject_duplicates)
    except OSError as exc:
        raise MalformedVocab(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedVocab(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "entries" not in doc or "special" not in doc:
        raise MalformedVocab(f"{path}: need top-level 'entries' and 'special'")
    special = doc["special"]
    if not isinstance(special, dict) or "eos_id" not in special:
        raise MalformedVocab(f"{path}: special section must declare eos_id")
    try:
        entries: dict[int, bytes] = {}
        for key, values in doc["entries"].items():
            token_id = int(key)
            if not all(isinstance(v, int) and 0 <= v <= 255 for v in values):
                raise MalformedVocab(f"{path}: token {key} has non-byte values")
            entries[token_id] = bytes(values)
    except (TypeError, ValueError, AttributeError) as exc:
        raise MalformedVocab(f"{path}: bad entries table: {exc!r}") from exc
    try:
        return Vocab(entries,
                     special.get("start_marker_ids", []),
                     special.get("end_marker_ids", []),
                     int(special["eos_id"]), cfg)
    except (TypeError, ValueError) as exc:
        raise MalformedVocab(f"{path}: bad special section: {exc!r}") from exc


@dataclass(frozen=True)
class TokenMask:
    allowed: frozenset[int]

    def __contains__(self, token_id: int) -> bool:
        return token_id in self.allowed

    def sorted(self) -> list[int]:
        return sorted(self.allowed)


class Session:
    """Single decode against one target; single-owner mutable state.

    ``target`` is the completion's original-content projection (speaker
    prefix plus utterance text). Many sessions may run in parallel against
    one shared Vocab; one session must not be shared across threads.
    """

    def __init__(self, target: str, cfg: MarkerConfig = DEFAULT_CONFIG):
        check_collision(target, cfg)
        self.target = target
        self.cfg = cfg
        self.done = False
        self._n = len(target)
        self._chars = [ch.encode("utf-8") for ch in target]
        self._start_units = [start_insertion(target, p, cfg).encode("utf-8")
                             for p in range(len(target))]
        self._end_units = [end_insertion(target, p, cfg).encode("utf-8")
                           for p in range(len(target) + 1)]
        self._states: tuple[tuple, ...] = ((0, -1),)
        self._emitted = bytearray()
        self.token_ids: list[int] = []
        # per-vocab memo of admissible tokens from each automaton state; the
        # state space is O(len(target)^2) so this stays small
        self._mask_cache: dict = {}

    # -- automaton ---------------------------------------------------------

    def _step(self, states, byte: int) -> list[tuple]:
        # hot path: one transition per live state per candidate unit
        out: list[tuple] = []
        chars, starts, ends, n = self._chars, self._start_units, self._end_units, self._n
        for state in states:
            if len(state) == 2:
                p, ss = state
                if p < n:
                    unit = chars[p]
                    if unit[0] == byte:
                        nxt = (p + 1, ss) if len(unit) == 1 else (p, ss, _CONTENT, 1)
                        if nxt not in out:
                            out.append(nxt)
                    if ss < 0:
                        unit = starts[p]
                        if unit[0] == byte:
                            nxt = (p, p) if len(unit) == 1 else (p, ss, _START, 1)
                            if nxt not in out:
                                out.append(nxt)
                if ss >= 0 and p > ss:
                    unit = ends[p]
                    if unit[0] == byte:
                        nxt = (p, -1) if len(unit) == 1 else (p, ss, _END, 1)
                        if nxt not in out:
                            out.append(nxt)
            else:
                p, ss, kind, off = state
                unit = chars[p] if kind == _CONTENT else (
                    starts[p] if kind == _START else ends[p])
                if unit[off] == byte:
                    off += 1
                    if off == len(unit):
                        nxt = (p + 1, ss) if kind == _CONTENT else (
                            (p, p) if kind == _START else (p, -1))
                    else:
                        nxt = (p, ss, kind, off)
                    if nxt not in out:
                        out.append(nxt)
        return out

    def _consume(self, expansion: bytes):
        states = self._states
        for byte in expansion:
            states = self._step(states, byte)
            if not states:
                return None
        return tuple(states)

    def _at_terminal(self) -> bool:
        return (self._n, -1) in self._states

    # -- diagnostics -------------------------------------------------------

    @property
    def _representative(self) -> tuple:
        # most-advanced live reading; unique whenever the prefix is unambiguous
        def key(state):
            if len(state) == 2:
                return (state[0], 0, 0, state[1])
            return (state[0], 1, state[3], state[1])
        return max(self._states, key=key)

    @property
    def consumed(self) -> int:
        return self._representative[0]

    @property
    def in_span(self) -> bool:
        return self._representative[1] >= 0

    @property
    def span_char_count(self) -> int:
        rep = self._representative
        return rep[0] - rep[1] if rep[1] >= 0 else 0

    @property
    def pending_bytes(self) -> bytes:
        _, pending = self._decode_emitted()
        return pending

    def _decode_emitted(self) -> tuple[str, bytes]:
        raw = bytes(self._emitted)
        try:
            return raw.decode("utf-8"), b""
        except UnicodeDecodeError as exc:
            return raw[:exc.start].decode("utf-8"), raw[exc.start:]


def open_session(vocab: Vocab, completion_content: str,
                 cfg: MarkerConfig | None = None) -> Session:
    """Fresh session at offset 0 (vocab fixes the default marker config)."""
    return Session(completion_content, cfg if cfg is not None else vocab.cfg)


def _tokens_from_state(session: Session, state: tuple, vocab: Vocab) -> frozenset[int]:
    """Admissible tokens from one automaton state (vocab trie lockstep walk)."""
    allowed: set[int] = set()
    step = session._step
    stack = [(vocab._trie, (state,))]
    while stack:
        node, states = stack.pop()
        ids = node.get(_LEAF)
        if ids:
            allowed.update(ids)
        for byte, child in node.items():
            if byte == _LEAF:
                continue
            next_states = step(states, byte)
            if next_states:
                stack.append((child, next_states))
    if state == (session._n, -1):
        allowed.add(vocab.eos_id)
    return frozenset(allowed)


def allowed_tokens(session: Session, vocab: Vocab) -> TokenMask:
    """Exact mask: tokens whose emission keeps the decode a valid prefix."""
    if session.done:
        raise SessionDone("session already terminated")
    cache = session._mask_cache.setdefault(vocab, {})
    allowed: set[int] = set()
    for state in session._states:
        tokens = cache.get(state)
        if tokens is None:
            tokens = _tokens_from_state(session, state, vocab)
            cache[state] = tokens
        allowed |= tokens
    return TokenMask(frozenset(allowed))


def advance(session: Session, token_id: int, vocab: Vocab) -> Session:
    """Feed one token; mutates and returns the session. Atomic on failure."""
    if session.done:
        raise SessionDone("session already terminated")
    if token_id == vocab.eos_id:
        if not session._at_terminal():
            raise DisallowedToken("eos before target fully reproduced")
        session.done = True
        session.token_ids.append(token_id)
        return session
    expansion = vocab.entries.get(token_id)
    if expansion is None:
        raise DisallowedToken(f"unknown token id {token_id}")
    new_states = session._consume(expansion)
    if new_states is None:
        raise DisallowedToken(f"token {token_id} breaks every valid reading")
    session._states = new_states
    session._emitted.extend(expansion)
    session.token_ids.append(token_id)
    return session


def decoded_string(session: Session) -> str:
    """UTF-8 decode of all emitted bytes; a partial trailing char is pending."""
    text, _ = session._decode_emitted()
    return text
