"""Exception hierarchy shared across the toolkit.

Every error carries a stable machine-readable ``code`` (its class name) so the
CLI and the session wire protocol can report failures uniformly.
"""

from __future__ import annotations


class VgmdError(Exception):
    """Base class for all toolkit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# corpus model
class MalformedFile(VgmdError):
    """File could not be read as the canonical corpus format."""


class InvariantViolation(VgmdError):
    """A corpus-level invariant does not hold; message names the location."""


# annotation grammar
class MarkerCollision(VgmdError):
    """Text contains a marker string, so no unambiguous annotation exists."""


class ContentMismatch(VgmdError):
    """Annotated string diverges from the reference text."""

    def __init__(self, message: str, position: int):
        super().__init__(message)
        self.position = position


class UnbalancedMarkers(VgmdError):
    """Start/end markers are not properly paired."""


class EmptySpan(VgmdError):
    """A start marker is immediately closed (or opened at end of text)."""


class TrailingContent(VgmdError):
    """Annotated string continues past the end of the reference text."""


# sample builder
class IndexOutOfRange(VgmdError):
    """Utterance index outside the dialogue."""


# constraint engine
class MalformedVocab(VgmdError):
    """Vocabulary file is syntactically or structurally invalid."""


class MarkerNotInVocab(VgmdError):
    """A declared marker id does not expand to the configured marker string."""


class DisallowedToken(VgmdError):
    """Token not in the session's current mask."""


class SessionDone(VgmdError):
    """Operation on a session that already emitted EOS."""


# metrics
class KeyMismatch(VgmdError):
    """Prediction set keyed outside the corpus's utterances."""


# IOB export
class ViewMismatch(VgmdError):
    """Tokenization view does not align with the utterance or labels."""


# NP baseline
class UnbalancedBrackets(VgmdError):
    """Bracketed parse has unmatched parentheses."""


class LeafAlignmentFailure(VgmdError):
    """Tree leaves could not be aligned to the utterance text."""


# splits
class UnknownCategory(VgmdError):
    """Dialogue carries a category outside the fixed image-category set."""


class MissingCategory(VgmdError):
    """An expected image category has no dialogues."""


class BadK(VgmdError):
    """Fold count is not in [2, number of dialogues]."""


class SameDataset(VgmdError):
    """Transfer configuration needs two distinct datasets."""


# I/O plumbing
class IoError(VgmdError):
    """Filesystem read/write failure wrapped with context."""
