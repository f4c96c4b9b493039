"""Evaluation partitions: category folds, seeded random folds, transfer.

Random folds shuffle dialogue ids with a Fisher-Yates shuffle driven by
CPython's Mersenne Twister (``random.Random(seed)``) and then chunk the
shuffled order into k near-equal test sets, so fold membership reproduces
across runs and machines for a fixed seed. Splitting is always at the
dialogue level to prevent within-dialogue leakage.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .errors import BadK, IoError, MissingCategory, SameDataset, UnknownCategory

IMAGE_CATEGORIES = ("cars", "dogs", "paintings", "pastries", "phones")


@dataclass(frozen=True)
class FoldSpec:
    """One train/test partition of a corpus's dialogue ids."""

    fold_id: str
    train: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self) -> None:
        if set(self.train) & set(self.test):
            raise ValueError(f"fold {self.fold_id}: train and test intersect")


def _check_partition(folds: list[FoldSpec], all_ids: set[str]) -> None:
    for fold in folds:
        if set(fold.train) | set(fold.test) != all_ids:
            raise ValueError(f"fold {fold.fold_id} does not cover the corpus")


def agos_folds(corpus: Corpus) -> list[FoldSpec]:
    """One fold per image category; that category's dialogues are the test set."""
    by_category: dict[str, list[str]] = {c: [] for c in IMAGE_CATEGORIES}
    for dialogue in corpus.dialogues:
        if dialogue.category not in by_category:
            raise UnknownCategory(
                f"dialogue {dialogue.dialogue_id!r} has category "
                f"{dialogue.category!r}, expected one of {IMAGE_CATEGORIES}")
        by_category[dialogue.category].append(dialogue.dialogue_id)
    empty = [c for c, ids in by_category.items() if not ids]
    if empty:
        raise MissingCategory(f"no dialogues for categories: {', '.join(empty)}")
    all_ids = {d.dialogue_id for d in corpus.dialogues}
    folds = []
    for category in IMAGE_CATEGORIES:
        test = tuple(by_category[category])
        train = tuple(d.dialogue_id for d in corpus.dialogues
                      if d.dialogue_id not in set(test))
        folds.append(FoldSpec(fold_id=category, train=train, test=test))
    _check_partition(folds, all_ids)
    return folds


def random_folds(corpus: Corpus, k: int, seed: int) -> list[FoldSpec]:
    """Seeded shuffle, then contiguous chunks as test sets (sizes differ <= 1)."""
    ids = [d.dialogue_id for d in corpus.dialogues]
    if not 2 <= k <= len(ids):
        raise BadK(f"k={k} not in [2, {len(ids)}]")
    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)
    base, extra = divmod(len(shuffled), k)
    folds = []
    cursor = 0
    for fold_number in range(k):
        size = base + (1 if fold_number < extra else 0)
        test = tuple(shuffled[cursor:cursor + size])
        cursor += size
        train = tuple(i for i in ids if i not in set(test))
        folds.append(FoldSpec(fold_id=f"fold{fold_number + 1}", train=train, test=test))
    _check_partition(folds, set(ids))
    return folds


def transfer_config(train_corpus: Corpus, test_corpus: Corpus) -> FoldSpec:
    """Train on the entirety of one dataset, test on the entirety of another."""
    if train_corpus.dataset_id == test_corpus.dataset_id:
        raise SameDataset(f"both corpora are {train_corpus.dataset_id!r}")
    return FoldSpec(
        fold_id=f"{train_corpus.dataset_id}->{test_corpus.dataset_id}",
        train=tuple(d.dialogue_id for d in train_corpus.dialogues),
        test=tuple(d.dialogue_id for d in test_corpus.dialogues))


# ---------------------------------------------------------------------------
# fold manifest


def folds_to_manifest(folds: list[FoldSpec], seed: int | None = None) -> dict:
    return {
        "folds": [{"fold_id": f.fold_id, "train": list(f.train), "test": list(f.test)}
                  for f in folds],
        "seed": seed,
    }


def write_manifest(folds: list[FoldSpec], path: str | Path,
                   seed: int | None = None) -> None:
    try:
        Path(path).write_text(
            json.dumps(folds_to_manifest(folds, seed), indent=2) + "\n",
            encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_manifest(path: str | Path) -> tuple[list[FoldSpec], int | None]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        folds = [FoldSpec(fold_id=f["fold_id"], train=tuple(f["train"]),
                          test=tuple(f["test"])) for f in doc["folds"]]
        return folds, doc.get("seed")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise IoError(f"{path}: bad fold manifest: {exc!r}") from exc
