"""Training/inference record construction with dialogue-history windows.

One record per utterance. The prompt carries up to ``w`` preceding messages
plus a repetition of the target message, each line ``"{speaker}: {text}"``:

* ``h > 0``: the history messages and the target, joined by single newlines,
  then a blank line (``"\\n\\n"``), then the target again, then the inference
  token ``" -> "``.
* ``h = 0``: just the target and the inference token; no history block and no
  blank-line separator.

The completion is ``"{speaker}: {annotated target}"``. The loss-mask boundary
is a character offset into prompt+completion: everything before it (the whole
prompt) is context, everything after is the learning target.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .corpus import Dialogue
from .errors import IndexOutOfRange, IoError
from .grammar import DEFAULT_CONFIG, MarkerConfig, render

INFERENCE_TOKEN = "->"
# Fixed serialization of the inference token; single spaces both sides. The
# trailing space is deliberate and load-bearing for tokenizers.
INFERENCE_SUFFIX = f" {INFERENCE_TOKEN} "


@dataclass(frozen=True)
class WindowSpec:
    """Maximum number of preceding messages supplied as history."""

    w: int

    def __post_init__(self) -> None:
        if self.w < 0:
            raise ValueError(f"window must be non-negative, got {self.w}")


@dataclass(frozen=True)
class Sample:
    dialogue_id: str
    utterance_index: int
    h: int
    prompt: str
    completion: str
    mask_boundary: int


def _speaker_line(dialogue: Dialogue, index: int) -> str:
    utt = dialogue.utterances[index - 1]
    return f"{utt.speaker}: {utt.text}"


def _check_index(dialogue: Dialogue, index: int) -> None:
    if not 1 <= index <= len(dialogue.utterances):
        raise IndexOutOfRange(
            f"utterance index {index} outside 1..{len(dialogue.utterances)} "
            f"in dialogue {dialogue.dialogue_id!r}")


def build_inference_prompt(dialogue: Dialogue, index: int, spec: WindowSpec,
                           inference_suffix: str = INFERENCE_SUFFIX) -> str:
    """Prompt for one utterance; never consults gold annotations."""
    _check_index(dialogue, index)
    h = min(spec.w, index - 1)
    target_line = _speaker_line(dialogue, index)
    if h == 0:
        return target_line + inference_suffix
    context_lines = [_speaker_line(dialogue, i) for i in range(index - h, index + 1)]
    return "\n".join(context_lines) + "\n\n" + target_line + inference_suffix


def build_sample(dialogue: Dialogue, index: int, spec: WindowSpec,
                 cfg: MarkerConfig = DEFAULT_CONFIG,
                 inference_suffix: str = INFERENCE_SUFFIX) -> Sample:
    """Build the full training record for one utterance."""
    _check_index(dialogue, index)
    utt = dialogue.utterances[index - 1]
    prompt = build_inference_prompt(dialogue, index, spec, inference_suffix)
    completion = f"{utt.speaker}: {render(utt.text, utt.mentions, cfg)}"
    return Sample(
        dialogue_id=dialogue.dialogue_id,
        utterance_index=index,
        h=min(spec.w, index - 1),
        prompt=prompt,
        completion=completion,
        mask_boundary=len(prompt),
    )


def build_all_samples(dialogues, spec: WindowSpec,
                      cfg: MarkerConfig = DEFAULT_CONFIG) -> list[Sample]:
    """One sample per utterance per dialogue, in corpus order."""
    samples = []
    for dialogue in dialogues:
        for index in range(1, len(dialogue.utterances) + 1):
            samples.append(build_sample(dialogue, index, spec, cfg))
    return samples


def export_jsonl(samples: list[Sample], path: str | Path) -> int:
    """Write one JSON object per line (UTF-8); returns the count written."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for sample in samples:
                fh.write(json.dumps(asdict(sample), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return len(samples)


def load_jsonl(path: str | Path) -> list[Sample]:
    """Inverse of export_jsonl."""
    samples = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    samples.append(Sample(**json.loads(line)))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return samples
