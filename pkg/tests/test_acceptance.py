"""Acceptance gate: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings. Expected values here were computed by hand or by the
brute-force oracles in oracle_helpers, never by the code paths under test.
"""

from __future__ import annotations

import itertools
import json
import os
import random
import time

import pytest

from oracle_helpers import (
    annotated_forms,
    build_form_trie,
    exhaustive_best_assignment,
    oracle_mask_at,
    token_boundary_nodes,
    trie_walk,
    _END,
)
from vgmd.cli import main
from vgmd.constraint import Session, advance, allowed_tokens, decoded_string, load_vocab
from vgmd.corpus import Corpus, Dialogue, MentionSpan, Utterance, compute_stats, load_corpus
from vgmd.grammar import MarkerConfig, parse, render
from vgmd.iob import from_iob, to_iob, whitespace_view
from vgmd.metrics import PredictionSet, exact_prf, jaccard_score, optimal_assignment, overlap
from vgmd.samples import WindowSpec, build_sample
from vgmd.splits import agos_folds, random_folds

FIXDIR = os.path.join(os.path.dirname(__file__), os.pardir, "fixtures")


def _report(name: str, started: float, detail: str = "") -> None:
    extra = f" [{detail}]" if detail else ""
    print(f"\nACCEPTANCE {name}: PASS ({time.monotonic() - started:.2f}s){extra}")


def _round2(value: float) -> float:
    # table cells round half-up to two decimals
    from decimal import ROUND_HALF_UP, Decimal
    return float(Decimal(value).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


# ---------------------------------------------------------------------------
# descriptive statistics


TABLE_CELLS = {
    # dataset: counts + (percentages, means, sds) as published
    "agos": {
        "env": "VGMD_AGOS_CORPUS",
        "counts": dict(n_dialogues=15, n_messages=1800, n_mentions=1486,
                       n_chars=86516, n_words=19843,
                       chars_in_mentions=27574, words_in_mentions=5708),
        "ratios": dict(pct_messages_with_mention=60.33,
                       pct_messages_with_multiple=17.94,
                       pct_chars_in_mentions=31.87,
                       pct_words_in_mentions=28.77,
                       mean_chars_per_message=48.06,
                       mean_chars_per_mention=18.56,
                       mean_words_per_message=11.02,
                       mean_words_per_mention=3.84),
        "sds": dict(sd_chars_per_message=43.57, sd_chars_per_mention=15.76,
                    sd_words_per_message=9.52, sd_words_per_mention=3.20),
    },
    "pb_gold": {
        "env": "VGMD_PB_GOLD_CORPUS",
        "counts": dict(n_dialogues=50, n_messages=3335, n_mentions=2111,
                       n_chars=96774, n_words=22889,
                       chars_in_mentions=61771, words_in_mentions=12880),
        "ratios": dict(pct_messages_with_mention=61.02,
                       pct_messages_with_multiple=1.95,
                       pct_chars_in_mentions=63.83,
                       pct_words_in_mentions=56.27,
                       mean_chars_per_message=29.02,
                       mean_chars_per_mention=29.26,
                       mean_words_per_message=6.86,
                       mean_words_per_mention=6.10),
        "sds": dict(sd_chars_per_message=24.83, sd_chars_per_mention=23.35,
                    sd_words_per_message=5.40, sd_words_per_mention=4.86),
    },
}


def test_stats_table_reproduction():
    started = time.monotonic()
    # fixture branch: hand-computed cells, matched exactly
    report = compute_stats(load_corpus(os.path.join(FIXDIR, "tiny.json")))
    assert report.n_dialogues == 2
    assert report.n_messages == 6
    assert report.n_mentions == 4
    assert report.n_chars == 35
    assert report.n_words == 12
    assert report.chars_in_mentions == 20
    assert report.words_in_mentions == 7
    assert _round2(report.pct_messages_with_mention) == 50.00
    assert _round2(report.pct_messages_with_multiple) == 16.67
    assert _round2(report.pct_chars_in_mentions) == 57.14
    assert _round2(report.pct_words_in_mentions) == 58.33
    assert _round2(report.mean_chars_per_message) == 5.83
    assert _round2(report.sd_chars_per_message) == 4.67
    assert _round2(report.mean_chars_per_mention) == 5.00
    assert _round2(report.sd_chars_per_mention) == 1.41
    assert _round2(report.mean_words_per_message) == 2.00
    assert _round2(report.sd_words_per_message) == 1.41
    assert _round2(report.mean_words_per_mention) == 1.75
    assert _round2(report.sd_words_per_mention) == 0.43
    # real-data branch: activates when canonical corpus files are supplied
    checked = ["fixture"]
    for name, spec in TABLE_CELLS.items():
        path = os.environ.get(spec["env"])
        if not path:
            continue
        real = compute_stats(load_corpus(path))
        for field, expected in spec["counts"].items():
            assert getattr(real, field) == expected, (name, field)
        for field, expected in spec["ratios"].items():
            assert abs(_round2(getattr(real, field)) - expected) <= 0.005, (name, field)
        for field, expected in spec["sds"].items():
            # population-vs-sample SD is unpublished; allow the hundredth flip
            assert abs(_round2(getattr(real, field)) - expected) <= 0.02, (name, field)
        checked.append(name)
    elapsed = time.monotonic() - started
    assert elapsed < 1.0, f"stats criterion must run in under 1s, took {elapsed:.2f}s"
    _report("table-stats reproduction", started, ", ".join(checked))


# ---------------------------------------------------------------------------
# grammar round trip


def _random_case(rng: random.Random):
    # letters/space text with word-edge spans: raw marker-prefix characters
    # and whitespace-edge spans can make two span sets render identically,
    # in which case no parser can return both (see test_grammar collisions)
    n_words = rng.randint(1, 12)
    words = ["".join(rng.choice("abcdefg hi") for _ in range(rng.randint(1, 6))).strip()
             or "x" for _ in range(n_words)]
    text = " ".join(words)
    spans = []
    cursor = 0
    while cursor < len(text):
        if text[cursor] == " " or rng.random() < 0.55:
            cursor += 1
            continue
        end = rng.randint(cursor + 1, len(text))
        while text[end - 1] == " ":
            end -= 1
        if end > cursor:
            spans.append(MentionSpan(cursor, end))
            cursor = end + 1
        else:
            cursor += 1
    return text, spans


def test_grammar_round_trip_10k():
    started = time.monotonic()
    rng = random.Random(1811)
    failures = 0
    for case in range(10_000):
        text, spans = _random_case(rng)
        if parse(render(text, spans), text) != spans:
            failures += 1
    assert failures == 0
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"round-trip criterion must run in under 10s, took {elapsed:.2f}s"
    _report("grammar round trip", started, "10000 cases, 0 failures")


# ---------------------------------------------------------------------------
# constraint engine: oracle equivalence + completeness


def _check_target_against_oracle(target: str, vocab, cfg) -> tuple[int, int]:
    """Engine mask == brute-force mask at every reachable decoded prefix;
    every vocabulary-expressible member of A(target) is engine-completable."""
    forms = annotated_forms(target, cfg)
    root = build_form_trie(forms)
    session = Session(target, cfg)
    step = session._step
    entries = vocab.entries
    eos = vocab.eos_id
    seen = {id(root)}
    queue = [(session._states, root)]
    checked = 0
    completed_ends: set[int] = set()
    while queue:
        states, node = queue.pop()
        session._states = states
        engine = allowed_tokens(session, vocab).allowed
        oracle = oracle_mask_at(node, entries, eos)
        assert engine == oracle, (target, engine, oracle)
        checked += 1
        if eos in engine:
            assert node.get(_END), (target, "eos allowed at a non-final prefix")
            completed_ends.add(id(node))
        for token_id in engine:
            if token_id == eos:
                continue
            nxt_node = trie_walk(node, entries[token_id])
            if id(nxt_node) not in seen:
                seen.add(id(nxt_node))
                nxt_states = states
                for byte in entries[token_id]:
                    nxt_states = step(nxt_states, byte)
                queue.append((tuple(nxt_states), nxt_node))
    # completeness: end nodes reachable by whole-token steps were all completed
    expressible = token_boundary_nodes(root, entries, eos)

    def collect_ends(node, acc):
        if node.get(_END):
            acc.add(id(node))
        for key, child in node.items():
            if key != _END:
                collect_ends(child, acc)
        return acc

    expressible_ends = collect_ends(root, set()) & expressible
    assert expressible_ends <= completed_ends, (target, "unreachable annotated form")
    return checked, len(forms)


def test_engine_oracle_equivalence():
    started = time.monotonic()
    vocab12 = os.path.join(FIXDIR, "toy_vocab12.json")
    checked_states = targets_run = 0
    plans = [
        # (alphabet, lengths, pad settings): 'a' and 'b' are interchangeable
        # for the automaton; beyond length 5 the {'a',' '} boundary patterns
        # carry all the structure, sized to the criterion's 60 s budget
        ("ab ", range(0, 6), (True, False)),
        ("a ", range(6, 8), (True, False)),
        ("a ", range(8, 9), (True,)),
    ]
    for alphabet, lengths, pads in plans:
        for pad in pads:
            cfg = MarkerConfig(pad_with_space=pad)
            vocab = load_vocab(vocab12, cfg)
            for length in lengths:
                for letters in itertools.product(alphabet, repeat=length):
                    states, _ = _check_target_against_oracle("".join(letters), vocab, cfg)
                    checked_states += states
                    targets_run += 1
    # marker-prefix characters in the target exercise the ambiguous branches
    for pad in (True, False):
        cfg = MarkerConfig(pad_with_space=pad)
        vocab = load_vocab(vocab12, cfg)
        for target in ("a>b", ">ab", "ab>", "a> b", "a >b", "a<b", "<ab",
                       "ab<", "a <b", "a< b", "a>b <a", "> <"):
            states, _ = _check_target_against_oracle(target, vocab, cfg)
            checked_states += states
            targets_run += 1
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"oracle criterion must run in under 60s, took {elapsed:.1f}s"
    _report("constraint-engine oracle equivalence", started,
            f"{targets_run} targets, {checked_states} states")


def test_engine_soundness_random_walks():
    started = time.monotonic()
    vocab12 = os.path.join(FIXDIR, "toy_vocab12.json")
    walks = 0
    for pad in (True, False):
        cfg = MarkerConfig(pad_with_space=pad)
        vocab = load_vocab(vocab12, cfg)
        rng = random.Random(97 + pad)
        for _ in range(500):
            target = "".join(rng.choice("ab ") for _ in range(rng.randint(0, 10)))
            session = Session(target, cfg)
            while not session.done:
                mask = sorted(allowed_tokens(session, vocab).allowed)
                assert mask, "live session with empty mask"
                advance(session, rng.choice(mask), vocab)
            spans = parse(decoded_string(session), target, cfg)  # zero errors
            assert all(0 <= s.start < s.end <= len(target) for s in spans)
            walks += 1
    assert walks == 1000
    _report("engine soundness under random walks", started, "1000 decodes")


# ---------------------------------------------------------------------------
# metrics


def _random_speckled_spans(rng: random.Random, max_spans=6, length=40):
    # dense by construction so 5- and 6-span sides occur routinely and the
    # exhaustive matching oracle is actually exercised at full width
    spans = []
    cursor = rng.randint(0, 3)
    for _ in range(rng.randint(0, max_spans)):
        start = cursor + rng.randint(0, 2)
        end = start + rng.randint(1, 5)
        if end > length:
            break
        spans.append(MentionSpan(start, end))
        cursor = end
    return spans


def test_metrics_oracle():
    started = time.monotonic()
    rng = random.Random(5150)
    wide = 0
    for _ in range(1000):
        gold = _random_speckled_spans(rng)
        pred = _random_speckled_spans(rng)
        if len(gold) >= 5 and len(pred) >= 5:
            wide += 1
        pairs = optimal_assignment(gold, pred)
        total = sum(overlap(gold[g], pred[p]) for g, p in pairs)
        assert total == exhaustive_best_assignment(gold, pred)
    assert wide >= 75  # the budget-relevant widths are well represented
    gold_set = PredictionSet.from_corpus(load_corpus(os.path.join(FIXDIR, "tiny.json")))
    prf = exact_prf(gold_set, gold_set)
    assert (prf.precision, prf.recall, prf.f1) == (1.0, 1.0, 1.0)
    worked_gold = PredictionSet(spans={("d", 1): (MentionSpan(0, 10),)})
    worked_pred = PredictionSet(spans={("d", 1): (MentionSpan(5, 15),)})
    assert jaccard_score(worked_gold, worked_pred).jaccard == 1 / 3
    _report("metrics assignment oracle", started, "1000 utterance pairs")


# ---------------------------------------------------------------------------
# pipeline identity


def test_pipeline_identity(tmp_path, capsys):
    started = time.monotonic()
    corpus_path = os.path.join(FIXDIR, "tiny.json")
    n_utterances = sum(len(d.utterances) for d in load_corpus(corpus_path).dialogues)
    for window in (0, 3, 7, 19):
        samples_dir = tmp_path / f"s{window}"
        assert main(["build-samples", corpus_path, "--window", str(window),
                     "--out", str(samples_dir)]) == 0
        sample_lines = (samples_dir / "samples.jsonl").read_text().splitlines()
        assert len(sample_lines) == n_utterances
        generations = tmp_path / f"g{window}.jsonl"
        with open(generations, "w", encoding="utf-8") as fh:
            for line in sample_lines:
                sample = json.loads(line)
                fh.write(json.dumps({"dialogue_id": sample["dialogue_id"],
                                     "index": sample["utterance_index"],
                                     "output": sample["completion"]}) + "\n")
        parsed_dir = tmp_path / f"p{window}"
        assert main(["parse-output", corpus_path, str(generations),
                     "--out", str(parsed_dir)]) == 0
        report_dir = tmp_path / f"r{window}"
        assert main(["evaluate", corpus_path, str(parsed_dir / "predictions.jsonl"),
                     "--report", str(report_dir)]) == 0
        report = json.loads((report_dir / "report.json").read_text())
        assert report["precision"] == 1.0
        assert report["recall"] == 1.0
        assert report["f1"] == 1.0
        assert report["jaccard"] == 1.0
    capsys.readouterr()  # swallow the CLI chatter before the pass line
    # real-data record counts activate alongside the stats criterion
    details = [f"{n_utterances} records/window"]
    for name, spec in TABLE_CELLS.items():
        path = os.environ.get(spec["env"])
        if not path:
            continue
        from vgmd.samples import build_all_samples
        corpus = load_corpus(path)
        built = len(build_all_samples(corpus.dialogues, WindowSpec(3)))
        assert built == spec["counts"]["n_messages"]
        details.append(f"{name}={built}")
    _report("pipeline identity over windows 0/3/7/19", started, ", ".join(details))


# ---------------------------------------------------------------------------
# training-record byte exactness


def test_training_record_byte_exact():
    started = time.monotonic()
    corpus = load_corpus(os.path.join(FIXDIR, "ranking_excerpt.json"))
    sample = build_sample(corpus.dialogues[0], 4, WindowSpec(3))
    assert sample.prompt == (
        "B: Clear, I think my second choice would be the light grey one, "
        "which looks like in old style.\n"
        "A: I agree, its bottom seems to be pretty high as well.\n"
        "B: yeap!\n"
        "B: then, for the third one, is the dark grey one okay?\n"
        "\n"
        "B: then, for the third one, is the dark grey one okay? -> ")
    assert sample.completion == \
        "B: then, for the third one, is >> the dark grey << one okay?"
    assert sample.mask_boundary == len(sample.prompt)
    _report("training-record byte exactness", started)


# ---------------------------------------------------------------------------
# splits


EXPECTED_SEED7_TESTS = [
    ["pb-24", "pb-35", "pb-14", "pb-31", "pb-10", "pb-48", "pb-11", "pb-16", "pb-28", "pb-29"],
    ["pb-42", "pb-38", "pb-30", "pb-08", "pb-00", "pb-46", "pb-19", "pb-12", "pb-21", "pb-43"],
    ["pb-47", "pb-22", "pb-49", "pb-07", "pb-39", "pb-18", "pb-33", "pb-01", "pb-40", "pb-17"],
    ["pb-36", "pb-15", "pb-44", "pb-26", "pb-27", "pb-05", "pb-02", "pb-13", "pb-32", "pb-45"],
    ["pb-37", "pb-23", "pb-06", "pb-34", "pb-04", "pb-03", "pb-41", "pb-25", "pb-09", "pb-20"],
]


def _synthetic(dataset_id: str, count: int, categories=None) -> Corpus:
    return Corpus(dataset_id, tuple(
        Dialogue(f"{dataset_id}-{i:02d}", f"img-{i}",
                 categories[i % len(categories)] if categories else None,
                 (Utterance(1, "A", "hi"),))
        for i in range(count)))


def test_splits_acceptance():
    started = time.monotonic()
    categories = ["cars", "dogs", "paintings", "pastries", "phones"]
    folds = agos_folds(_synthetic("agos-like", 15, categories))
    assert len(folds) == 5
    all_ids = {f"agos-like-{i:02d}" for i in range(15)}
    tested = [i for fold in folds for i in fold.test]
    assert sorted(tested) == sorted(all_ids)
    for fold in folds:
        assert len(fold.test) == 3
        assert set(fold.train) | set(fold.test) == all_ids
        assert not set(fold.train) & set(fold.test)
    pb = _synthetic("pb", 50)
    assert random_folds(pb, 5, 7) == random_folds(pb, 5, 7)
    # frozen membership pins determinism across runs and machines
    assert [list(f.test) for f in random_folds(pb, 5, 7)] == EXPECTED_SEED7_TESTS
    _report("splits partition and determinism", started)


# ---------------------------------------------------------------------------
# IOB round trip


def test_iob_round_trip_acceptance():
    started = time.monotonic()
    corpus = load_corpus(os.path.join(FIXDIR, "tiny.json"))
    recovered = 0
    for dialogue in corpus.dialogues:
        for utt in dialogue.utterances:
            view = whitespace_view(utt.text)
            boundaries = {t.start for t in view.tokens} | {t.end for t in view.tokens}
            aligned = all(s.start in boundaries and s.end in boundaries
                          for s in utt.mentions)
            decode = from_iob(to_iob(utt, view), view)
            assert decode.repairs == 0
            if aligned:
                assert tuple(decode.spans) == utt.mentions
                recovered += len(utt.mentions)
    assert recovered == 4  # every fixture span is token-aligned
    repair = from_iob(["O", "I", "O"], whitespace_view("a b c"))
    assert repair.repairs == 1  # counted, never silent
    assert repair.spans == [MentionSpan(2, 3)]
    _report("IOB round trip", started, f"{recovered} spans recovered")
