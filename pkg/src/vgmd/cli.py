"""Command-line entry point wiring the pipeline stages together.

Exit codes: 0 success, 2 validation or usage error, 3 internal error.
Commands that produce files take an --out directory and drop exactly one
manifest.json there describing how the output was produced (command, config
digest, inputs, seeds, tool version, timestamp). Outputs are deterministic
given the manifest, timestamps excluded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from . import __version__
from .corpus import Corpus, StatsReport, compute_stats, load_corpus
from .errors import VgmdError
from .grammar import DEFAULT_CONFIG, parse
from .iob import TokenizationView, export_conll, whitespace_view
from .metrics import PredictionSet, evaluate, load_predictions, render_report_table, save_predictions
from .np_baseline import load_trees, run_np_baseline
from .samples import WindowSpec, build_all_samples, export_jsonl
from .service import SessionBroker, serve_stream, serve_tcp
from .splits import agos_folds, random_folds, transfer_config, write_manifest
from .constraint import load_vocab


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_digest: str
    inputs: list[str]
    seeds: list[int]
    tool_version: str
    timestamp: str


def _write_run_manifest(out_dir: Path, command: str, config: dict,
                        inputs: list[str], seeds: list[int]) -> None:
    digest = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()
    manifest = RunManifest(
        command=command, config_digest=digest, inputs=inputs, seeds=seeds,
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat())
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.__dict__, indent=2) + "\n", encoding="utf-8")


def _ensure_out(path_text: str) -> Path:
    out_dir = Path(path_text)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _round2(value: float) -> Decimal:
    return Decimal(value).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def render_stats_table(report: StatsReport, dataset_id: str) -> str:
    rows = [
        ("Dialogues", str(report.n_dialogues)),
        ("Messages", str(report.n_messages)),
        ("Mentions", str(report.n_mentions)),
        ("Characters", str(report.n_chars)),
        ("Words", str(report.n_words)),
        ("% messages with mention", f"{_round2(report.pct_messages_with_mention)}%"),
        ("% messages with >1 mention", f"{_round2(report.pct_messages_with_multiple)}%"),
        ("Characters in mentions", str(report.chars_in_mentions)),
        ("% chars in mentions", f"{_round2(report.pct_chars_in_mentions)}%"),
        ("Words in mentions", str(report.words_in_mentions)),
        ("% words in mentions", f"{_round2(report.pct_words_in_mentions)}%"),
        ("Mean (SD) chars/message",
         f"{_round2(report.mean_chars_per_message)} ({_round2(report.sd_chars_per_message)})"),
        ("Mean (SD) chars/mention",
         f"{_round2(report.mean_chars_per_mention)} ({_round2(report.sd_chars_per_mention)})"),
        ("Mean (SD) words/message",
         f"{_round2(report.mean_words_per_message)} ({_round2(report.sd_words_per_message)})"),
        ("Mean (SD) words/mention",
         f"{_round2(report.mean_words_per_mention)} ({_round2(report.sd_words_per_mention)})"),
    ]
    width = max(len(label) for label, _ in rows)
    lines = [f"Dataset: {dataset_id}"]
    lines += [f"{label:<{width}}  {value}" for label, value in rows]
    return "\n".join(lines)


def stats_to_dict(report: StatsReport) -> dict:
    return dict(report.__dict__)


# ---------------------------------------------------------------------------
# subcommands


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    report = compute_stats(corpus)
    print(render_stats_table(report, corpus.dataset_id))
    if args.json:
        Path(args.json).write_text(
            json.dumps(stats_to_dict(report), indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_build_samples(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    out_dir = _ensure_out(args.out)
    samples = build_all_samples(corpus.dialogues, WindowSpec(args.window))
    count = export_jsonl(samples, out_dir / "samples.jsonl")
    _write_run_manifest(out_dir, "build-samples",
                        {"window": args.window}, [args.corpus], [])
    print(f"wrote {count} samples to {out_dir / 'samples.jsonl'}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    gold = PredictionSet.from_corpus(corpus)
    pred = load_predictions(args.predictions)
    report = evaluate(gold, pred)
    print(render_report_table(report, title=f"Dataset: {corpus.dataset_id}"))
    if args.report:
        out_dir = _ensure_out(args.report)
        (out_dir / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        (out_dir / "report.txt").write_text(
            render_report_table(report, title=f"Dataset: {corpus.dataset_id}") + "\n",
            encoding="utf-8")
        _write_run_manifest(out_dir, "evaluate", {},
                            [args.corpus, args.predictions], [])
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    seed = args.seed
    if args.mode == "agos":
        folds = agos_folds(corpus)
        seed = None
    elif args.mode == "random":
        if seed is None:
            print("random mode requires --seed", file=sys.stderr)
            return 2
        folds = random_folds(corpus, args.k, seed)
    else:  # transfer
        if not args.test_corpus:
            print("transfer mode requires --test-corpus", file=sys.stderr)
            return 2
        folds = [transfer_config(corpus, load_corpus(args.test_corpus))]
        seed = None
    out_dir = _ensure_out(args.out)
    write_manifest(folds, out_dir / "folds.json", seed)
    _write_run_manifest(out_dir, "split",
                        {"mode": args.mode, "k": args.k, "seed": seed},
                        [args.corpus] + ([args.test_corpus] if args.test_corpus else []),
                        [seed] if seed is not None else [])
    print(f"wrote {len(folds)} folds to {out_dir / 'folds.json'}")
    return 0


def _load_view_file(path: str) -> dict:
    views: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            key = (str(record["dialogue_id"]), int(record["index"]))
            views[key] = [(int(s), int(e)) for _, s, e in record["tokens"]] \
                if record["tokens"] and isinstance(record["tokens"][0], list) \
                else [(int(t["start"]), int(t["end"])) for t in record["tokens"]]
    return views


def cmd_export_iob(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    out_dir = _ensure_out(args.out)
    views_for = None
    if args.view == "file":
        offsets_by_key = _load_view_file(args.view_file)

        def views_for(dialogue):
            # views from file where present; whitespace fallback otherwise
            views = {}
            for utt in dialogue.utterances:
                offsets = offsets_by_key.get((dialogue.dialogue_id, utt.index))
                views[utt.index] = (TokenizationView.build(utt.text, offsets)
                                    if offsets is not None else whitespace_view(utt.text))
            return views

    blocks = export_conll(corpus, WindowSpec(args.window),
                          out_dir / "windows.conll", views_for)
    _write_run_manifest(out_dir, "export-iob",
                        {"window": args.window, "view": args.view},
                        [args.corpus], [])
    print(f"wrote {blocks} blocks to {out_dir / 'windows.conll'}")
    return 0


def cmd_np_baseline(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    trees = load_trees(args.trees)
    records = run_np_baseline(corpus, trees)
    out_dir = _ensure_out(args.out)
    count = save_predictions(records, out_dir / "predictions.jsonl")
    _write_run_manifest(out_dir, "np-baseline", {}, [args.corpus, args.trees], [])
    print(f"wrote {count} prediction records to {out_dir / 'predictions.jsonl'}")
    return 0


def cmd_parse_output(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    texts = {}
    speakers = {}
    for dialogue in corpus.dialogues:
        for utt in dialogue.utterances:
            texts[(dialogue.dialogue_id, utt.index)] = utt.text
            speakers[(dialogue.dialogue_id, utt.index)] = utt.speaker
    records = []
    with open(args.generations, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            generation = json.loads(line)
            key = (str(generation["dialogue_id"]), int(generation["index"]))
            raw = generation.get("output", generation.get("completion"))
            if key not in texts:
                records.append((key, (), "UtteranceNotInCorpus"))
                continue
            if raw is None:
                records.append((key, (), "MissingOutput"))
                continue
            prefix = f"{speakers[key]}: "
            if not raw.startswith(prefix):
                records.append((key, (), "SpeakerPrefixMismatch"))
                continue
            try:
                spans = parse(raw[len(prefix):], texts[key], DEFAULT_CONFIG)
                records.append((key, tuple(spans), None))
            except VgmdError as exc:
                records.append((key, (), exc.code))
    out_dir = _ensure_out(args.out)
    count = save_predictions(records, out_dir / "predictions.jsonl")
    _write_run_manifest(out_dir, "parse-output", {},
                        [args.corpus, args.generations], [])
    print(f"wrote {count} prediction records to {out_dir / 'predictions.jsonl'}")
    return 0


def cmd_mask_serve(args: argparse.Namespace) -> int:
    vocab = load_vocab(args.vocab)
    broker = SessionBroker(vocab)
    if args.listen == "stdio":
        serve_stream(broker, sys.stdin, sys.stdout)
        return 0
    if args.listen.startswith("tcp:"):
        try:
            port = int(args.listen.split(":", 1)[1])
        except ValueError:
            print(f"bad tcp port in {args.listen!r}", file=sys.stderr)
            return 2
        serve_tcp(broker, port=port)
        return 0
    print(f"--listen must be stdio or tcp:PORT, got {args.listen!r}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vgmd",
        description="Mention detection toolkit for visually grounded dialogue")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="descriptive statistics for a corpus")
    p.add_argument("corpus")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build-samples", help="training/inference records as JSONL")
    p.add_argument("corpus")
    p.add_argument("--window", type=int, required=True,
                   help="max preceding messages (e.g. 0, 3, 7, 19)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_samples)

    p = sub.add_parser("evaluate", help="score a prediction file against gold")
    p.add_argument("corpus")
    p.add_argument("predictions")
    p.add_argument("--report", help="directory for report.json/report.txt")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="produce evaluation folds")
    p.add_argument("corpus")
    p.add_argument("--mode", choices=("agos", "random", "transfer"), required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--test-corpus", help="test-side corpus for transfer mode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("export-iob", help="CoNLL-like IOB export with windows")
    p.add_argument("corpus")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--view", choices=("whitespace", "file"), default="whitespace")
    p.add_argument("--view-file", help="JSONL token offsets when --view file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_iob)

    p = sub.add_parser("np-baseline", help="NP extraction over bracketed parses")
    p.add_argument("corpus")
    p.add_argument("trees", help="JSONL of bracketed trees")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_np_baseline)

    p = sub.add_parser("parse-output", help="parse raw model generations to spans")
    p.add_argument("corpus")
    p.add_argument("generations", help="JSONL with dialogue_id/index/output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parse_output)

    p = sub.add_parser("mask-serve", help="constraint-engine session service")
    p.add_argument("--vocab", required=True)
    p.add_argument("--listen", default="stdio", help="stdio or tcp:PORT")
    p.set_defaults(func=cmd_mask_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "window", None) is not None and args.window < 0:
        parser.error("--window must be non-negative")
    if args.command == "export-iob" and args.view == "file" and not args.view_file:
        parser.error("--view file requires --view-file")
    try:
        return args.func(args)
    except VgmdError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
