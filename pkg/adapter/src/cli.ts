/**
 * Thin decode client: runs toy decodes over every utterance of a canonical
 * corpus file and writes a generations JSONL that `vgmd parse-output`
 * consumes. Spawns its own service unless --host/--port are given.
 *
 * Usage:
 *   node dist/cli.js decode --corpus <corpus.json> --vocab <vocab.json> \
 *     --mode greedy|random [--seed N] [--out generations.jsonl] \
 *     [--max-new-tokens N] [--host H --port P]
 */

import { readFileSync, writeFileSync } from "node:fs";

import { MaskClient, startService } from "./client.js";
import { runToyDecode, SamplerMode } from "./sampler.js";
import { byteTokenIds, readVocabFile } from "./vocab.js";

interface CorpusUtterance {
  index: number;
  speaker: string;
  text: string;
}

interface CorpusDialogue {
  dialogue_id: string;
  utterances: CorpusUtterance[];
}

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith("--")) {
      args.set(argv[i].slice(2), argv[i + 1] ?? "");
      i++;
    }
  }
  return args;
}

async function decodeCommand(args: Map<string, string>): Promise<void> {
  const corpusPath = args.get("corpus");
  const vocabPath = args.get("vocab");
  if (!corpusPath || !vocabPath) {
    throw new Error("decode requires --corpus and --vocab");
  }
  const modeName = args.get("mode") ?? "greedy";
  const mode: SamplerMode =
    modeName === "greedy"
      ? { kind: "toy_greedy" }
      : { kind: "toy_random", seed: Number(args.get("seed") ?? "0") };
  const maxNewTokens = Number(args.get("max-new-tokens") ?? "4096");
  const vocab = readVocabFile(vocabPath);
  const corpus = JSON.parse(readFileSync(corpusPath, "utf-8"));

  let service = null;
  let host = args.get("host");
  let port = args.get("port") ? Number(args.get("port")) : undefined;
  if (!host || port === undefined) {
    service = await startService(vocabPath);
    host = service.host;
    port = service.port;
  }
  const client = await MaskClient.connect(host, port);
  const lines: string[] = [];
  try {
    for (const dialogue of corpus.dialogues as CorpusDialogue[]) {
      for (const utterance of dialogue.utterances) {
        const target = `${utterance.speaker}: ${utterance.text}`;
        // keep the speaker prefix marker-free so parse-output can key on it
        const forcePrefix = byteTokenIds(vocab, `${utterance.speaker}: `) ?? undefined;
        const result = await runToyDecode(client, vocab, target, mode,
          { maxNewTokens, forcePrefix });
        lines.push(JSON.stringify({
          dialogue_id: dialogue.dialogue_id,
          index: utterance.index,
          output: result.text,
        }));
      }
    }
  } finally {
    client.end();
    service?.stop();
  }
  const payload = lines.map((line) => line + "\n").join("");
  const outPath = args.get("out");
  if (outPath) {
    writeFileSync(outPath, payload, "utf-8");
  } else {
    process.stdout.write(payload);
  }
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (command !== "decode") {
    process.stderr.write("usage: cli.js decode --corpus C --vocab V [options]\n");
    process.exitCode = 2;
    return;
  }
  try {
    await decodeCommand(parseArgs(rest));
  } catch (error) {
    process.stderr.write(`${(error as Error).message}\n`);
    process.exitCode = 1;
  }
}

void main();
