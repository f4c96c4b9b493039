/**
 * Vocabulary export for the engine's file format, with a content digest.
 *
 * The digest covers the canonical serialization of entries+special and is
 * recorded in the file (the engine ignores unknown top-level keys). The
 * handshake recomputes it from the live tokenizer and from the file itself;
 * any disagreement means the vocabulary on disk does not describe the
 * tokenizer that will drive generation, which would silently break the
 * exact-reproduction guarantee.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";

import { VocabMismatch } from "./errors.js";
import { ByteBpeTokenizer, EOS_ID } from "./tokenizer.js";

export interface VocabSpecial {
  start_marker_ids: number[];
  end_marker_ids: number[];
  eos_id: number;
}

export interface VocabFile {
  entries: Record<string, number[]>;
  special: VocabSpecial;
  digest?: string;
}

export interface MarkerStrings {
  start: string;
  end: string;
}

export const DEFAULT_MARKERS: MarkerStrings = { start: ">>", end: "<<" };

export function vocabFromTokenizer(
  tokenizer: ByteBpeTokenizer,
  markers: MarkerStrings = DEFAULT_MARKERS,
): VocabFile {
  const entries: Record<string, number[]> = {};
  tokenizer.expansions.forEach((expansion, id) => {
    entries[String(id)] = [...expansion];
  });
  const special: VocabSpecial = {
    start_marker_ids: [
      ...tokenizer.idsFor(markers.start),
      ...tokenizer.idsFor(" " + markers.start),
    ],
    end_marker_ids: [
      ...tokenizer.idsFor(markers.end),
      ...tokenizer.idsFor(" " + markers.end),
    ],
    eos_id: EOS_ID,
  };
  const file: VocabFile = { entries, special };
  file.digest = computeDigest(file);
  return file;
}

/** sha256 over a canonical (sorted-key) serialization of entries+special. */
export function computeDigest(file: Pick<VocabFile, "entries" | "special">): string {
  const canonical = {
    entries: Object.fromEntries(
      Object.keys(file.entries)
        .sort((a, b) => Number(a) - Number(b))
        .map((key) => [key, file.entries[key]]),
    ),
    special: {
      start_marker_ids: [...file.special.start_marker_ids].sort((a, b) => a - b),
      end_marker_ids: [...file.special.end_marker_ids].sort((a, b) => a - b),
      eos_id: file.special.eos_id,
    },
  };
  return createHash("sha256").update(JSON.stringify(canonical)).digest("hex");
}

export function writeVocabFile(path: string, file: VocabFile): void {
  writeFileSync(path, JSON.stringify(file) + "\n", "utf-8");
}

export function readVocabFile(path: string): VocabFile {
  return JSON.parse(readFileSync(path, "utf-8")) as VocabFile;
}

/**
 * Digest handshake: the tokenizer in memory, the file's recorded digest, and
 * the file's actual contents must all agree.
 */
export function verifyHandshake(
  tokenizer: ByteBpeTokenizer,
  file: VocabFile,
  markers: MarkerStrings = DEFAULT_MARKERS,
): void {
  if (!file.digest) {
    throw new VocabMismatch("vocab file carries no digest");
  }
  const fromFile = computeDigest(file);
  if (fromFile !== file.digest) {
    throw new VocabMismatch("vocab file contents do not match its recorded digest");
  }
  const fromTokenizer = vocabFromTokenizer(tokenizer, markers).digest;
  if (fromTokenizer !== file.digest) {
    throw new VocabMismatch("tokenizer does not match the exported vocabulary");
  }
}

/** id -> bytes lookup for client-side decoding of emitted tokens. */
export function expansionTable(file: VocabFile): Map<number, Uint8Array> {
  const table = new Map<number, Uint8Array>();
  for (const [key, values] of Object.entries(file.entries)) {
    table.set(Number(key), Uint8Array.from(values));
  }
  return table;
}

/**
 * Token ids spelling the text byte-by-byte, or null when the vocabulary
 * lacks a single-byte token for some byte (then no prefix can be forced).
 */
export function byteTokenIds(file: VocabFile, text: string): number[] | null {
  const byByte = new Map<number, number>();
  for (const [key, values] of Object.entries(file.entries)) {
    if (values.length === 1 && !byByte.has(values[0])) {
      byByte.set(values[0], Number(key));
    }
  }
  const ids: number[] = [];
  for (const byte of Buffer.from(text, "utf-8")) {
    const id = byByte.get(byte);
    if (id === undefined) {
      return null;
    }
    ids.push(id);
  }
  return ids;
}
