/**
 * Minimal byte-level BPE tokenizer.
 *
 * Ids 0..255 are raw bytes, id 256 is EOS, ids 257+ are merge products in
 * rank order. Encoding applies merges greedily by rank, the standard BPE
 * procedure. This is a real (if small) tokenizer: its id->bytes table is
 * what gets exported to the engine's vocabulary format.
 */

const BYTE_IDS = 256;
export const EOS_ID = BYTE_IDS;
const FIRST_MERGE_ID = BYTE_IDS + 1;

export type MergePair = [number, number];

export class ByteBpeTokenizer {
  readonly expansions: Uint8Array[] = [];
  private readonly ranks = new Map<string, number>();

  constructor(readonly merges: MergePair[]) {
    for (let b = 0; b < BYTE_IDS; b++) {
      this.expansions.push(Uint8Array.of(b));
    }
    this.expansions.push(new Uint8Array(0)); // EOS
    merges.forEach(([left, right], rank) => {
      const id = FIRST_MERGE_ID + rank;
      if (left >= id || right >= id || left === EOS_ID || right === EOS_ID) {
        throw new Error(`merge ${rank} references an undefined id`);
      }
      this.expansions.push(concat(this.expansions[left], this.expansions[right]));
      this.ranks.set(`${left},${right}`, rank);
    });
  }

  get vocabSize(): number {
    return this.expansions.length;
  }

  encode(text: string): number[] {
    let ids: number[] = [...Buffer.from(text, "utf-8")];
    for (;;) {
      let bestRank = Infinity;
      let bestAt = -1;
      for (let i = 0; i + 1 < ids.length; i++) {
        const rank = this.ranks.get(`${ids[i]},${ids[i + 1]}`);
        if (rank !== undefined && rank < bestRank) {
          bestRank = rank;
          bestAt = i;
        }
      }
      if (bestAt < 0) {
        return ids;
      }
      ids = [
        ...ids.slice(0, bestAt),
        FIRST_MERGE_ID + bestRank,
        ...ids.slice(bestAt + 2),
      ];
    }
  }

  decode(ids: readonly number[]): string {
    const parts = ids.filter((id) => id !== EOS_ID).map((id) => this.expansions[id]);
    return Buffer.concat(parts).toString("utf-8");
  }

  /** All ids whose byte expansion equals the given string. */
  idsFor(text: string): number[] {
    const wanted = Buffer.from(text, "utf-8");
    const ids: number[] = [];
    this.expansions.forEach((expansion, id) => {
      if (id !== EOS_ID && wanted.equals(Buffer.from(expansion))) {
        ids.push(id);
      }
    });
    return ids;
  }
}

function concat(a: Uint8Array, b: Uint8Array): Uint8Array {
  const out = new Uint8Array(a.length + b.length);
  out.set(a, 0);
  out.set(b, a.length);
  return out;
}

const CH = (s: string) => s.charCodeAt(0);

/**
 * Default tokenizer: marker merges first (so ">>", "<<" and their
 * space-padded variants are single tokens), then a few common English merges.
 */
export function defaultTokenizer(): ByteBpeTokenizer {
  const GT = CH(">");
  const LT = CH("<");
  const SP = CH(" ");
  const merges: MergePair[] = [
    [GT, GT],                  // 257 ">>"
    [LT, LT],                  // 258 "<<"
    [SP, 257],                 // 259 " >>"
    [SP, 258],                 // 260 " <<"
    [CH("t"), CH("h")],        // 261 "th"
    [261, CH("e")],            // 262 "the"
    [SP, 262],                 // 263 " the"
    [CH("i"), CH("n")],        // 264 "in"
    [CH("o"), CH("n")],        // 265 "on"
    [CH("e"), CH("r")],        // 266 "er"
    [SP, CH("a")],             // 267 " a"
    [CH("o"), CH("g")],        // 268 "og"
  ];
  return new ByteBpeTokenizer(merges);
}
