/**
 * Logits-processor hook: converts session masks into per-step vocabulary
 * restrictions for an external autoregressive generation loop.
 *
 * The processor itself is model-agnostic: it zeroes out (sets to -Infinity)
 * every id the engine disallows, then the caller samples however it likes.
 * Exactness of the reproduction is guaranteed by the engine, not the model,
 * so even a constant-score mock model produces parseable output.
 */

import { MaskClient } from "./client.js";
import { ByteBpeTokenizer } from "./tokenizer.js";
import { VocabFile, verifyHandshake } from "./vocab.js";

export class MaskLogitsProcessor {
  constructor(
    private readonly client: MaskClient,
    private readonly session: number,
  ) {}

  async allowedIds(): Promise<Set<number>> {
    return new Set(await this.client.mask(this.session));
  }

  /** New array with disallowed ids pushed to -Infinity. */
  apply(logits: Float32Array, allowed: Set<number>): Float32Array {
    const out = new Float32Array(logits.length);
    for (let id = 0; id < logits.length; id++) {
      out[id] = allowed.has(id) ? logits[id] : -Infinity;
    }
    return out;
  }
}

/**
 * Handshake then open: refuses to start generation when the vocabulary file
 * does not describe the live tokenizer (VocabMismatch).
 */
export async function openConstrainedSession(
  client: MaskClient,
  tokenizer: ByteBpeTokenizer,
  vocab: VocabFile,
  target: string,
): Promise<number> {
  verifyHandshake(tokenizer, vocab);
  return client.open(target);
}

export type ScoreModel = (stepIndex: number, vocabSize: number) => Float32Array;

/**
 * Minimal generation loop for tests and demos: model scores -> mask ->
 * argmax (ties to the lowest id) -> advance, until EOS or the budget runs out.
 */
export async function generateWithModel(
  client: MaskClient,
  vocab: VocabFile,
  target: string,
  model: ScoreModel,
  maxNewTokens: number,
  forcePrefix: number[] = [],
): Promise<number[]> {
  const session = await client.open(target);
  const processor = new MaskLogitsProcessor(client, session);
  const vocabSize =
    Math.max(...Object.keys(vocab.entries).map(Number), vocab.special.eos_id) + 1;
  const tokenIds: number[] = [];
  try {
    for (let step = 0; step < maxNewTokens; step++) {
      let chosen: number;
      if (step < forcePrefix.length) {
        chosen = forcePrefix[step];
      } else {
        const masked = processor.apply(model(step, vocabSize), await processor.allowedIds());
        chosen = -1;
        for (let id = 0; id < masked.length; id++) {
          if (masked[id] !== -Infinity && (chosen < 0 || masked[id] > masked[chosen])) {
            chosen = id;
          }
        }
      }
      const done = await client.advance(session, chosen);
      tokenIds.push(chosen);
      if (done) {
        return tokenIds;
      }
    }
    return tokenIds;
  } finally {
    await client.close(session).catch(() => undefined);
  }
}
