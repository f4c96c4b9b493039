/**
 * Toy samplers driving the session protocol end to end.
 *
 * Greedy picks the lowest allowed id at each step; random picks uniformly
 * from the mask with a seeded PRNG, so both are bit-reproducible. Because
 * every step is mask-checked by the engine, any decode that reaches EOS is a
 * valid annotated reproduction of its target, whatever the sampler did.
 *
 * Where constrained generation begins is the caller's choice: by default it
 * starts at the first completion token (right after the inference token);
 * `forcePrefix` pins the first emissions to specific token ids (still
 * mask-checked) for callers whose tokenizer merges across that boundary.
 */

import { MaskClient } from "./client.js";
import { Truncated } from "./errors.js";
import { mulberry32, pickUniform } from "./prng.js";
import { expansionTable, VocabFile } from "./vocab.js";

export type SamplerMode =
  | { kind: "toy_greedy" }
  | { kind: "toy_random"; seed: number };

export interface DecodeConfig {
  maxNewTokens: number;
  forcePrefix?: number[];
}

export interface DecodeResult {
  text: string;
  tokenIds: number[];
}

export async function runToyDecode(
  client: MaskClient,
  vocab: VocabFile,
  target: string,
  mode: SamplerMode,
  config: DecodeConfig,
): Promise<DecodeResult> {
  if (config.maxNewTokens < 1) {
    throw new Error("maxNewTokens must be at least 1");
  }
  const expansions = expansionTable(vocab);
  const rng = mode.kind === "toy_random" ? mulberry32(mode.seed) : null;
  const session = await client.open(target);
  const tokenIds: number[] = [];
  const emitted: number[] = [];
  try {
    const force = config.forcePrefix ?? [];
    for (let step = 0; step < config.maxNewTokens; step++) {
      let token: number;
      if (step < force.length) {
        token = force[step];
      } else {
        const allowed = await client.mask(session); // sorted ascending
        token = rng ? pickUniform(allowed, rng) : allowed[0];
      }
      const done = await client.advance(session, token);
      tokenIds.push(token);
      if (token !== vocab.special.eos_id) {
        emitted.push(...(expansions.get(token) ?? []));
      }
      if (done) {
        return {
          text: Buffer.from(Uint8Array.from(emitted)).toString("utf-8"),
          tokenIds,
        };
      }
    }
    throw new Truncated(
      `hit maxNewTokens=${config.maxNewTokens} before EOS on ${JSON.stringify(target)}`,
    );
  } finally {
    await client.close(session).catch(() => undefined);
  }
}
