/**
 * Scoring contract the adapter serves: a full next-token log distribution
 * and teacher-forced per-token scores. Both must be deterministic for a
 * fixed model; serve() probes that at startup.
 */

import { Tokenizer } from './tokenizer.js';

export interface ScoringModel {
  readonly modelId: string;
  readonly tokens: readonly string[];
  readonly eosId: number;
  readonly bosId: number | null;
  readonly contextLimit: number | null;
  readonly tokenizer: Tokenizer;
  nextLogprobs(context: readonly number[]): number[];
}

/** log p(target_t | prefix + target_{<t}) per token, by chaining nextLogprobs. */
export function scoreSequence(
  model: ScoringModel,
  prefix: readonly number[],
  target: readonly number[],
): number[] {
  if (target.length === 0) throw new Error('score_sequence needs a non-empty target');
  const out: number[] = [];
  const ctx = [...prefix];
  for (const tok of target) {
    const dist = model.nextLogprobs(ctx);
    if (tok < 0 || tok >= dist.length) throw new Error(`token id ${tok} out of range`);
    out.push(dist[tok]);
    ctx.push(tok);
  }
  return out;
}

/** Numerically stable log-softmax. */
export function logSoftmax(logits: readonly number[]): number[] {
  const max = Math.max(...logits);
  let sum = 0;
  for (const v of logits) sum += Math.exp(v - max);
  const logZ = max + Math.log(sum);
  return logits.map((v) => v - logZ);
}
