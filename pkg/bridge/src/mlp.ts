/**
 * A tiny fixed-weight neural language model: one-hot context window into a
 * tanh hidden layer into a softmax over the vocabulary. Weights come from
 * a seeded generator at construction, so the model is fully deterministic,
 * needs no tensor runtime, and still exercises real floating-point scoring
 * paths end to end.
 */

import { ScoringModel, logSoftmax } from './model.js';
import { Tokenizer } from './tokenizer.js';

const VOCAB = [
  '<bos>',
  '<eos>',
  'the',
  'a',
  'cat',
  'dog',
  'sat',
  'ran',
  'on',
  'mat',
  'rug',
  'saw',
] as const;

const WINDOW = 3;
const HIDDEN = 16;

/** mulberry32: small deterministic PRNG, plenty for weight init. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function matrix(rows: number, cols: number, next: () => number): number[][] {
  const out: number[][] = [];
  for (let r = 0; r < rows; r += 1) {
    const row: number[] = [];
    for (let c = 0; c < cols; c += 1) row.push((next() - 0.5) * 1.6);
    out.push(row);
  }
  return out;
}

export class MlpLM implements ScoringModel {
  readonly modelId: string;
  readonly tokens = VOCAB;
  readonly eosId = VOCAB.indexOf('<eos>');
  readonly bosId = VOCAB.indexOf('<bos>');
  readonly contextLimit = 48;
  readonly tokenizer = new Tokenizer(VOCAB);

  private readonly w1: number[][];
  private readonly b1: number[];
  private readonly w2: number[][];
  private readonly b2: number[];

  constructor(seed = 0x5eed) {
    this.modelId = `toy-mlp-v1-seed${seed}`;
    const next = mulberry32(seed);
    this.w1 = matrix(HIDDEN, WINDOW * VOCAB.length, next);
    this.b1 = matrix(1, HIDDEN, next)[0];
    this.w2 = matrix(VOCAB.length, HIDDEN, next);
    this.b2 = matrix(1, VOCAB.length, next)[0];
  }

  nextLogprobs(context: readonly number[]): number[] {
    const v = VOCAB.length;
    for (const tok of context) {
      if (tok < 0 || tok >= v) throw new Error(`token id ${tok} out of range`);
    }
    // last WINDOW tokens, left-padded with bos, as a one-hot concatenation
    const window: number[] = [];
    for (let i = WINDOW; i >= 1; i -= 1) {
      window.push(context.length >= i ? context[context.length - i] : this.bosId);
    }
    const hidden: number[] = [];
    for (let h = 0; h < HIDDEN; h += 1) {
      let acc = this.b1[h];
      for (let p = 0; p < WINDOW; p += 1) {
        acc += this.w1[h][p * v + window[p]];
      }
      hidden.push(Math.tanh(acc));
    }
    const logits: number[] = [];
    for (let o = 0; o < v; o += 1) {
      let acc = this.b2[o];
      for (let h = 0; h < HIDDEN; h += 1) acc += this.w2[o][h] * hidden[h];
      logits.push(acc);
    }
    return logSoftmax(logits);
  }
}
