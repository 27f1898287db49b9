/**
 * Loader for the tabular model JSON the engine's toy models persist to:
 * {order, vocab: [strings], rows: [{context: [strings], weights: {token:
 * weight}}], fallback: "uniform"|"error"} with optional eos/bos surface
 * names. Serving one of these lets the engine cross-check bridge scoring
 * against its local implementation bit for bit.
 */

import { readFileSync } from 'node:fs';
import { z } from 'zod';

import { ScoringModel } from './model.js';
import { Tokenizer } from './tokenizer.js';

const DocSchema = z.object({
  order: z.number().int().min(1),
  vocab: z.array(z.string()).min(1),
  eos: z.string().optional(),
  bos: z.string().optional(),
  rows: z.array(
    z.object({
      context: z.array(z.string()),
      weights: z.record(z.number().nonnegative()),
    }),
  ),
  fallback: z.enum(['uniform', 'error']).default('uniform'),
  model_id: z.string().optional(),
});

export class TabularModel implements ScoringModel {
  readonly modelId: string;
  readonly tokens: readonly string[];
  readonly eosId: number;
  readonly bosId: number | null;
  readonly contextLimit = null;
  readonly tokenizer: Tokenizer;

  private readonly order: number;
  private readonly rows: Map<string, Map<number, number>>;
  private readonly fallback: 'uniform' | 'error';

  constructor(doc: unknown) {
    const parsed = DocSchema.parse(doc);
    this.tokens = parsed.vocab;
    this.tokenizer = new Tokenizer(this.tokens);
    const eosSurface = parsed.eos ?? '<eos>';
    const eos = parsed.vocab.indexOf(eosSurface);
    if (eos < 0) throw new Error(`eos surface '${eosSurface}' not in vocab`);
    this.eosId = eos;
    const bosSurface = parsed.bos ?? '<bos>';
    const bos = parsed.vocab.indexOf(bosSurface);
    this.bosId = bos >= 0 ? bos : null;
    this.order = parsed.order;
    this.fallback = parsed.fallback;
    this.modelId = parsed.model_id ?? 'tabular';
    this.rows = new Map();
    for (const row of parsed.rows) {
      const key = row.context.map((s) => this.surfaceId(s)).join(',');
      const weights = new Map<number, number>();
      for (const [surface, w] of Object.entries(row.weights)) {
        weights.set(this.surfaceId(surface), w);
      }
      this.rows.set(key, weights);
    }
  }

  static fromFile(path: string): TabularModel {
    return new TabularModel(JSON.parse(readFileSync(path, 'utf-8')));
  }

  private surfaceId(surface: string): number {
    const id = this.tokens.indexOf(surface);
    if (id < 0) throw new Error(`unknown token '${surface}' in model document`);
    return id;
  }

  nextLogprobs(context: readonly number[]): number[] {
    const need = this.order - 1;
    const pad = this.bosId ?? -1;
    const window = context.slice(Math.max(context.length - need, 0));
    const key = [
      ...Array<number>(need - window.length).fill(pad),
      ...window,
    ].join(',');
    const row = this.rows.get(key);
    if (row === undefined) {
      if (this.fallback === 'error') throw new Error(`no row for context key [${key}]`);
      const u = Math.log(1 / this.tokens.length);
      return this.tokens.map(() => u);
    }
    let total = 0;
    for (const w of row.values()) total += w;
    return this.tokens.map((_, id) => {
      const w = row.get(id) ?? 0;
      return w > 0 ? Math.log(w / total) : -Infinity;
    });
  }
}
