/**
 * Whitespace tokenizer owned by the adapter. Every vocabulary entry is an
 * atomic symbol, so prefix-stability holds whenever the text round-trips:
 * detokenize(tokenize(text)) === text. Texts with irregular whitespace are
 * reported, never silently normalized into a different scoring request.
 */

export interface Mismatch {
  ok: false;
  /** First byte offset at which the round-tripped text diverges. */
  offset: number;
  roundTripped: string;
}

export interface RoundTrip {
  ok: true;
  ids: number[];
}

export class Tokenizer {
  private readonly index: Map<string, number>;

  constructor(readonly tokens: readonly string[]) {
    this.index = new Map(tokens.map((t, i) => [t, i]));
    if (this.index.size !== tokens.length) {
      throw new Error('vocabulary surface strings must be unique');
    }
  }

  encode(text: string): number[] {
    const parts = text.split(/\s+/).filter((p) => p.length > 0);
    return parts.map((p) => {
      const id = this.index.get(p);
      if (id === undefined) throw new Error(`unknown token '${p}' in text context`);
      return id;
    });
  }

  decode(ids: readonly number[]): string {
    return ids.map((i) => this.tokens[i]).join(' ');
  }

  /** Encode and verify the text reproduces itself; report the first divergence. */
  roundTrip(text: string): RoundTrip | Mismatch {
    const ids = this.encode(text);
    const back = this.decode(ids);
    if (back === text) return { ok: true, ids };
    let offset = 0;
    const n = Math.min(text.length, back.length);
    while (offset < n && text[offset] === back[offset]) offset += 1;
    return { ok: false, offset, roundTripped: back };
  }
}

/** Short corpus scanned at startup; the last entry intentionally fails. */
export const PROBE_CORPUS = ['the cat sat', 'a dog ran', '', 'the  dog'];
