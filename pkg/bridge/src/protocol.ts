/**
 * Wire protocol: one JSON message per line, one in-flight request per
 * connection.
 *
 * Requests:
 *   {"v":1,"request_id":"...","op":"hello"}
 *   {"request_id":"...","op":"next_logprobs","context":[ids] | "text"}
 *   {"request_id":"...","op":"score_sequence","context":...,"target":...}
 *
 * Responses:
 *   {"request_id":"...","ok":true,"payload":...}
 *   {"request_id":"...","ok":false,"error":"..."}
 *
 * Messages are encoded canonically (fixed key priority, compact JSON) so
 * the engine client and this adapter can round-trip the shared golden
 * file byte for byte.
 */

import { z } from 'zod';

export const PROTOCOL_VERSION = 1;

const tokensOrText = z.union([z.array(z.number().int().nonnegative()), z.string()]);

export const RequestSchema = z
  .object({
    v: z.number().int().optional(),
    request_id: z.string(),
    op: z.enum(['hello', 'next_logprobs', 'score_sequence']),
    context: tokensOrText.optional(),
    target: tokensOrText.optional(),
  })
  .strict();

export type Request = z.infer<typeof RequestSchema>;

export interface HelloPayload {
  v: number;
  model_id: string;
  vocab_size: number;
  eos_id: number;
  bos_id: number | null;
  context_limit: number | null;
  tokens: string[];
}

export interface LogprobsPayload {
  logprobs: number[];
}

export type Payload = HelloPayload | LogprobsPayload;

export interface Response {
  request_id: string | null;
  ok: boolean;
  payload?: Payload;
  error?: string;
}

// Shared with the engine-side client; identical order there.
const KEY_ORDER = [
  'v',
  'request_id',
  'op',
  'context',
  'target',
  'ok',
  'payload',
  'error',
  'model_id',
  'vocab_size',
  'eos_id',
  'bos_id',
  'context_limit',
  'tokens',
];
const KEY_RANK = new Map(KEY_ORDER.map((k, i) => [k, i]));

function canonical(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(canonical);
  }
  if (value !== null && typeof value === 'object') {
    const entries = Object.entries(value as Record<string, unknown>);
    entries.sort((a, b) => {
      const ra = KEY_RANK.get(a[0]) ?? KEY_ORDER.length;
      const rb = KEY_RANK.get(b[0]) ?? KEY_ORDER.length;
      if (ra !== rb) return ra - rb;
      return a[0] < b[0] ? -1 : a[0] > b[0] ? 1 : 0;
    });
    const out: Record<string, unknown> = {};
    for (const [k, v] of entries) out[k] = canonical(v);
    return out;
  }
  return value;
}

/** Serialize one message as a canonical JSON line (no trailing newline). */
export function encodeMessage(msg: unknown): string {
  return JSON.stringify(canonical(msg));
}

/** Parse one line into a plain object; throws on non-object payloads. */
export function decodeMessage(line: string): Record<string, unknown> {
  const value = JSON.parse(line) as unknown;
  if (value === null || typeof value !== 'object' || Array.isArray(value)) {
    throw new Error(`protocol message is not an object: ${line}`);
  }
  return value as Record<string, unknown>;
}
