/**
 * Request handling: every line in, exactly one response line out. Protocol
 * violations and scoring errors become error responses; the process stays
 * alive. Startup probes verify scoring determinism and scan a small text
 * corpus for tokenizer round-trip mismatches before serving.
 */

import { MlpLM } from './mlp.js';
import { ScoringModel, scoreSequence } from './model.js';
import {
  PROTOCOL_VERSION,
  RequestSchema,
  Response,
  decodeMessage,
  encodeMessage,
} from './protocol.js';
import { PROBE_CORPUS } from './tokenizer.js';
import { TabularModel } from './tabular.js';

export function resolveModel(spec: string): ScoringModel {
  if (spec === 'mlp' || spec.startsWith('mlp:')) {
    const seed = spec.includes(':') ? Number(spec.split(':')[1]) : undefined;
    return new MlpLM(seed);
  }
  if (spec.startsWith('tabular:')) {
    return TabularModel.fromFile(spec.slice('tabular:'.length));
  }
  throw new Error(`unknown model spec '${spec}' (want mlp[:SEED] or tabular:PATH)`);
}

function resolveIds(model: ScoringModel, value: number[] | string): number[] {
  if (typeof value === 'string') return model.tokenizer.encode(value);
  const size = model.tokens.length;
  for (const tok of value) {
    if (!Number.isInteger(tok) || tok < 0 || tok >= size) {
      throw new Error(`token id ${tok} out of range for vocab size ${size}`);
    }
  }
  return value;
}

export function handleLine(model: ScoringModel, line: string): Response {
  let requestId: string | null = null;
  try {
    const raw = decodeMessage(line);
    if (typeof raw.request_id === 'string') requestId = raw.request_id;
    const req = RequestSchema.parse(raw);
    requestId = req.request_id;
    if (req.op === 'hello') {
      return {
        request_id: req.request_id,
        ok: true,
        payload: {
          v: PROTOCOL_VERSION,
          model_id: model.modelId,
          vocab_size: model.tokens.length,
          eos_id: model.eosId,
          bos_id: model.bosId,
          context_limit: model.contextLimit,
          tokens: [...model.tokens],
        },
      };
    }
    if (req.context === undefined) throw new Error(`${req.op} needs a context`);
    const context = resolveIds(model, req.context);
    if (model.contextLimit !== null && context.length > model.contextLimit) {
      throw new Error(`context of ${context.length} tokens exceeds limit ${model.contextLimit}`);
    }
    if (req.op === 'next_logprobs') {
      return {
        request_id: req.request_id,
        ok: true,
        payload: { logprobs: model.nextLogprobs(context) },
      };
    }
    if (req.target === undefined) throw new Error('score_sequence needs a target');
    const target = resolveIds(model, req.target);
    return {
      request_id: req.request_id,
      ok: true,
      payload: { logprobs: scoreSequence(model, context, target) },
    };
  } catch (err) {
    return {
      request_id: requestId,
      ok: false,
      error: err instanceof Error ? err.message : String(err),
    };
  }
}

export interface ProbeReport {
  deterministic: boolean;
  maxDelta: number;
  tokenizerMismatches: { text: string; offset: number }[];
}

/** Startup self-checks: repeated scoring must agree within 1e-6. */
export function runStartupProbes(model: ScoringModel): ProbeReport {
  const contexts: number[][] = [[], [model.eosId], [0, 1 % model.tokens.length]];
  let maxDelta = 0;
  for (const ctx of contexts) {
    const a = model.nextLogprobs(ctx);
    const b = model.nextLogprobs(ctx);
    for (let i = 0; i < a.length; i += 1) {
      maxDelta = Math.max(maxDelta, Math.abs(a[i] - b[i]));
    }
  }
  const mismatches: { text: string; offset: number }[] = [];
  for (const text of PROBE_CORPUS) {
    try {
      const result = model.tokenizer.roundTrip(text);
      if (!result.ok) mismatches.push({ text, offset: result.offset });
    } catch {
      // unknown tokens in the probe corpus are fine; only silent
      // round-trip corruption is worth reporting
    }
  }
  return { deterministic: maxDelta <= 1e-6, maxDelta, tokenizerMismatches: mismatches };
}

export function respond(model: ScoringModel, line: string): string {
  return encodeMessage(handleLine(model, line));
}
