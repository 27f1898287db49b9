"""The span-verified decode loop.

One session walks the output left to right. Steps whose candidate set is a
singleton emit the argmax directly. At a divergence point the engine rolls
out every candidate, derives the dynamic span length k from the recorded
risk positions (Left or Right boundary; k = 0 in token mode), scores each
span's PMI against the input under the backward template, re-ranks by

    q(span) = log p(seed | context) + PMI(span, input | output so far)

and commits the selected span, resuming at step i + k + 1. Interior
divergence points inside a committed span are not revisited.

Randomness: a single seeded generator per session, consumed in decode
order with exactly one draw per sampled span selection. Greedy selection
consumes no draws, so runs are reproducible for a fixed seed.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, replace

from .core import (
    DIVER_LEFT,
    DIVER_STRATEGIES,
    DIVER_TOKEN,
    DecodeTrace,
    DecoderConfig,
    DecodingError,
    NEG_INF,
    TokenSeq,
    logsumexp,
)
from .divergence import candidate_set, is_divergence
from .lm import LanguageModel
from .spans import (
    LEFT,
    RIGHT,
    CandidateSpan,
    RiskSet,
    build_spans,
    dynamic_k,
    extend_rollout,
    rollout_candidate,
)
from .verifier import PromptTemplatePair, pmi_score_batch


class EmptySpanListError(DecodingError):
    """select_span needs at least one span."""


@dataclass(frozen=True)
class DecodeResult:
    """Final output tokens (without the eos terminator) plus trace and stats.

    ``stats`` always carries: tokens_emitted, divergence_count,
    span_lengths, ended_with_eos, wall_time_ns, tokens_per_second.
    Generation stops either by producing eos (recorded in
    ``ended_with_eos``) or by reaching max_new_tokens.
    """

    output: TokenSeq
    trace: DecodeTrace
    stats: dict


def rerank(spans: list[CandidateSpan]) -> list[CandidateSpan]:
    """Assign q = seed base log-prob + PMI and sort by q descending.

    Ties break by ascending seed token id. Every span must already carry
    its PMI value; tokens outside the candidate set never become spans,
    which realizes their implicit -inf score.
    """
    scored = []
    for s in spans:
        if s.pmi is None:
            raise DecodingError("rerank needs spans with pmi computed")
        scored.append(replace(s, q=s.seed_base_logp + s.pmi))
    scored.sort(key=lambda s: (-(s.q if s.q is not None else NEG_INF), s.seed_token))
    return scored


def select_span(
    spans: list[CandidateSpan],
    sample: bool,
    rng: random.Random,
) -> CandidateSpan:
    """Pick a span greedily (argmax q) or by sampling from softmax(q).

    Greedy ties go to the lowest seed token id; with a pre-ranked list that
    is simply the first element. Sampling draws one uniform variate and
    walks the cumulative softmax in ranked order; spans with q = -inf carry
    zero mass. If every span is -inf the greedy tie-break applies.
    """
    if not spans:
        raise EmptySpanListError("no spans to select from")
    ranked = sorted(
        spans, key=lambda s: (-(s.q if s.q is not None else NEG_INF), s.seed_token)
    )
    if not sample:
        return ranked[0]
    qs = [s.q if s.q is not None else NEG_INF for s in ranked]
    total = logsumexp(qs)
    if total == NEG_INF:
        return ranked[0]
    u = rng.random()
    acc = 0.0
    for s, q in zip(ranked, qs):
        if q == NEG_INF:
            continue
        acc += math.exp(q - total)
        if u < acc:
            return s
    # Rounding can leave the cumulative mass a hair below 1; take the last
    # span with finite q.
    for s in reversed(ranked):
        if (s.q if s.q is not None else NEG_INF) > NEG_INF:
            return s
    return ranked[0]


def decode(
    model: LanguageModel,
    verify_model: LanguageModel | None,
    tpl: PromptTemplatePair,
    input_text: str,
    cfg: DecoderConfig,
) -> DecodeResult:
    """Run one span-verified decode session.

    ``verify_model`` supplies the backward scoring; pass None to verify
    with the forward model (both run through the same code path). The
    prompt is the forward template rendered with ``input_text``, and the
    PMI target is the tokenized input itself.
    """
    cfg.validate()
    if cfg.strategy not in DIVER_STRATEGIES:
        raise DecodingError(f"decode() handles {sorted(DIVER_STRATEGIES)}, got {cfg.strategy!r}")
    vm = verify_model if verify_model is not None else model
    vocab = model.vocab
    eos = vocab.eos
    prompt = vocab.encode(tpl.render_forward(input_text))
    mode = LEFT if cfg.strategy == DIVER_LEFT else RIGHT
    rng = random.Random(cfg.rng_seed)
    trace = DecodeTrace()
    y: list[int] = []
    ended_with_eos = False
    t0 = time.perf_counter_ns()

    while len(y) < cfg.max_new_tokens:
        i = len(y)
        context = prompt + tuple(y)
        dist = model.next_dist(context)
        cs = candidate_set(dist, cfg.gamma, step=i, max_candidates=cfg.max_candidates)

        if not is_divergence(cs):
            tok = cs.members[0]
            if tok == eos:
                ended_with_eos = True
                break
            y.append(tok)
            trace.add(i, "emit", {"token": tok, "logp": dist.values[tok]})
            continue

        trace.add(
            i,
            "divergence",
            {"members": list(cs.members), "base_logp": [cs.base_logp[m] for m in cs.members]},
        )

        if cfg.strategy == DIVER_TOKEN:
            # Token-level verification: spans are the bare candidates, so
            # rollouts would cost model calls without changing the result.
            k = 0
            spans = [
                CandidateSpan((m,), cs.base_logp[m], terminal=(m == eos))
                for m in cs.members
            ]
        else:
            rollouts = [
                rollout_candidate(model, context, m, cfg.gamma, cfg.max_span_len, step=i)
                for m in cs.members
            ]
            risks = RiskSet({r.seed_token: r.first_risk for r in rollouts})
            k = dynamic_k(risks, i, mode)
            if mode == RIGHT:
                rollouts = [
                    extend_rollout(model, context, r, k + 1) if len(r.tokens) < k + 1 else r
                    for r in rollouts
                ]
            spans = build_spans(rollouts, k, eos, cs.base_logp)

        scores = pmi_score_batch(vm, tpl, input_text, tuple(y), spans)
        clamped = {ps.span.seed_token for ps in scores if ps.clamped}
        scored = [replace(s, pmi=ps.value) for s, ps in zip(spans, scores)]
        ranked = rerank(scored)
        for s in ranked:
            trace.add(
                i,
                "span-eval",
                {
                    "seed": s.seed_token,
                    "span_tokens": list(s.tokens),
                    "pmi": s.pmi,
                    "q": s.q,
                    "terminal": s.terminal,
                    "clamped": s.seed_token in clamped,
                },
            )
        chosen = select_span(ranked, cfg.sample_spans, rng)

        committed = [t for t in chosen.tokens if t != eos]
        room = cfg.max_new_tokens - len(y)
        committed = committed[:room]
        y.extend(committed)
        trace.add(
            i,
            "selection",
            {
                "seed": chosen.seed_token,
                "k": k,
                "span_tokens": list(chosen.tokens),
                "committed": committed,
                "q": chosen.q,
                "terminal": chosen.terminal,
            },
        )
        if chosen.terminal:
            ended_with_eos = True
            break

    wall = max(time.perf_counter_ns() - t0, 1)
    stats = {
        "tokens_emitted": len(y),
        "divergence_count": trace.divergence_count,
        "span_lengths": trace.span_lengths,
        "ended_with_eos": ended_with_eos,
        "wall_time_ns": wall,
        "tokens_per_second": len(y) / (wall / 1e9),
    }
    return DecodeResult(output=tuple(y), trace=trace, stats=stats)
