"""Reference decoding strategies: greedy, nucleus, beam, CD, and CAD.

The two contrastive methods are computed in probability space, matching
their defining formulas; everything else stays in the log domain. All
functions emit into an optional shared DecodeTrace so the harness can
report every strategy through one schema (their divergence counts are 0).
Outputs never include the eos terminator.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .core import DecodeTrace, DecodingError, NEG_INF, TokenSeq
from .divergence import candidate_set
from .lm import LanguageModel


class VocabMismatchError(DecodingError):
    """Expert and amateur models must share one vocabulary."""


@dataclass(frozen=True)
class BeamHypothesis:
    """A beam-search hypothesis; ``tokens`` includes eos once finished by it."""

    tokens: TokenSeq
    cum_logp: float
    finished: bool


def _emit(trace: DecodeTrace | None, step: int, token: int, logp: float) -> None:
    if trace is not None:
        trace.add(step, "emit", {"token": token, "logp": logp})


def greedy_decode(
    model: LanguageModel,
    prompt: TokenSeq,
    max_new_tokens: int,
    trace: DecodeTrace | None = None,
) -> TokenSeq:
    """Argmax token per step (exact ties to the lowest id) until eos or cap."""
    eos = model.vocab.eos
    y: list[int] = []
    while len(y) < max_new_tokens:
        dist = model.next_dist(prompt + tuple(y))
        tok = dist.argmax()
        if tok == eos:
            break
        y.append(tok)
        _emit(trace, len(y) - 1, tok, dist.values[tok])
    return tuple(y)


def nucleus_decode(
    model: LanguageModel,
    prompt: TokenSeq,
    top_p: float,
    rng: random.Random,
    max_new_tokens: int,
    trace: DecodeTrace | None = None,
) -> TokenSeq:
    """Sample each step from the renormalized smallest mass >= top_p.

    Tokens are ordered by descending probability (ties by ascending id) and
    the shortest prefix reaching top_p is kept. One rng draw per emitted
    step, consumed as an inverse-CDF lookup in that order.
    """
    if not 0.0 < top_p <= 1.0:
        raise DecodingError(f"top_p must be in (0, 1], got {top_p}")
    eos = model.vocab.eos
    y: list[int] = []
    while len(y) < max_new_tokens:
        dist = model.next_dist(prompt + tuple(y))
        order = sorted(dist.support, key=lambda i: (-dist.values[i], i))
        kept: list[int] = []
        mass = 0.0
        for i in order:
            kept.append(i)
            mass += dist.prob(i)
            if mass >= top_p:
                break
        u = rng.random() * mass
        acc = 0.0
        tok = kept[-1]
        for i in kept:
            acc += dist.prob(i)
            if u < acc:
                tok = i
                break
        if tok == eos:
            break
        y.append(tok)
        _emit(trace, len(y) - 1, tok, dist.values[tok])
    return tuple(y)


def beam_decode(
    model: LanguageModel,
    prompt: TokenSeq,
    beam_width: int,
    max_new_tokens: int,
    trace: DecodeTrace | None = None,
) -> TokenSeq:
    """Length-unnormalized beam search returning the best finished hypothesis.

    A hypothesis finishes by selecting eos (the eos log-prob counts toward
    its score) or by reaching the length cap. Hypotheses finished by eos
    are preferred over cap-finished ones; equal scores break toward the
    lexicographically smaller token sequence. Width 1 reduces to greedy.
    """
    if beam_width < 1:
        raise DecodingError(f"beam_width must be >= 1, got {beam_width}")
    eos = model.vocab.eos
    active = [BeamHypothesis((), 0.0, False)]
    finished_eos: list[BeamHypothesis] = []
    finished_cap: list[BeamHypothesis] = []
    while active:
        expansions: list[BeamHypothesis] = []
        for hyp in active:
            dist = model.next_dist(prompt + hyp.tokens)
            for tok in dist.support:
                score = hyp.cum_logp + dist.values[tok]
                expansions.append(BeamHypothesis(hyp.tokens + (tok,), score, tok == eos))
        expansions.sort(key=lambda h: (-h.cum_logp, h.tokens))
        # Only expansions surviving the width cut may finish; an eos below
        # the cut must not shadow stronger continuations (width 1 is greedy).
        active = []
        for hyp in expansions[:beam_width]:
            if hyp.finished:
                finished_eos.append(hyp)
            elif len(hyp.tokens) >= max_new_tokens:
                finished_cap.append(hyp)
            else:
                active.append(hyp)
    pool = finished_eos if finished_eos else finished_cap
    if not pool:
        return ()
    best = min(pool, key=lambda h: (-h.cum_logp, h.tokens))
    out = tuple(t for t in best.tokens if t != eos)
    if trace is not None:
        for step, tok in enumerate(out):
            trace.add(step, "emit", {"token": tok})
    return out


def cd_decode(
    model: LanguageModel,
    amateur_model: LanguageModel,
    prompt: TokenSeq,
    gamma: float,
    max_new_tokens: int,
    trace: DecodeTrace | None = None,
) -> TokenSeq:
    """Contrastive decoding: expert-minus-amateur probability gap.

    Each step truncates the expert distribution to its candidate set, then
    picks the candidate maximizing p_expert - p_amateur (probability space,
    ties to the lowest id).
    """
    if model.vocab.tokens != amateur_model.vocab.tokens:
        raise VocabMismatchError("expert and amateur vocabularies differ")
    eos = model.vocab.eos
    y: list[int] = []
    while len(y) < max_new_tokens:
        ctx = prompt + tuple(y)
        expert = model.next_dist(ctx)
        amateur = amateur_model.next_dist(ctx)
        cs = candidate_set(expert, gamma)
        tok, best = cs.members[0], NEG_INF
        for m in cs.members:
            delta = expert.prob(m) - amateur.prob(m)
            if delta > best or (delta == best and m < tok):
                tok, best = m, delta
        if tok == eos:
            break
        y.append(tok)
        _emit(trace, len(y) - 1, tok, expert.values[tok])
    return tuple(y)


def cad_decode(
    model: LanguageModel,
    prompt_with_input: TokenSeq,
    prompt_without_input: TokenSeq,
    alpha: float,
    max_new_tokens: int,
    trace: DecodeTrace | None = None,
) -> TokenSeq:
    """Context-aware decoding: (1 + alpha) * p(with input) - alpha * p(without).

    Scores are probability-space and may be negative; the argmax (ties to
    the lowest id) is still well-defined. Selected tokens extend both
    contexts in lockstep.
    """
    if alpha < 0.0:
        raise DecodingError(f"alpha must be >= 0, got {alpha}")
    eos = model.vocab.eos
    y: list[int] = []
    while len(y) < max_new_tokens:
        with_dist = model.next_dist(prompt_with_input + tuple(y))
        without_dist = model.next_dist(prompt_without_input + tuple(y))
        tok, best = 0, -math.inf
        for v in range(model.vocab.size):
            score = (1.0 + alpha) * with_dist.prob(v) - alpha * without_dist.prob(v)
            if score > best:
                tok, best = v, score
        if tok == eos:
            break
        y.append(tok)
        _emit(trace, len(y) - 1, tok, with_dist.values[tok])
    return tuple(y)
