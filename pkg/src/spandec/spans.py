"""Candidate rollouts, risk sets, and dynamic span construction.

From a divergence point at output step i, each candidate token is rolled
out greedily until the continuation itself hits a step with multiple
candidates (its first risk step), reaches eos, or exhausts the length cap.
The recorded risk positions give the dynamic span length k: the Left rule
uses the minimum risk, the Right rule the maximum. All positions are
absolute output-step indices, so a risk at the step right after the seed
is i + 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .core import DecodingError, TokenSeq
from .divergence import candidate_set, is_divergence
from .lm import LanguageModel

log = logging.getLogger(__name__)

LEFT = "left"
RIGHT = "right"


class EmptyRiskSetError(DecodingError):
    """dynamic_k needs at least one recorded risk position."""


@dataclass(frozen=True)
class Rollout:
    """One candidate's greedy continuation, paused at its first risk step.

    ``first_risk`` is always populated: the first position j > i whose
    candidate set has multiple members, or the stop position when the
    rollout ended first. A rollout that generates eos at position p stops
    with ``first_risk = p + 1`` so a span cut at that boundary includes the
    eos token; a cap stop at n tokens records ``first_risk = i + n`` the
    same way. ``ended`` is True for eos/cap stops (no risk was found).
    """

    seed_token: int
    tokens: TokenSeq
    first_risk: int
    ended: bool


@dataclass(frozen=True)
class RiskSet:
    """First-emerged risk position per candidate seed token."""

    entries: dict[int, int]

    def positions(self) -> list[int]:
        return list(self.entries.values())


@dataclass(frozen=True)
class CandidateSpan:
    """A k+1-token span rooted at a candidate token.

    ``pmi`` and ``q`` are filled in by the verification stage; ``q`` is the
    seed token's base log-probability plus the span's PMI score. ``terminal``
    marks spans whose final token is eos.
    """

    tokens: TokenSeq
    seed_base_logp: float
    terminal: bool
    pmi: float | None = None
    q: float | None = None

    @property
    def seed_token(self) -> int:
        return self.tokens[0]


def rollout_candidate(
    model: LanguageModel,
    context: TokenSeq,
    seed: int,
    gamma: float,
    cap: int,
    step: int = 0,
) -> Rollout:
    """Greedily extend ``context + [seed]`` until the first risk step.

    ``step`` is the absolute output position of the seed token (the
    divergence step i); ``context`` is the full prompt-plus-prefix the seed
    was proposed under. Before emitting each subsequent token its candidate
    set is computed; a multi-member set stops the rollout without emitting
    and records that position. Risk detection uses the uncapped candidate
    set regardless of any max_candidates speed setting.
    """
    if cap < 1:
        raise DecodingError(f"rollout cap must be >= 1, got {cap}")
    eos = model.vocab.eos
    tokens = [seed]
    pos = step + 1
    while True:
        if tokens[-1] == eos:
            return Rollout(seed, tuple(tokens), pos, True)
        if len(tokens) >= cap:
            # a cap hit stands in for eos when deriving the risk position
            log.debug("rollout for seed %d hit the %d-token cap at step %d", seed, cap, step)
            return Rollout(seed, tuple(tokens), pos, True)
        cs = candidate_set(model.next_dist(tuple(context) + tuple(tokens)), gamma)
        if is_divergence(cs):
            return Rollout(seed, tuple(tokens), pos, False)
        tokens.append(cs.members[0])
        pos += 1


def extend_rollout(
    model: LanguageModel,
    context: TokenSeq,
    rollout: Rollout,
    target_len: int,
) -> Rollout:
    """Extend a risk-paused rollout to ``target_len`` tokens by pure argmax.

    The Right boundary rule may ask for spans longer than a candidate's own
    risk distance; those spans deliberately run through interior divergence
    points, which are not re-examined. Extension therefore takes the argmax
    at every step (ties to the lowest id) and stops early only at eos.
    """
    tokens = list(rollout.tokens)
    while len(tokens) < target_len and tokens[-1] != model.vocab.eos:
        dist = model.next_dist(tuple(context) + tuple(tokens))
        tokens.append(dist.argmax())
    return Rollout(rollout.seed_token, tuple(tokens), rollout.first_risk, rollout.ended)


def dynamic_k(risks: RiskSet, i: int, mode: str) -> int:
    """Span length from the risk set: k = r - i - 1 with r = min (Left) or max (Right)."""
    if not risks.entries:
        raise EmptyRiskSetError("risk set is empty")
    if mode == LEFT:
        r = min(risks.positions())
    elif mode == RIGHT:
        r = max(risks.positions())
    else:
        raise DecodingError(f"mode must be 'left' or 'right', got {mode!r}")
    k = r - i - 1
    if k < 0:
        raise DecodingError(f"risk position {r} precedes step {i}")
    return k


def build_spans(
    rollouts: list[Rollout],
    k: int,
    eos: int,
    base_logp: dict[int, float],
) -> list[CandidateSpan]:
    """Cut each rollout to its first k+1 tokens.

    Rollouts that ended at eos may be shorter than k+1; their spans keep
    the eos token and are flagged terminal. ``base_logp`` supplies each
    seed token's log-probability from the triggering candidate set.
    """
    if k < 0:
        raise DecodingError(f"k must be >= 0, got {k}")
    spans = []
    for r in rollouts:
        tokens = r.tokens[: k + 1]
        spans.append(
            CandidateSpan(
                tokens=tokens,
                seed_base_logp=base_logp[r.seed_token],
                terminal=tokens[-1] == eos,
            )
        )
    return spans
