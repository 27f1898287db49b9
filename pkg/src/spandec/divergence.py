"""Divergence-point detection via relative-threshold candidate truncation.

A decode step is a divergence point when more than one token survives the
truncation rule: keep token v iff p(v) >= gamma * max_w p(w). The
comparison runs in the log domain with a 1e-12 additive slack so that
exact threshold ties (which the rule includes) survive float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import LogProbDist

# Log-domain slack for the >= comparison at the truncation boundary.
THRESHOLD_SLACK = 1e-12


@dataclass(frozen=True)
class CandidateSet:
    """Surviving candidates at one decode step.

    ``members`` is ordered by descending base log-probability, ties broken
    by ascending token id, so iteration order is deterministic. The argmax
    token is always a member.
    """

    step: int
    members: tuple[int, ...]
    base_logp: dict[int, float]


def candidate_set(
    dist: LogProbDist,
    gamma: float,
    step: int = 0,
    max_candidates: int | None = None,
) -> CandidateSet:
    """Truncate ``dist`` to tokens within a factor ``gamma`` of the maximum.

    ``max_candidates`` optionally caps the set size for speed experiments,
    keeping the highest-probability members. The argmax always qualifies,
    so the result is never empty.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    max_logp = max(dist.values)
    cut = max_logp + math.log(gamma) - THRESHOLD_SLACK
    members = [i for i, v in enumerate(dist.values) if v >= cut]
    members.sort(key=lambda i: (-dist.values[i], i))
    if max_candidates is not None:
        members = members[:max_candidates]
    return CandidateSet(step, tuple(members), {i: dist.values[i] for i in members})


def is_divergence(cs: CandidateSet) -> bool:
    """True when the step has multiple candidate tokens."""
    return len(cs.members) > 1
