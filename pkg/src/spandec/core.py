"""Shared value types, configuration, and log-domain numeric conventions.

All scores in the engine live in the natural-log domain at 64-bit float
precision. Zero probability is represented by ``NEG_INF``; comparisons and
``logsumexp`` treat it as absolute exclusion. The only probability-space
arithmetic in the package happens inside the contrastive baselines, whose
defining formulas are written in probability space.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

NEG_INF = float("-inf")

# A token sequence is a plain tuple of dense token ids.
TokenSeq = tuple[int, ...]


class DecodingError(Exception):
    """Base class for all errors raised by this package."""


class BadValueError(DecodingError):
    """A numeric input contained NaN or a negative weight."""


class AllZeroError(DecodingError):
    """Every weight in a distribution was zero."""


class EmptySequenceError(DecodingError):
    """An operation that needs at least one element got an empty sequence."""


class UnknownTokenError(DecodingError):
    """A surface string does not belong to the vocabulary."""


class ConfigError(DecodingError):
    """A DecoderConfig field is out of its documented range."""


GREEDY = "greedy"
NUCLEUS = "nucleus"
BEAM = "beam"
CD = "cd"
CAD = "cad"
DIVER_LEFT = "diver-left"
DIVER_RIGHT = "diver-right"
DIVER_TOKEN = "diver-token"

STRATEGIES = frozenset(
    {GREEDY, NUCLEUS, BEAM, CD, CAD, DIVER_LEFT, DIVER_RIGHT, DIVER_TOKEN}
)
DIVER_STRATEGIES = frozenset({DIVER_LEFT, DIVER_RIGHT, DIVER_TOKEN})


@dataclass(frozen=True)
class Vocab:
    """A finite vocabulary of unique surface strings with dense ids 0..size-1.

    ``eos`` is required; ``bos`` is optional but must differ from ``eos``.
    Text is tokenized by whitespace splitting: every surface string is an
    atomic symbol, so partial outputs always re-tokenize cleanly.
    """

    tokens: tuple[str, ...]
    eos: int
    bos: int | None = None

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise BadValueError("vocabulary surface strings must be unique")
        if not 0 <= self.eos < len(self.tokens):
            raise BadValueError(f"eos id {self.eos} out of range")
        if self.bos is not None:
            if not 0 <= self.bos < len(self.tokens):
                raise BadValueError(f"bos id {self.bos} out of range")
            if self.bos == self.eos:
                raise BadValueError("bos and eos must be distinct")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, surface: str) -> int:
        try:
            return self._index[surface]
        except KeyError:
            raise UnknownTokenError(f"unknown token {surface!r}") from None

    @property
    def _index(self) -> dict[str, int]:
        # Cached lazily on the instance; frozen dataclass, so go via __dict__.
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {s: i for i, s in enumerate(self.tokens)}
            self.__dict__["_index_cache"] = idx
        return idx

    def encode(self, text: str) -> TokenSeq:
        """Whitespace-split ``text`` and map each symbol to its id."""
        return tuple(self.id_of(s) for s in text.split())

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)


def validate_token_seq(vocab: Vocab, ids: Sequence[int]) -> None:
    """Check the TokenSeq invariants: ids in range, eos at most once and final."""
    for i in ids:
        if not 0 <= i < vocab.size:
            raise BadValueError(f"token id {i} out of range for vocab size {vocab.size}")
    eos_positions = [p for p, i in enumerate(ids) if i == vocab.eos]
    if eos_positions and (len(eos_positions) > 1 or eos_positions[0] != len(ids) - 1):
        raise BadValueError("eos may appear at most once and only as the final token")


@dataclass(frozen=True)
class LogProbDist:
    """A full next-token distribution as natural-log probabilities.

    ``values`` has exactly one entry per vocabulary id. Ids outside the
    support carry ``NEG_INF``. The exponentials over the support must sum
    to 1 within 1e-9, which is checked at construction.
    """

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        total = math.fsum(math.exp(v) for v in self.values if v > NEG_INF)
        if not 1.0 - 1e-9 <= total <= 1.0 + 1e-9:
            raise BadValueError(f"distribution mass {total!r} not within 1e-9 of 1")

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.values) if v > NEG_INF)

    def argmax(self) -> int:
        """Highest-probability id; exact ties go to the lowest id."""
        best, best_v = 0, self.values[0]
        for i, v in enumerate(self.values):
            if v > best_v:
                best, best_v = i, v
        return best

    def prob(self, i: int) -> float:
        return math.exp(self.values[i])


def normalize_dist(raw: Sequence[float]) -> LogProbDist:
    """Normalize non-negative weights into a LogProbDist.

    Zero weights map to ``NEG_INF``. Raises ``AllZeroError`` when every
    weight is zero and ``BadValueError`` on NaN or negative entries.
    """
    if len(raw) == 0:
        raise EmptySequenceError("cannot normalize an empty weight vector")
    for w in raw:
        if math.isnan(w) or w < 0.0:
            raise BadValueError(f"weights must be non-negative and finite, got {w!r}")
    total = math.fsum(raw)
    if total <= 0.0:
        raise AllZeroError("all weights are zero")
    return LogProbDist(tuple(math.log(w / total) if w > 0.0 else NEG_INF for w in raw))


def logsumexp(values: Sequence[float]) -> float:
    """Numerically stable log of the sum of exponentials."""
    if len(values) == 0:
        raise EmptySequenceError("logsumexp of an empty sequence")
    m = max(values)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(v - m) for v in values if v > NEG_INF))


@dataclass(frozen=True)
class DecoderConfig:
    """Decode-session configuration.

    Fields specific to one strategy are ignored by the others: ``top_p``
    only affects nucleus sampling, ``alpha`` only CAD, ``beam_width`` only
    beam search, ``gamma``/``max_span_len``/``sample_spans``/``verifier``
    only the candidate-truncating strategies. ``verifier`` names a second
    scoring model (a harness model spec); when unset, verification and the
    CD amateur default to the forward model.
    """

    strategy: str = GREEDY
    gamma: float = 0.3
    top_p: float = 0.9
    alpha: float = 0.5
    beam_width: int = 4
    max_new_tokens: int = 64
    max_span_len: int = 64
    rng_seed: int = 0
    verifier: str | None = None
    sample_spans: bool = False
    max_candidates: int | None = None

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 < self.top_p <= 1.0:
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.alpha < 0.0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.beam_width < 1:
            raise ConfigError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.max_new_tokens < 1:
            raise ConfigError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.max_span_len < 1:
            raise ConfigError(f"max_span_len must be >= 1, got {self.max_span_len}")
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ConfigError("max_candidates must be >= 1 when set")


EVENT_KINDS = ("emit", "divergence", "span-eval", "selection")


@dataclass(frozen=True)
class TraceEvent:
    step: int
    kind: str
    payload: dict
    t_ns: int


@dataclass
class DecodeTrace:
    """Ordered per-step event log for one decode session.

    Events are appended during decoding and the trace is read-only
    afterwards. ``payload`` values are JSON-serializable so traces can be
    persisted as JSON-lines by the harness.
    """

    events: list[TraceEvent] = field(default_factory=list)

    def add(self, step: int, kind: str, payload: dict) -> None:
        if kind not in EVENT_KINDS:
            raise BadValueError(f"unknown trace event kind {kind!r}")
        if self.events and step < self.events[-1].step:
            raise BadValueError("trace event step indices must be non-decreasing")
        self.events.append(TraceEvent(step, kind, payload, time.perf_counter_ns()))

    @property
    def divergence_count(self) -> int:
        return sum(1 for e in self.events if e.kind == "divergence")

    @property
    def span_lengths(self) -> list[int]:
        return [len(e.payload["span_tokens"]) for e in self.events if e.kind == "selection"]

    @property
    def tokens_emitted(self) -> int:
        n = sum(1 for e in self.events if e.kind == "emit")
        n += sum(len(e.payload["committed"]) for e in self.events if e.kind == "selection")
        return n
