"""Language-model scoring contract and the deterministic tabular toy model.

The engine decodes against two methods only: a full next-token log
distribution and teacher-forced scoring of a target sequence. Teacher-forced
scoring is a separate method (not a loop over ``next_dist`` at the call
site) because remote model adapters can implement it in one pass.
"""

from __future__ import annotations

import abc
import json
from pathlib import Path

from .core import (
    LogProbDist,
    NEG_INF,
    TokenSeq,
    Vocab,
    DecodingError,
    EmptySequenceError,
    normalize_dist,
)


class ContextTooLongError(DecodingError):
    """Context exceeds the model's advertised limit."""


class ModelUnavailableError(DecodingError):
    """A model adapter's transport failed."""


class ZeroProbTokenError(DecodingError):
    """A teacher-forced target token has zero model probability."""


class MissingContextError(DecodingError):
    """TabularLM has no row for a context and fallback is 'error'."""


class LanguageModel(abc.ABC):
    """Abstract scoring contract.

    Both methods are pure functions of their arguments for a fixed model:
    identical contexts yield identical distributions. Contexts passed to
    ``next_dist`` may contain eos mid-sequence when teacher-forcing scores
    tokens conditioned on a terminated output span.
    """

    vocab: Vocab
    model_id: str
    supports_batch_scoring: bool = False
    context_limit: int | None = None

    @abc.abstractmethod
    def next_dist(self, context: TokenSeq) -> LogProbDist:
        """Full next-token log distribution given ``context``."""

    def score_sequence(self, prefix: TokenSeq, target: TokenSeq) -> list[float]:
        """Per-token log-probabilities of ``target`` teacher-forced after ``prefix``.

        Element t is log p(target_t | prefix + target_{<t}); the sum is
        log p(target | prefix). Zero-probability tokens come back as
        ``NEG_INF`` entries; callers decide whether that is fatal.
        """
        if len(target) == 0:
            raise EmptySequenceError("score_sequence needs a non-empty target")
        out: list[float] = []
        ctx = list(prefix)
        for tok in target:
            out.append(self.next_dist(tuple(ctx)).values[tok])
            ctx.append(tok)
        return out


class TabularLM(LanguageModel):
    """Deterministic n-gram model backed by explicit conditional weight rows.

    The context key is the last ``order - 1`` token ids, left-padded with
    bos (or -1 when the vocabulary has no bos). Missing rows fall back to
    the uniform distribution by default, which keeps the model total over
    all contexts, or raise when ``fallback="error"``.
    """

    def __init__(
        self,
        vocab: Vocab,
        order: int,
        weights: dict[tuple[int, ...], dict[int, float]],
        fallback: str = "uniform",
        model_id: str = "tabular",
    ) -> None:
        if order < 1:
            raise DecodingError(f"order must be >= 1, got {order}")
        if fallback not in ("uniform", "error"):
            raise DecodingError(f"fallback must be 'uniform' or 'error', got {fallback!r}")
        self.vocab = vocab
        self.order = order
        self.weights = {tuple(k): dict(v) for k, v in weights.items()}
        self.fallback = fallback
        self.model_id = model_id
        self.supports_batch_scoring = True
        self.context_limit = None
        self._dists: dict[tuple[int, ...], LogProbDist] = {}
        self._uniform: LogProbDist | None = None
        for key in self.weights:
            if len(key) != order - 1:
                raise DecodingError(
                    f"context key {key} has length {len(key)}, expected {order - 1}"
                )
            self._row_dist(key)  # every stored row must normalize

    def context_key(self, context: TokenSeq) -> tuple[int, ...]:
        need = self.order - 1
        pad = self.vocab.bos if self.vocab.bos is not None else -1
        window = tuple(context[-need:]) if need else ()
        return (pad,) * (need - len(window)) + window

    def _row_dist(self, key: tuple[int, ...]) -> LogProbDist:
        dist = self._dists.get(key)
        if dist is None:
            row = self.weights[key]
            raw = [row.get(i, 0.0) for i in range(self.vocab.size)]
            dist = normalize_dist(raw)
            self._dists[key] = dist
        return dist

    def next_dist(self, context: TokenSeq) -> LogProbDist:
        key = self.context_key(context)
        if key in self.weights:
            return self._row_dist(key)
        if self.fallback == "error":
            raise MissingContextError(f"no row for context key {key}")
        if self._uniform is None:
            self._uniform = normalize_dist([1.0] * self.vocab.size)
        return self._uniform

    # -- persistence ---------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "TabularLM":
        """Build from the JSON document format.

        Schema: ``{order, vocab: [strings], rows: [{context: [strings],
        weights: {token: weight}}], fallback: "uniform"|"error"}`` with
        optional ``eos``/``bos`` keys naming the special surfaces
        (defaults: "<eos>" and "<bos>" when present in the vocab).
        """
        surfaces = list(doc["vocab"])
        eos_surface = doc.get("eos", "<eos>")
        if eos_surface not in surfaces:
            raise DecodingError(f"eos surface {eos_surface!r} not in vocab")
        bos_surface = doc.get("bos", "<bos>")
        bos = surfaces.index(bos_surface) if bos_surface in surfaces else None
        vocab = Vocab(tuple(surfaces), eos=surfaces.index(eos_surface), bos=bos)
        weights: dict[tuple[int, ...], dict[int, float]] = {}
        for row in doc["rows"]:
            key = tuple(vocab.id_of(s) for s in row["context"])
            weights[key] = {vocab.id_of(s): float(w) for s, w in row["weights"].items()}
        return cls(
            vocab,
            int(doc["order"]),
            weights,
            fallback=doc.get("fallback", "uniform"),
            model_id=doc.get("model_id", "tabular"),
        )

    def to_dict(self) -> dict:
        rows = []
        for key in sorted(self.weights):
            ctx = [self.vocab.tokens[i] if i >= 0 else "<bos>" for i in key]
            rows.append(
                {
                    "context": ctx,
                    "weights": {
                        self.vocab.tokens[i]: w for i, w in sorted(self.weights[key].items())
                    },
                }
            )
        doc = {
            "order": self.order,
            "vocab": list(self.vocab.tokens),
            "eos": self.vocab.tokens[self.vocab.eos],
            "rows": rows,
            "fallback": self.fallback,
        }
        if self.vocab.bos is not None:
            doc["bos"] = self.vocab.tokens[self.vocab.bos]
        return doc

    @classmethod
    def from_json_file(cls, path: str | Path) -> "TabularLM":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_json_file(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
            fh.write("\n")
