"""Brute-force reference implementations for test ground truth.

Everything here replays the decoding definitions literally against a
TabularLM's raw weight rows, in probability space, with no caching and no
code shared with the engine modules. These functions back the derived
expected values in the test suite and the hidden ``verify`` CLI
subcommand; they are not part of the supported library surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DecoderConfig, DecodingError, TokenSeq, Vocab
from .core import DIVER_LEFT, DIVER_RIGHT, DIVER_TOKEN, DIVER_STRATEGIES
from .lm import TabularLM, ZeroProbTokenError

# Same additive log-domain slack as the engine's truncation rule; part of
# the candidate-set definition, restated here rather than imported.
_SLACK = 1e-12

_MAX_VOCAB = 8
_MAX_NEW_TOKENS = 8


class ExplosionGuardError(DecodingError):
    """Enumeration would exceed the configured path budget."""


@dataclass(frozen=True)
class EnumeratedOutcome:
    """One eos-terminated sequence with its exact forward log-probability."""

    sequence: TokenSeq
    logp_forward: float
    logp_input_given_output: float | None = None


def _row_probs(model: TabularLM, context: list[int]) -> list[float]:
    """Probability row for a context by direct weight normalization."""
    need = model.order - 1
    pad = model.vocab.bos if model.vocab.bos is not None else -1
    window = tuple(context[-need:]) if need else ()
    key = (pad,) * (need - len(window)) + window
    row = model.weights.get(key)
    if row is None:
        if model.fallback == "error":
            raise DecodingError(f"oracle: no row for context key {key}")
        return [1.0 / model.vocab.size] * model.vocab.size
    total = math.fsum(row.values())
    return [row.get(i, 0.0) / total for i in range(model.vocab.size)]


def _argmax(probs: list[float]) -> int:
    best, best_p = 0, probs[0]
    for i, p in enumerate(probs):
        if p > best_p:
            best, best_p = i, p
    return best


def _candidates(probs: list[float], gamma: float) -> list[int]:
    """Tokens with log p >= log p_max + log gamma - slack, by descending p then id."""
    logs = [math.log(p) if p > 0.0 else -math.inf for p in probs]
    cut = max(logs) + math.log(gamma) - _SLACK
    members = [i for i, lp in enumerate(logs) if lp >= cut]
    members.sort(key=lambda i: (-logs[i], i))
    return members


def _seq_prob(model: TabularLM, prefix: list[int], target: list[int]) -> float:
    """p(target | prefix) as an explicit product of table lookups."""
    p = 1.0
    ctx = list(prefix)
    for tok in target:
        p *= _row_probs(model, ctx)[tok]
        ctx.append(tok)
    return p


def _encode(vocab: Vocab, text: str) -> list[int]:
    return [vocab.id_of(s) for s in text.split()]


def _backward_prefix(model: TabularLM, backward_tpl: str, incomplete_output: str) -> list[int]:
    before = backward_tpl.split("[INPUT]", 1)[0]
    return _encode(model.vocab, before.replace("[INCOMPLETE_OUTPUT]", incomplete_output))


def oracle_pmi(
    model: TabularLM,
    backward_tpl: str,
    input_text: str,
    y_prefix: TokenSeq,
    span: TokenSeq,
) -> float:
    """log p(input | output+span) - log p(input | output), exactly.

    Both conditional likelihoods are explicit probability products. Zero
    probabilities surface as +-inf (no clamping); a zero on both sides has
    no defined ratio and raises.
    """
    vocab = model.vocab
    x = _encode(vocab, input_text)
    detok = lambda ids: " ".join(vocab.tokens[i] for i in ids)  # noqa: E731
    p_base = _seq_prob(model, _backward_prefix(model, backward_tpl, detok(y_prefix)), x)
    p_span = _seq_prob(
        model, _backward_prefix(model, backward_tpl, detok(tuple(y_prefix) + tuple(span))), x
    )
    if p_span == 0.0 and p_base == 0.0:
        raise ZeroProbTokenError("oracle: input has zero probability in both contexts")
    if p_span == 0.0:
        return -math.inf
    if p_base == 0.0:
        return math.inf
    return math.log(p_span) - math.log(p_base)


def _rollout(
    model: TabularLM,
    context: list[int],
    seed: int,
    gamma: float,
    cap: int,
    step: int,
) -> tuple[list[int], int, bool]:
    """(tokens, first risk position, ended-by-eos-or-cap)."""
    eos = model.vocab.eos
    tokens = [seed]
    pos = step + 1
    while True:
        if tokens[-1] == eos or len(tokens) >= cap:
            return tokens, pos, True
        probs = _row_probs(model, context + tokens)
        members = _candidates(probs, gamma)
        if len(members) > 1:
            return tokens, pos, False
        tokens.append(members[0])
        pos += 1


def _extend(model: TabularLM, context: list[int], tokens: list[int], target_len: int) -> list[int]:
    eos = model.vocab.eos
    out = list(tokens)
    while len(out) < target_len and out[-1] != eos:
        out.append(_argmax(_row_probs(model, context + out)))
    return out


def oracle_decode(
    model: TabularLM,
    verify_model: TabularLM,
    tpl_forward: str,
    tpl_backward: str,
    input_text: str,
    cfg: DecoderConfig,
) -> TokenSeq:
    """Unoptimized replay of the span-verified decode loop (greedy selection).

    Restricted to tabular models with vocab size <= 8 and max_new_tokens
    <= 8; supports the left/right/token span modes without sampling.
    """
    if cfg.strategy not in DIVER_STRATEGIES:
        raise DecodingError(f"oracle_decode got strategy {cfg.strategy!r}")
    if cfg.sample_spans:
        raise DecodingError("oracle_decode only replays greedy span selection")
    if model.vocab.size > _MAX_VOCAB or cfg.max_new_tokens > _MAX_NEW_TOKENS:
        raise DecodingError("oracle_decode is restricted to tiny fixtures")
    vocab = model.vocab
    eos = vocab.eos
    prompt = _encode(vocab, tpl_forward.replace("[INPUT]", input_text))
    y: list[int] = []
    while len(y) < cfg.max_new_tokens:
        i = len(y)
        context = prompt + y
        probs = _row_probs(model, context)
        members = _candidates(probs, gamma=cfg.gamma)
        if cfg.max_candidates is not None:
            members = members[: cfg.max_candidates]
        if len(members) == 1:
            tok = members[0]
            if tok == eos:
                break
            y.append(tok)
            continue

        if cfg.strategy == DIVER_TOKEN:
            span_by_seed = {m: [m] for m in members}
            k = 0
        else:
            rolled = {
                m: _rollout(model, context, m, cfg.gamma, cfg.max_span_len, i)
                for m in members
            }
            risks = [pos for (_, pos, _) in rolled.values()]
            r = min(risks) if cfg.strategy == DIVER_LEFT else max(risks)
            k = r - i - 1
            span_by_seed = {}
            for m, (tokens, _, _) in rolled.items():
                if cfg.strategy == DIVER_RIGHT and len(tokens) < k + 1:
                    tokens = _extend(model, context, tokens, k + 1)
                span_by_seed[m] = tokens[: k + 1]

        best_m, best_q = None, None
        for m in members:
            span = span_by_seed[m]
            pmi = oracle_pmi(
                verify_model, tpl_backward, input_text, tuple(y), tuple(span)
            )
            q = math.log(probs[m]) + pmi
            if best_q is None or q > best_q or (q == best_q and m < best_m):
                best_m, best_q = m, q
        chosen = span_by_seed[best_m]
        committed = [t for t in chosen if t != eos]
        y.extend(committed[: cfg.max_new_tokens - len(y)])
        if chosen[-1] == eos:
            break
    return tuple(y)


def enumerate_sequences(
    model: TabularLM,
    prompt: TokenSeq,
    max_len: int,
    backward_tpl: str | None = None,
    input_text: str | None = None,
    path_budget: int = 1_000_000,
) -> list[EnumeratedOutcome]:
    """All eos-terminated sequences up to ``max_len`` with exact log-probs.

    Sequence length counts the final eos. When a backward template and
    input are supplied, each outcome also carries the log-likelihood of the
    input conditioned on that full output.
    """
    if model.vocab.size**max_len > path_budget:
        raise ExplosionGuardError(
            f"{model.vocab.size}^{max_len} paths exceed budget {path_budget}"
        )
    eos = model.vocab.eos
    out: list[EnumeratedOutcome] = []

    def walk(seq: list[int], logp: float) -> None:
        if len(seq) >= max_len:
            return
        probs = _row_probs(model, list(prompt) + seq)
        for tok, p in enumerate(probs):
            if p == 0.0:
                continue
            if tok == eos:
                out.append(_finish(seq + [tok], logp + math.log(p)))
            else:
                walk(seq + [tok], logp + math.log(p))

    def _finish(seq: list[int], logp: float) -> EnumeratedOutcome:
        backward = None
        if backward_tpl is not None and input_text is not None:
            text = " ".join(model.vocab.tokens[i] for i in seq)
            p = _seq_prob(
                model,
                _backward_prefix(model, backward_tpl, text),
                _encode(model.vocab, input_text),
            )
            backward = math.log(p) if p > 0.0 else -math.inf
        return EnumeratedOutcome(tuple(seq), logp, backward)

    walk([], 0.0)
    out.sort(key=lambda o: (-o.logp_forward, o.sequence))
    return out
