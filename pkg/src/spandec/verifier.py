"""Span-level PMI verification through backward teacher-forced scoring.

The PMI score of a candidate span is the log-likelihood gain of the input
when the span is appended to the output so far:

    sum_t [ log p(x_t | output+span, x_<t) - log p(x_t | output, x_<t) ]

computed under a backward instruction template that places the incomplete
output before the input, so the input tokens can be teacher-forced. The
baseline term (without the span) is span-independent and computed once per
divergence point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .core import DecodingError, NEG_INF, TokenSeq, Vocab
from .lm import LanguageModel
from .spans import CandidateSpan

INPUT_MARK = "[INPUT]"
OUTPUT_MARK = "[INCOMPLETE_OUTPUT]"

# Per-token deltas are clamped to this many nats; a baseline-side zero
# probability would otherwise produce an unusable +inf.
DELTA_CLAMP = 50.0


class MissingPlaceholderError(DecodingError):
    """A template is missing a required placeholder or repeats one."""


class TokenizationMismatchError(DecodingError):
    """Rendered prompt tokens do not concatenate from their parts."""


@dataclass(frozen=True)
class PromptTemplatePair:
    """Forward and backward instruction templates for one task.

    The forward template contains ``[INPUT]`` exactly once. The backward
    template contains ``[INCOMPLETE_OUTPUT]`` followed by ``[INPUT]``, each
    exactly once, so the output conditions and the input is scored. Text
    after ``[INPUT]`` is permitted but never scored or conditioned on.
    """

    name: str
    forward: str
    backward: str

    def __post_init__(self) -> None:
        if self.forward.count(INPUT_MARK) != 1:
            raise MissingPlaceholderError(
                f"forward template of {self.name!r} needs {INPUT_MARK} exactly once"
            )
        if self.backward.count(INPUT_MARK) != 1 or self.backward.count(OUTPUT_MARK) != 1:
            raise MissingPlaceholderError(
                f"backward template of {self.name!r} needs {INPUT_MARK} and "
                f"{OUTPUT_MARK} exactly once each"
            )
        if self.backward.index(OUTPUT_MARK) > self.backward.index(INPUT_MARK):
            raise MissingPlaceholderError(
                f"backward template of {self.name!r} must place {OUTPUT_MARK} "
                f"before {INPUT_MARK}"
            )

    def render_forward(self, input_text: str) -> str:
        return self.forward.replace(INPUT_MARK, input_text)

    def render_backward(self, input_text: str, incomplete_output: str) -> str:
        return self.backward.replace(OUTPUT_MARK, incomplete_output).replace(
            INPUT_MARK, input_text
        )


@dataclass(frozen=True)
class PmiScore:
    """A span's verification score and its per-input-token decomposition.

    ``value`` equals the sum of ``per_token_deltas``. ``clamped`` flags
    spans where a baseline-side zero probability forced the clamp.
    """

    value: float
    per_token_deltas: tuple[float, ...]
    span: CandidateSpan
    clamped: bool = False


def render_backward_prompt(
    tpl: PromptTemplatePair,
    vocab: Vocab,
    input_text: str,
    incomplete_output: str,
) -> tuple[TokenSeq, TokenSeq]:
    """Split the rendered backward prompt into conditioning prefix and target.

    The prefix is everything before the ``[INPUT]`` position with the
    incomplete output substituted; the target is the tokenized input. Only
    the target is scored, the prefix (instruction scaffolding plus output
    so far) conditions. Tokens are whitespace-atomic, so the concatenation
    of prefix and target reproduces the fully rendered prompt; a mismatch
    raises ``TokenizationMismatchError``.
    """
    before_input = tpl.backward.split(INPUT_MARK, 1)[0]
    prefix_text = before_input.replace(OUTPUT_MARK, incomplete_output)
    prefix = vocab.encode(prefix_text)
    target = vocab.encode(input_text)
    after_input = tpl.backward.split(INPUT_MARK, 1)[1]
    if after_input.strip() == "":
        full = vocab.encode(tpl.render_backward(input_text, incomplete_output))
        if full != prefix + target:
            raise TokenizationMismatchError(
                f"backward prompt for {tpl.name!r} does not re-tokenize as prefix + input"
            )
    return prefix, target


def pmi_score(
    verify_model: LanguageModel,
    tpl: PromptTemplatePair,
    input_text: str,
    y_prefix: TokenSeq,
    span: CandidateSpan,
) -> PmiScore:
    """PMI score of one span; see ``pmi_score_batch`` for the amortized form."""
    return pmi_score_batch(verify_model, tpl, input_text, y_prefix, [span])[0]


def pmi_score_batch(
    verify_model: LanguageModel,
    tpl: PromptTemplatePair,
    input_text: str,
    y_prefix: TokenSeq,
    spans: list[CandidateSpan],
) -> list[PmiScore]:
    """Score spans sharing one divergence point; the baseline is computed once.

    Per input token the delta is log p(x_t | with span) - log p(x_t |
    baseline), clamped to +-50 nats. A span-side zero probability makes the
    whole span score -inf (the span can never be selected); a baseline-side
    zero with a finite span-side term clamps to +50 and flags the score.
    """
    vocab = verify_model.vocab
    base_prefix, target = render_backward_prompt(
        tpl, vocab, input_text, vocab.decode(y_prefix)
    )
    base_scores = verify_model.score_sequence(base_prefix, target)
    out: list[PmiScore] = []
    for span in spans:
        span_prefix, _ = render_backward_prompt(
            tpl, vocab, input_text, vocab.decode(y_prefix + span.tokens)
        )
        span_scores = verify_model.score_sequence(span_prefix, target)
        deltas: list[float] = []
        clamped = False
        for with_span, base in zip(span_scores, base_scores):
            if with_span == NEG_INF:
                deltas.append(NEG_INF)
            elif base == NEG_INF:
                deltas.append(DELTA_CLAMP)
                clamped = True
            else:
                d = with_span - base
                if d > DELTA_CLAMP:
                    d, clamped = DELTA_CLAMP, True
                elif d < -DELTA_CLAMP:
                    d, clamped = -DELTA_CLAMP, True
                deltas.append(d)
        out.append(
            PmiScore(
                value=sum(deltas),
                per_token_deltas=tuple(deltas),
                span=span,
                clamped=clamped,
            )
        )
    return out


def load_templates(path: str | Path) -> dict[str, PromptTemplatePair]:
    """Load templates from JSON: one object or a list of {name, forward, backward}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    items = doc if isinstance(doc, list) else doc.get("templates", [doc])
    pairs = [PromptTemplatePair(d["name"], d["forward"], d["backward"]) for d in items]
    return {p.name: p for p in pairs}
