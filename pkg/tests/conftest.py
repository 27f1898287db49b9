"""Shared fixture builders for the test suite.

Models are built from string-keyed row dicts so fixtures read like the
tables they are. ``random_fixture`` generates the randomized tabular
worlds used by the oracle-equivalence and acceptance tests: strictly
positive weights (so no zero-probability handling triggers), vocab size
at most 8, n-gram order at most 3.
"""

from __future__ import annotations

import itertools
import random
import sys

from spandec.core import DecoderConfig, Vocab
from spandec.lm import TabularLM
from spandec.verifier import PromptTemplatePair

PLAIN_TPL = PromptTemplatePair(
    name="plain",
    forward="[INPUT]",
    backward="[INCOMPLETE_OUTPUT] [INPUT]",
)


def make_vocab(*symbols: str, bos: bool = True) -> Vocab:
    tokens = list(symbols) + ["<eos>"] + (["<bos>"] if bos else [])
    return Vocab(
        tuple(tokens),
        eos=tokens.index("<eos>"),
        bos=tokens.index("<bos>") if bos else None,
    )


def make_model(
    vocab: Vocab,
    order: int,
    rows: dict[tuple[str, ...], dict[str, float]],
    fallback: str = "uniform",
    model_id: str = "tabular",
) -> TabularLM:
    weights = {
        tuple(vocab.id_of(s) for s in ctx): {vocab.id_of(s): w for s, w in row.items()}
        for ctx, row in rows.items()
    }
    return TabularLM(vocab, order, weights, fallback=fallback, model_id=model_id)


def scaffold_template() -> PromptTemplatePair:
    return PromptTemplatePair(
        name="scaffold",
        forward="I: [INPUT] O:",
        backward="O: [INCOMPLETE_OUTPUT] I: [INPUT]",
    )


def random_model(rng: random.Random, vocab: Vocab, order: int, full: bool = False) -> TabularLM:
    """Random tabular model with positive weights on every token everywhere.

    Unless ``full`` is set, some fixtures drop part of their rows to
    exercise the uniform fallback. Fallback rows carry exact ties, so tests
    about tie-free behavior must pass ``full=True``.
    """
    ids = range(vocab.size)
    keys = list(itertools.product(ids, repeat=order - 1))
    if not full and rng.random() < 0.3 and len(keys) > 3:
        keys = rng.sample(keys, k=max(3, int(len(keys) * 0.7)))
    weights = {
        key: {i: rng.uniform(0.05, 1.0) for i in ids} for key in keys
    }
    return TabularLM(vocab, order, weights, fallback="uniform")


def random_fixture(rng: random.Random) -> tuple[TabularLM, TabularLM, PromptTemplatePair, str, DecoderConfig]:
    """One randomized world: forward model, verifier, template, input, config."""
    scaffold = rng.random() < 0.5
    n_sym = rng.randint(2, 4 if scaffold else 5)
    symbols = [f"s{j}" for j in range(n_sym)]
    tokens = symbols + (["O:", "I:"] if scaffold else [])
    vocab = make_vocab(*tokens)
    tpl = scaffold_template() if scaffold else PLAIN_TPL
    order = rng.randint(1, 3)
    model = random_model(rng, vocab, order)
    if rng.random() < 0.4:
        verify_model = random_model(rng, vocab, rng.randint(1, 3))
    else:
        verify_model = model
    input_text = " ".join(rng.choice(symbols) for _ in range(rng.randint(1, 3)))
    cfg = DecoderConfig(
        strategy="diver-right",
        gamma=rng.choice([0.1, 0.3, 0.5, 0.9]),
        max_new_tokens=rng.randint(4, 8),
        max_span_len=rng.randint(2, 8),
        rng_seed=rng.randint(0, 2**31),
    )
    return model, verify_model, tpl, input_text, cfg


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion once capture is released."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in mod.RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
    for line in getattr(mod, "INFO_LINES", []):
        terminalreporter.write_line(f"info  {line}")
