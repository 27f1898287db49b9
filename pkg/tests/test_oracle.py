from __future__ import annotations

import math
import random
from dataclasses import replace

import pytest

from conftest import PLAIN_TPL, make_model, make_vocab, random_fixture
from spandec.core import DecoderConfig, DecodingError
from spandec.engine import decode
from spandec.lm import ZeroProbTokenError
from spandec.oracle import (
    ExplosionGuardError,
    enumerate_sequences,
    oracle_decode,
    oracle_pmi,
)
from spandec.spans import CandidateSpan
from spandec.verifier import pmi_score


class TestOraclePmi:
    def test_hand_computed_two_row_fixture(self):
        v = make_vocab("x", "a", "b")
        vm = make_model(
            v,
            order=2,
            rows={
                ("<bos>",): {"x": 0.5, "<eos>": 0.5},
                ("a",): {"x": 0.9, "<eos>": 0.1},
            },
        )
        got = oracle_pmi(vm, PLAIN_TPL.backward, "x", (), (v.id_of("a"),))
        assert got == pytest.approx(0.5877866649021191, abs=1e-12)
        assert got == pytest.approx(math.log(0.9 / 0.5), abs=1e-12)

    def test_independence_is_exactly_zero(self):
        v = make_vocab("x", "a", "b")
        vm = make_model(v, order=1, rows={(): {"x": 0.3, "a": 0.3, "b": 0.3, "<eos>": 0.1}})
        assert oracle_pmi(vm, PLAIN_TPL.backward, "x x", (), v.encode("a b")) == 0.0

    def test_agrees_with_engine_scoring(self):
        rng = random.Random(301)
        for _ in range(100):
            model, vm, tpl, input_text, cfg = random_fixture(rng)
            vocab = vm.vocab
            prefix = tuple(
                rng.randrange(vocab.size) for _ in range(rng.randint(0, 2))
            )
            tokens = tuple(rng.randrange(vocab.size) for _ in range(rng.randint(1, 3)))
            span = CandidateSpan(tokens, math.log(0.5), terminal=False)
            engine_value = pmi_score(vm, tpl, input_text, prefix, span).value
            oracle_value = oracle_pmi(vm, tpl.backward, input_text, prefix, tokens)
            assert engine_value == pytest.approx(oracle_value, abs=1e-9)

    def test_zero_probabilities_surface(self):
        v = make_vocab("x", "a", "b")
        vm = make_model(
            v,
            order=2,
            rows={
                ("<bos>",): {"x": 0.5, "<eos>": 0.5},
                ("a",): {"<eos>": 1.0},
                ("b",): {"x": 1.0},
            },
        )
        assert oracle_pmi(vm, PLAIN_TPL.backward, "x", (), (v.id_of("a"),)) == -math.inf
        zero_base = make_model(
            v,
            order=2,
            rows={
                ("<bos>",): {"<eos>": 1.0},
                ("a",): {"x": 0.5, "<eos>": 0.5},
            },
        )
        assert oracle_pmi(zero_base, PLAIN_TPL.backward, "x", (), (v.id_of("a"),)) == math.inf
        both_zero = make_model(
            v,
            order=2,
            rows={("<bos>",): {"<eos>": 1.0}, ("a",): {"<eos>": 1.0}},
        )
        with pytest.raises(ZeroProbTokenError):
            oracle_pmi(both_zero, PLAIN_TPL.backward, "x", (), (v.id_of("a"),))


def staggered_world():
    """Divergence at step 0 with risks at positions 2 and 4, and a verifier
    whose preferences flip between the short (Left) and long (Right) spans."""
    v = make_vocab("x", "a", "b", "c", "d", "e")
    model = make_model(
        v,
        order=2,
        rows={
            ("x",): {"a": 0.5, "b": 0.5},
            ("a",): {"c": 1.0},
            ("c",): {"d": 0.5, "<eos>": 0.5},
            ("b",): {"d": 1.0},
            ("d",): {"e": 1.0},
            ("e",): {"a": 0.5, "b": 0.5},
        },
    )
    verify = make_model(
        v,
        order=3,
        rows={
            ("<bos>", "<bos>"): {"x": 0.5, "<eos>": 0.5},
            ("a", "c"): {"x": 0.9, "<eos>": 0.1},
            ("b", "d"): {"x": 0.1, "<eos>": 0.9},
            ("c", "d"): {"x": 0.1, "<eos>": 0.9},
            ("d", "e"): {"x": 0.9, "<eos>": 0.1},
        },
    )
    return v, model, verify


class TestOracleDecode:
    def test_matches_greedy_when_divergence_free(self):
        v = make_vocab("a", "b", "c")
        m = make_model(
            v,
            order=2,
            rows={
                ("a",): {"b": 0.9, "c": 0.05, "<eos>": 0.05},
                ("b",): {"c": 0.9, "a": 0.05, "<eos>": 0.05},
                ("c",): {"<eos>": 0.9, "a": 0.05, "b": 0.05},
            },
        )
        cfg = DecoderConfig(strategy="diver-right", gamma=0.3, max_new_tokens=8)
        got = oracle_decode(m, m, PLAIN_TPL.forward, PLAIN_TPL.backward, "a", cfg)
        assert got == v.encode("b c")

    def test_left_and_right_modes_differ_on_staggered_risks(self):
        v, model, verify = staggered_world()
        base = DecoderConfig(strategy="diver-left", gamma=0.5, max_new_tokens=6)
        left = oracle_decode(model, verify, PLAIN_TPL.forward, PLAIN_TPL.backward, "x", base)
        right = oracle_decode(
            model, verify, PLAIN_TPL.forward, PLAIN_TPL.backward, "x",
            replace(base, strategy="diver-right"),
        )
        assert left != right
        assert left[0] == v.id_of("a")   # short spans favor a
        assert right[0] == v.id_of("b")  # long spans favor b

    def test_engine_matches_oracle_on_staggered_world(self):
        v, model, verify = staggered_world()
        for strategy in ("diver-left", "diver-right", "diver-token"):
            cfg = DecoderConfig(strategy=strategy, gamma=0.5, max_new_tokens=6)
            want = oracle_decode(
                model, verify, PLAIN_TPL.forward, PLAIN_TPL.backward, "x", cfg
            )
            got = decode(model, verify, PLAIN_TPL, "x", cfg)
            assert got.output == want

    def test_engine_matches_oracle_on_random_fixtures(self):
        rng = random.Random(302)
        for _ in range(100):
            model, vm, tpl, input_text, cfg = random_fixture(rng)
            for strategy in ("diver-left", "diver-right", "diver-token"):
                mode_cfg = replace(cfg, strategy=strategy)
                want = oracle_decode(model, vm, tpl.forward, tpl.backward, input_text, mode_cfg)
                got = decode(model, vm, tpl, input_text, mode_cfg)
                assert got.output == want, (strategy, input_text)

    def test_guards_against_big_worlds(self):
        v = make_vocab("a")
        m = make_model(v, order=1, rows={(): {"a": 0.5, "<eos>": 0.5}})
        with pytest.raises(DecodingError):
            oracle_decode(
                m, m, "[INPUT]", "[INCOMPLETE_OUTPUT] [INPUT]", "a",
                DecoderConfig(strategy="diver-left", max_new_tokens=100),
            )


class TestEnumerateSequences:
    def test_tiny_enumeration(self):
        v = make_vocab("a", bos=False)
        m = make_model(v, order=1, rows={(): {"a": 0.4, "<eos>": 0.6}})
        outcomes = enumerate_sequences(m, (), max_len=2)
        sequences = {o.sequence for o in outcomes}
        assert sequences == {(v.eos,), (v.id_of("a"), v.eos)}
        by_seq = {o.sequence: o for o in outcomes}
        assert by_seq[(v.eos,)].logp_forward == pytest.approx(math.log(0.6))
        assert by_seq[(0, v.eos)].logp_forward == pytest.approx(math.log(0.4 * 0.6))

    def test_total_probability_with_truncated_mass(self):
        rng = random.Random(303)
        v = make_vocab("a", "b", bos=False)
        rows = {
            (s,): {t: rng.uniform(0.1, 1.0) for t in ("a", "b", "<eos>")}
            for s in ("a", "b", "<eos>")
        }
        rows[("a",)]["<eos>"] = 0.4  # arbitrary; keep all rows positive
        m = make_model(v, order=2, rows={**rows, ("a",): rows[("a",)]})
        max_len = 5
        outcomes = enumerate_sequences(m, (v.id_of("a"),), max_len=max_len)
        terminated = math.fsum(math.exp(o.logp_forward) for o in outcomes)

        def truncated(prefix: list[int], prob: float, length: int) -> float:
            # paths of max length that never hit eos
            if length == max_len:
                return prob
            total = 0.0
            dist = m.next_dist(tuple(prefix))
            for tok in dist.support:
                if tok == v.eos:
                    continue
                total += truncated(prefix + [tok], prob * dist.prob(tok), length + 1)
            return total

        left_over = truncated([v.id_of("a")], 1.0, 0)
        assert terminated + left_over == pytest.approx(1.0, abs=1e-9)

    def test_explosion_guard(self):
        v = make_vocab("a", "b", "c")
        m = make_model(v, order=1, rows={(): {"a": 1.0, "<eos>": 1.0}})
        with pytest.raises(ExplosionGuardError):
            enumerate_sequences(m, (), max_len=10, path_budget=100)

    def test_backward_likelihood_attached(self):
        v = make_vocab("x", "a")
        m = make_model(
            v,
            order=2,
            rows={
                ("x",): {"a": 0.5, "<eos>": 0.5},
                ("a",): {"<eos>": 1.0},
                ("<eos>",): {"x": 0.25, "a": 0.25, "<eos>": 0.5},
                ("<bos>",): {"x": 0.5, "a": 0.5},
            },
        )
        outcomes = enumerate_sequences(
            m, (v.id_of("x"),), max_len=3, backward_tpl=PLAIN_TPL.backward, input_text="x"
        )
        assert all(o.logp_input_given_output is not None for o in outcomes)
