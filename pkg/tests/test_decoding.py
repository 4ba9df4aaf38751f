import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divergauge.decoding import (
    DecodeConfig,
    LogProbVector,
    ProtocolError,
    StdioProviderPair,
    ValidSet,
    conformative_mix,
    generate_sequence,
    restrict_to_valid,
    sample_token,
    truncate_nucleus,
    truncate_topk,
)


def lpv_from_probs(probs):
    probs = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore"):
        return LogProbVector(values=np.log(probs), normalized=True)


class FixedProvider:
    """Deterministic provider: a fixed table keyed by the last context token."""

    def __init__(self, tables, vocab_size):
        self._tables = tables
        self._vocab = vocab_size

    @property
    def vocab_size(self):
        return self._vocab

    def next_logprobs(self, context):
        key = context[-1] if context else -1
        probs = self._tables.get(key, self._tables[None])
        return lpv_from_probs(probs)


class TestTruncateNucleus:
    def test_hand_cumulative(self):
        vs = truncate_nucleus(lpv_from_probs([0.5, 0.3, 0.15, 0.05]), 0.9)
        assert list(vs.ids) == [0, 1, 2]
        assert vs.mass == pytest.approx(0.95, abs=1e-12)

    def test_full_nucleus_keeps_nonzero_support(self):
        vs = truncate_nucleus(lpv_from_probs([0.4, 0.0, 0.6]), 1.0)
        assert list(vs.ids) == [0, 2]

    def test_one_hot(self):
        vs = truncate_nucleus(lpv_from_probs([0.0, 1.0, 0.0]), 0.5)
        assert list(vs.ids) == [1]

    def test_always_keeps_one(self):
        vs = truncate_nucleus(lpv_from_probs([0.9, 0.1]), 0.01)
        assert list(vs.ids) == [0]

    def test_rejects_bad_p(self):
        for p in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError, match="nucleus p"):
                truncate_nucleus(lpv_from_probs([1.0]), p)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_monotone_nesting(self, seed):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(12))
        p1, p2 = sorted(rng.uniform(0.05, 1.0, size=2))
        s1 = set(truncate_nucleus(lpv_from_probs(probs), p1).ids)
        s2 = set(truncate_nucleus(lpv_from_probs(probs), p2).ids)
        assert s1 <= s2


class TestTruncateTopK:
    def test_argmax(self):
        assert list(truncate_topk(lpv_from_probs([0.5, 0.3, 0.2]), 1).ids) == [0]

    def test_k_covers_vocab(self):
        vs = truncate_topk(lpv_from_probs([0.5, 0.3, 0.2]), 10)
        assert list(vs.ids) == [0, 1, 2]
        assert vs.mass == pytest.approx(1.0)

    def test_tie_breaks_by_lower_id(self):
        assert list(truncate_topk(lpv_from_probs([0.4, 0.4, 0.2]), 1).ids) == [0]


class TestConformativeMix:
    def test_gamma_one_is_instruct_restriction(self):
        rng = np.random.default_rng(0)
        pi = rng.dirichlet(np.ones(6))
        pb = rng.dirichlet(np.ones(6))
        valid = truncate_nucleus(lpv_from_probs(pi), 0.9)
        mixed = conformative_mix(lpv_from_probs(pi), lpv_from_probs(pb), valid, 1.0)
        plain = restrict_to_valid(lpv_from_probs(pi), valid)
        tv = 0.5 * np.abs(np.exp(mixed.values) - np.exp(plain.values)).sum()
        assert tv < 1e-9

    def test_gamma_zero_is_base_restriction(self):
        rng = np.random.default_rng(1)
        pi = rng.dirichlet(np.ones(6))
        pb = rng.dirichlet(np.ones(6))
        valid = truncate_nucleus(lpv_from_probs(pi), 0.9)
        mixed = conformative_mix(lpv_from_probs(pi), lpv_from_probs(pb), valid, 0.0)
        plain = restrict_to_valid(lpv_from_probs(pb), valid)
        tv = 0.5 * np.abs(np.exp(mixed.values) - np.exp(plain.values)).sum()
        assert tv < 1e-9

    def test_hand_geometric_mean(self):
        # gamma 0.5 over valid {0,1}: unnormalized sqrt(0.7*0.2), sqrt(0.2*0.2)
        inst = lpv_from_probs([0.7, 0.2, 0.1])
        base = lpv_from_probs([0.2, 0.2, 0.6])
        valid = ValidSet(ids=np.array([0, 1]), mass=0.9)
        mixed = conformative_mix(inst, base, valid, 0.5)
        w0, w1 = np.sqrt(0.7 * 0.2), np.sqrt(0.2 * 0.2)
        probs = np.exp(mixed.values)
        assert probs[0] == pytest.approx(w0 / (w0 + w1), abs=1e-12)
        assert probs[1] == pytest.approx(w1 / (w0 + w1), abs=1e-12)
        assert probs[2] == 0.0
        assert probs[0] == pytest.approx(0.6518, abs=2e-4)

    def test_mass_outside_valid_is_zero_and_inside_sums_to_one(self):
        rng = np.random.default_rng(2)
        pi = rng.dirichlet(np.ones(20))
        pb = rng.dirichlet(np.ones(20))
        valid = truncate_nucleus(lpv_from_probs(pi), 0.7)
        mixed = conformative_mix(lpv_from_probs(pi), lpv_from_probs(pb), valid, 0.3)
        probs = np.exp(mixed.values)
        outside = np.setdiff1d(np.arange(20), valid.ids)
        assert np.all(probs[outside] == 0.0)
        assert abs(probs[valid.ids].sum() - 1.0) < 1e-9

    def test_logits_vs_logprobs_equivalence(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            logits_i = rng.standard_normal(10) * 3.0
            logits_b = rng.standard_normal(10) * 3.0
            gamma = rng.uniform(0.0, 1.0)
            valid = truncate_nucleus(LogProbVector(values=logits_i), 0.9)
            a = conformative_mix(LogProbVector(values=logits_i), LogProbVector(values=logits_b), valid, gamma)
            logprobs_i = logits_i - np.log(np.exp(logits_i).sum())
            logprobs_b = logits_b - np.log(np.exp(logits_b).sum())
            b = conformative_mix(LogProbVector(values=logprobs_i), LogProbVector(values=logprobs_b), valid, gamma)
            assert np.max(np.abs(np.exp(a.values) - np.exp(b.values))) < 1e-9

    def test_rejects_vocab_mismatch(self):
        with pytest.raises(ValueError, match="vocab mismatch"):
            conformative_mix(
                lpv_from_probs([0.5, 0.5]),
                lpv_from_probs([0.2, 0.3, 0.5]),
                ValidSet(ids=np.array([0]), mass=0.5),
                0.5,
            )

    def test_rejects_bad_gamma(self):
        with pytest.raises(ValueError, match="gamma"):
            conformative_mix(
                lpv_from_probs([0.5, 0.5]), lpv_from_probs([0.5, 0.5]), ValidSet(ids=np.array([0]), mass=0.5), 1.5
            )


class TestSampleToken:
    def test_one_hot(self):
        rng = np.random.default_rng(0)
        assert sample_token(lpv_from_probs([0.0, 0.0, 1.0]), rng) == 2

    def test_deterministic_per_state(self):
        dist = lpv_from_probs([0.3, 0.3, 0.4])
        a = sample_token(dist, np.random.default_rng(99))
        b = sample_token(dist, np.random.default_rng(99))
        assert a == b

    def test_law_of_large_numbers(self):
        rng = np.random.default_rng(123)
        dist = lpv_from_probs([0.25, 0.75])
        draws = np.array([sample_token(dist, rng) for _ in range(100_000)])
        assert np.mean(draws == 1) == pytest.approx(0.75, abs=0.01)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="normalized"):
            sample_token(LogProbVector(values=np.array([0.0, 1.0])), np.random.default_rng(0))


class TestGenerateSequence:
    def make_pair(self):
        rng = np.random.default_rng(4)
        tables = {None: rng.dirichlet(np.ones(8))}
        for t in range(8):
            tables[t] = rng.dirichlet(np.ones(8))
        instruct = FixedProvider(tables, 8)
        tables_b = {k: rng.dirichlet(np.ones(8)) for k in tables}
        base = FixedProvider(tables_b, 8)
        return instruct, base

    def test_gamma_one_matches_no_base(self):
        instruct, base = self.make_pair()
        cfg = DecodeConfig(gamma=1.0, max_tokens=40, seed=5)
        with_base = generate_sequence(instruct, base, cfg, [0], np.random.default_rng(5))
        without = generate_sequence(instruct, None, cfg, [0], np.random.default_rng(5))
        assert with_base.tokens == without.tokens

    def test_max_tokens_zero(self):
        instruct, _ = self.make_pair()
        res = generate_sequence(instruct, None, DecodeConfig(max_tokens=0), [0])
        assert res.tokens == [] and res.stop_reason == "max_tokens"

    def test_stop_token_halts(self):
        instruct = FixedProvider({None: np.array([0.0, 1.0]), 1: np.array([0.0, 1.0])}, 2)
        res = generate_sequence(instruct, None, DecodeConfig(max_tokens=10, stop_tokens=frozenset({1})), [])
        assert res.tokens == [1] and res.stop_reason == "stop_token"

    def test_reproducible(self):
        instruct, base = self.make_pair()
        cfg = DecodeConfig(gamma=0.5, max_tokens=30, seed=11)
        a = generate_sequence(instruct, base, cfg, [2])
        b = generate_sequence(instruct, base, cfg, [2])
        assert a.tokens == b.tokens
        assert [s.logprob for s in a.steps] == [s.logprob for s in b.steps]

    def test_vocab_drift_aborts_with_step(self):
        class Drifting:
            vocab_size = 4

            def __init__(self):
                self.calls = 0

            def next_logprobs(self, context):
                self.calls += 1
                n = 4 if self.calls < 3 else 5
                return lpv_from_probs(np.ones(n) / n)

        with pytest.raises(ProtocolError, match="step 2"):
            generate_sequence(Drifting(), None, DecodeConfig(max_tokens=10), [])

    def test_step_log_masses(self):
        instruct, base = self.make_pair()
        res = generate_sequence(instruct, base, DecodeConfig(gamma=0.5, max_tokens=5, seed=1), [0])
        for step in res.steps:
            assert 0.0 < step.valid_mass <= 1.0
            assert step.valid_size >= 1
            assert step.logprob <= 0.0

    def test_pre_truncation_mix_ablation(self):
        # the instruct model concentrates on token 0, the base model on token 3;
        # mixing before truncation lets base-only tokens into the nucleus
        instruct = FixedProvider({None: np.array([0.89, 0.09, 0.01, 0.01]),
                                  **{t: np.array([0.89, 0.09, 0.01, 0.01]) for t in range(4)}}, 4)
        base = FixedProvider({None: np.array([0.01, 0.01, 0.09, 0.89]),
                              **{t: np.array([0.01, 0.01, 0.09, 0.89]) for t in range(4)}}, 4)
        post = DecodeConfig(p=0.9, gamma=0.5, max_tokens=1, seed=0)
        pre = DecodeConfig(p=0.9, gamma=0.5, max_tokens=1, seed=0, pre_truncation_mix=True)
        res_post = generate_sequence(instruct, base, post, [0])
        res_pre = generate_sequence(instruct, base, pre, [0])
        # post-truncation: nucleus from instruct alone keeps {0, 1}
        assert res_post.steps[0].valid_size == 2
        # pre-truncation: the mixed distribution needs more tokens for 0.9 mass
        assert res_pre.steps[0].valid_size > res_post.steps[0].valid_size

    def test_temperature_applies_before_truncation(self):
        probs = np.array([0.7, 0.2, 0.1])
        cold = truncate_nucleus(lpv_from_probs(probs), 0.9)
        hot_logits = np.log(probs) / 5.0  # temperature 5 flattens the distribution
        hot = truncate_nucleus(LogProbVector(values=hot_logits), 0.9)
        assert len(cold) == 2
        assert len(hot) == 3
        instruct = FixedProvider({None: probs, **{t: probs for t in range(3)}}, 3)
        res = generate_sequence(instruct, None, DecodeConfig(p=0.9, temperature=5.0, max_tokens=1), [])
        assert res.steps[0].valid_size == 3


FAKE_ADAPTER = textwrap.dedent(
    """
    import json, sys
    vocab = 4
    print(json.dumps({"type": "hello", "vocab_size": vocab, "stop_tokens": [0]}), flush=True)
    for line in sys.stdin:
        req = json.loads(line)
        if req["type"] == "bye":
            break
        if req.get("model") == "broken":
            print(json.dumps({"type": "error", "message": "boom"}), flush=True)
            continue
        shift = 1.0 if req["model"] == "instruct" else -1.0
        vals = [shift * (t + 1) + len(req["context"]) for t in range(vocab)]
        print(json.dumps({"type": "logits", "values": vals}), flush=True)
    """
)


class TestStdioProtocol:
    def adapter_cmd(self, script=FAKE_ADAPTER):
        return [sys.executable, "-c", script]

    def test_handshake_and_ordered_requests(self):
        with StdioProviderPair(self.adapter_cmd()) as pair:
            assert pair.vocab_size == 4
            assert pair.stop_tokens == frozenset({0})
            for n in range(20):
                lp = pair.request_logits("instruct", list(range(n)))
                assert lp.values[3] == pytest.approx(4.0 + n)

    def test_generation_over_protocol(self):
        with StdioProviderPair(self.adapter_cmd()) as pair:
            cfg = DecodeConfig(max_tokens=6, gamma=0.5, seed=3, stop_tokens=pair.stop_tokens)
            res = generate_sequence(pair.instruct, pair.base, cfg, [1, 2])
            assert len(res.tokens) >= 1

    def test_error_frame_raises(self):
        with StdioProviderPair(self.adapter_cmd()) as pair:
            with pytest.raises(ProtocolError, match="boom"):
                pair.request_logits("broken", [])

    def test_malformed_line_aborts(self):
        script = 'import sys; print("{\\"type\\": \\"hello\\", \\"vocab_size\\": 2, \\"stop_tokens\\": []}", flush=True); print("not json", flush=True); sys.stdin.readline()'
        with StdioProviderPair(self.adapter_cmd(script)) as pair:
            with pytest.raises(ProtocolError, match="malformed"):
                pair.request_logits("instruct", [])

    def test_refusal_at_handshake(self):
        script = 'import json; print(json.dumps({"type": "bye", "reason": "vocab mismatch"}), flush=True)'
        with pytest.raises(ProtocolError, match="vocab mismatch"):
            StdioProviderPair(self.adapter_cmd(script))
