import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wbansim.outage import (InterferenceVector, LemmaCheck, PolicyOutcome,
                            doubling_probability, make_sampler,
                            mean_interference_probabilistic, outage_empirical,
                            policy_sample, verify_lemma1)


def vec(*deltas):
    return InterferenceVector(tuple(deltas))


class TestOutageEmpirical:
    def test_all_zero(self):
        assert outage_empirical([vec(0.0, 0.0)] * 10, 1.0) == 0.0

    def test_all_double_threshold(self):
        assert outage_empirical([vec(1.0, 1.0)] * 10, 1.0) == 1.0

    def test_uniform_matches_independent_oracle(self):
        # Tagged-sum outage for i.i.d. U(0, thr/(N-1)) contributions, checked
        # against a separately seeded brute-force estimate.
        n, thr, trials = 12, 2.0, 100_000
        hi = thr / (n - 1)
        rng = random.Random(424242)
        samples = [vec(*(rng.uniform(0, hi) for _ in range(n - 1)))
                   for _ in range(trials)]
        est = outage_empirical(samples, thr)

        oracle_rng = np.random.default_rng(171717)
        draws = oracle_rng.uniform(0, hi, size=(trials, n - 1)).sum(axis=1)
        oracle = float(np.mean(draws > thr))
        sigma = math.sqrt(max(oracle * (1 - oracle), est * (1 - est)) / trials)
        assert abs(est - oracle) <= 3 * sigma + 1e-12

    def test_conventional_direction_flag(self):
        samples = [vec(0.4), vec(0.6)]
        assert outage_empirical(samples, 0.5) == 0.5
        assert outage_empirical(samples, 0.5, conventional=True) == 0.5
        assert outage_empirical([vec(0.1)], 0.5, conventional=True) == 1.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            outage_empirical([], 1.0)

    @given(st.lists(st.lists(st.floats(0, 5), min_size=1, max_size=6),
                    min_size=1, max_size=30),
           st.floats(min_value=0.1, max_value=10),
           st.floats(min_value=0.01, max_value=5))
    def test_monotone_nonincreasing_in_threshold(self, rows, thr, bump):
        samples = [vec(*row) for row in rows]
        assert outage_empirical(samples, thr + bump) <= outage_empirical(samples, thr)


class TestMeanInterference:
    def test_at_threshold_annihilates(self):
        assert mean_interference_probabilistic(vec(1.0, 1.0), 1.0) == 0.0

    def test_halfway_terms(self):
        # 2 * 5 * (1 - 0.5) = 5
        assert mean_interference_probabilistic(vec(5.0, 5.0), 10.0) == pytest.approx(5.0)

    def test_zero_vector(self):
        assert mean_interference_probabilistic(vec(0.0, 0.0, 0.0), 10.0) == 0.0

    def test_above_threshold_clamps_to_zero_contribution(self):
        assert mean_interference_probabilistic(vec(15.0), 10.0) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            InterferenceVector((-1.0,))

    @given(st.lists(st.floats(0, 20), min_size=1, max_size=11),
           st.floats(min_value=0.5, max_value=10))
    def test_bounded_by_raw_sum(self, deltas, thr):
        v = vec(*deltas)
        m = mean_interference_probabilistic(v, thr)
        assert -1e-12 <= m <= v.total + 1e-12
        if all(d == 0 for d in deltas):
            assert m == 0.0

    def test_exact_against_brute_force(self):
        # Independent implementation: explicit loop with fsum and its own
        # clamp arithmetic.
        rng = random.Random(9090)
        for _ in range(1000):
            thr = rng.uniform(0.5, 10.0)
            v = vec(*(rng.uniform(0, 1.5 * thr) for _ in range(rng.randint(1, 11))))
            terms = []
            for d in v.deltas:
                ratio = d / thr
                if ratio > 1.0:
                    ratio = 1.0
                terms.append(d * (1.0 - ratio))
            expected = math.fsum(terms)
            got = mean_interference_probabilistic(v, thr)
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-15)


class TestPolicySample:
    def test_zero_delta_never_reacts(self):
        rng = random.Random(1)
        for _ in range(100):
            out = policy_sample(vec(0.0), 1.0, rng)
            assert out.actions == ("no_change",)
            assert out.effective == (0.0,)

    def test_at_threshold_always_switches(self):
        rng = random.Random(1)
        for _ in range(100):
            out = policy_sample(vec(1.0), 1.0, rng)
            assert out.actions == ("switched",)
            assert out.effective == (0.0,)

    def test_marginal_frequencies(self):
        # delta = thr/2: doubling freq 0.5; switch-given-doubling 0.25, so the
        # joint switch frequency converges to 0.125 = (1/2)^3.
        rng = random.Random(777)
        n = 100_000
        doubled = switched = 0
        for _ in range(n):
            out = policy_sample(vec(0.5), 1.0, rng)
            if out.actions[0] != "no_change":
                doubled += 1
                if out.actions[0] == "switched":
                    switched += 1
        assert doubled / n == pytest.approx(0.5, abs=0.01)
        assert switched / doubled == pytest.approx(0.25, abs=0.01)
        assert switched / n == pytest.approx(0.125, abs=0.008)

    def test_reacting_contributions_removed(self):
        rng = random.Random(5)
        v = vec(0.2, 0.9, 0.0)
        out = policy_sample(v, 1.0, rng)
        for d, action, eff in zip(v.deltas, out.actions, out.effective):
            assert eff == (d if action == "no_change" else 0.0)

    def test_unknown_action_rejected(self):
        with pytest.raises(ValueError):
            PolicyOutcome(("sideways",), (0.0,))


class TestDoublingProbability:
    def test_ratio_branch(self):
        assert doubling_probability(0.5, 1.0) == pytest.approx(0.5)

    def test_indicator_branch(self):
        assert doubling_probability(2.0, 1.0) == 1.0

    def test_uniform_expectation(self):
        # E[delta/thr] over U(0, thr) is 1/2 by the closed-form integral.
        rng = np.random.default_rng(31)
        draws = rng.uniform(0.0, 1.0, size=200_000)
        assert doubling_probability(draws, 1.0) == pytest.approx(0.5, abs=0.005)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            doubling_probability(-0.1, 1.0)


class TestVerifyLemma:
    def test_uniform_families_separate(self):
        for n in (4, 8, 12):
            rng = np.random.default_rng(n)
            check = verify_lemma1("uniform:2", n, 1.0, 20_000, rng)
            assert check.holds
            assert check.strict
            assert check.p_pr < check.p_out

    def test_truncated_exponential_and_twopoint(self):
        for spec in ("texp:1.2:1", "twopoint:0.5:1.8:0.6"):
            rng = np.random.default_rng(hash(spec) % 2**32)
            check = verify_lemma1(spec, 8, 1.0, 20_000, rng)
            assert check.holds
            if check.p_out > 0.01:
                assert check.p_pr <= check.p_out

    def test_support_bound_keeps_both_zero(self):
        # A single interferer bounded by the threshold can never exceed it.
        rng = np.random.default_rng(2)
        check = verify_lemma1("uniform:1", 2, 1.0, 10_000, rng)
        assert check.p_out == 0.0
        assert check.p_pr == 0.0
        assert check.degenerate
        assert check.holds and not check.strict

    def test_minimum_trial_count(self):
        with pytest.raises(ValueError):
            verify_lemma1("uniform:2", 12, 1.0, 100, np.random.default_rng(1))

    def test_deterministic_sum_boundary(self):
        # All contributions exactly thr/(N-1): the sum equals the threshold,
        # which is not an exceedance under the strict inequality.
        n, thr = 12, 1.0
        deltas = [thr / (n - 1)] * (n - 1)
        samples = [vec(*deltas)] * 1000
        assert outage_empirical(samples, thr) == 0.0
        weighted = math.fsum(
            d * (1 - (d / thr + (d / thr) ** 2)) for d in deltas)
        assert weighted <= thr


class TestSamplers:
    def test_unknown_spec(self):
        with pytest.raises(ValueError):
            make_sampler("zipf", 1.0, 12)

    def test_shapes(self):
        rng = np.random.default_rng(3)
        s = make_sampler("uniform:2", 1.0, 12)
        assert s(rng, 100).shape == (100, 11)

    def test_needs_two_nodes(self):
        with pytest.raises(ValueError):
            make_sampler("uniform", 1.0, 1)
