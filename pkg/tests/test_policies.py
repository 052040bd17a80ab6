import math

import numpy as np
import pytest

from neucache.policies import (
    EMPTY_STORE_SIMILARITY,
    CriterionScore,
    PolicyConfig,
    adaptive_threshold,
    coreset_max_similarity,
    decide,
    entropy,
    margin,
    new_policy_state,
    qbc_disagreement,
    snapshot_committee,
)
from neucache.student import StudentModel, zero_model


def brute_margin(logprobs):
    ordered = sorted(logprobs, reverse=True)
    return ordered[0] - ordered[1]


def brute_entropy(logprobs):
    exps = [math.exp(v - max(logprobs)) for v in logprobs]
    total = sum(exps)
    probs = [e / total for e in exps]
    return -sum(p * math.log(p) for p in probs if p > 0)


def random_logprob_vectors(count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        k = int(rng.integers(2, 8))
        probs = rng.dirichlet(np.ones(k))
        lp = np.log(probs)
        # sprinkle provider-style fillers on some non-top classes
        if k > 2 and rng.random() < 0.3:
            victim = int(rng.integers(0, k))
            if victim != int(np.argmax(lp)):
                lp[victim] = -100.0
        out.append(lp)
    return out


class TestMargin:
    def test_direct_subtraction(self):
        assert margin(np.array([-0.1, -2.3])) == pytest.approx(2.2, abs=1e-12)

    def test_uniform_is_zero(self):
        for k in (2, 3, 7):
            lp = np.full(k, math.log(1.0 / k))
            assert margin(lp) == pytest.approx(0.0, abs=1e-12)

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            margin(np.array([-0.5]))

    def test_matches_brute_force_on_random_distributions(self):
        for lp in random_logprob_vectors(1000, seed=42):
            assert abs(margin(lp) - brute_margin(list(lp))) < 1e-9

    def test_nonnegative_and_zero_iff_tied(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            lp = np.log(rng.dirichlet(np.ones(4)))
            m = margin(lp)
            assert m >= 0.0
            top2 = np.partition(lp, -2)[-2:]
            assert (m == 0.0) == (top2[0] == top2[1])


class TestEntropy:
    def test_uniform_two_class(self):
        lp = np.log([0.5, 0.5])
        assert entropy(lp) == pytest.approx(0.6931471805599453, abs=1e-12)

    def test_one_hot_limit_with_filler(self):
        assert entropy(np.array([0.0, -100.0])) < 1e-9

    def test_known_three_class_value(self):
        # frozen from the independent direct evaluation of -sum(p ln p)
        lp = np.log([0.7, 0.2, 0.1])
        assert entropy(lp) == pytest.approx(0.8018185525433372, abs=1e-4)

    def test_matches_brute_force_on_random_distributions(self):
        for lp in random_logprob_vectors(1000, seed=43):
            assert abs(entropy(lp) - brute_entropy(list(lp))) < 1e-9

    def test_bounds_and_shift_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            k = int(rng.integers(2, 6))
            lp = np.log(rng.dirichlet(np.ones(k)))
            h = entropy(lp)
            assert 0.0 <= h <= math.log(k) + 1e-12
            assert entropy(lp + 13.7) == pytest.approx(h, abs=1e-9)


class TestQbcDisagreement:
    def test_all_agree(self):
        assert qbc_disagreement(2, [2, 2, 2, 2]) == 0.0

    def test_half_disagree(self):
        assert qbc_disagreement(1, [1, 0, 1, 2]) == 0.5

    def test_empty_committee(self):
        assert qbc_disagreement(0, []) == 0.0

    def test_quantised_values(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            m = int(rng.integers(1, 6))
            labels = list(rng.integers(0, 3, size=m))
            d = qbc_disagreement(1, labels)
            assert any(abs(d - i / m) < 1e-12 for i in range(m + 1))


class TestCoresetSimilarity:
    def test_self_similarity(self):
        v = np.array([0.6, 0.8])
        store = [v / np.linalg.norm(v)]
        assert coreset_max_similarity(v, store) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        store = [np.array([1.0, 0.0])]
        assert coreset_max_similarity(np.array([0.0, 2.0]), store) == pytest.approx(0.0, abs=1e-12)

    def test_empty_store_sentinel(self):
        assert coreset_max_similarity(np.array([1.0, 1.0]), []) == EMPTY_STORE_SIMILARITY

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            coreset_max_similarity(np.zeros(3), [np.array([1.0, 0.0, 0.0])])


class TestAdaptiveThreshold:
    def test_twenty_percent_of_explicit_history(self):
        # brute force over the explicit list {1..100}: the most-uncertain 20%
        # is {81..100}, so the nearest-rank threshold is 81
        history = [float(v) for v in range(1, 101)]
        thr = adaptive_threshold(history, remaining_budget=20, remaining_instances=100)
        assert thr == 81.0
        assert sum(1 for v in history if v >= thr) == 20
        assert 85.0 >= thr  # a score in the most-uncertain 20% selects
        assert not 80.0 >= thr

    def test_budget_at_least_instances_selects_everything(self):
        history = [float(v) for v in range(50)]
        thr = adaptive_threshold(history, remaining_budget=10, remaining_instances=10)
        assert thr == float("-inf")

    def test_empty_history_selects(self):
        assert adaptive_threshold([], 5, 100) == float("-inf")

    def test_zero_budget_selects_nothing(self):
        assert adaptive_threshold([1.0, 2.0], 0.0, 10) == float("inf")

    def test_nearest_rank_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            history = list(rng.normal(size=int(rng.integers(1, 40))))
            b = float(rng.uniform(0, 20))
            n = int(rng.integers(1, 30))
            thr = adaptive_threshold(history, b, n)
            q = min(1.0, b / n)
            if q >= 1.0:
                assert thr == float("-inf")
            else:
                ordered = sorted(history, reverse=True)
                assert thr == ordered[math.ceil(q * len(ordered)) - 1]


class TestCommittee:
    def test_ring_buffer_eviction(self):
        state = new_policy_state(PolicyConfig(kind="qbc"), rng_seed=0)
        models = [zero_model(2, 2) for _ in range(5)]
        for m in models[:4]:
            snapshot_committee(state, m)
        assert len(state.committee) == 4
        snapshot_committee(state, models[4])
        assert len(state.committee) == 4
        assert models[0] not in state.committee
        assert models[4] in state.committee

    def test_first_snapshot(self):
        state = new_policy_state(PolicyConfig(kind="qbc"), rng_seed=0)
        snapshot_committee(state, zero_model(2, 2))
        assert len(state.committee) == 1


def _uniform_logprobs(k=2):
    return np.full(k, math.log(1.0 / k))


class TestDecide:
    def test_front_loading_calls_while_budget_remains(self):
        state = new_policy_state(PolicyConfig(kind="fr"), rng_seed=0)
        d = decide(state, _uniform_logprobs(), remaining_budget=3, cost=1, remaining_instances=10)
        assert d.call_teacher

    def test_budget_exhausted_never_calls(self):
        for kind in ("fr", "random", "ms", "pe", "qbc", "cs"):
            state = new_policy_state(PolicyConfig(kind=kind), rng_seed=0)
            d = decide(state, _uniform_logprobs(), remaining_budget=0.0, cost=1.0,
                       remaining_instances=5, features=np.zeros(2),
                       embedding=np.array([1.0, 0.0]))
            assert not d.call_teacher, kind

    def test_ms_fixed_threshold_classical_direction(self):
        config = PolicyConfig(kind="ms", mode="fixed", fixed_threshold=5.0)
        state = new_policy_state(config, rng_seed=0)
        wide = np.array([0.0, -7.0])  # margin 7: confident, no call
        assert not decide(state, wide, 100, 1, 10).call_teacher
        narrow = np.array([0.0, -2.0])  # margin 2: uncertain, call
        assert decide(state, narrow, 100, 1, 10).call_teacher

    def test_ms_inverted_direction(self):
        config = PolicyConfig(kind="ms", mode="fixed", fixed_threshold=5.0, invert_margin=True)
        state = new_policy_state(config, rng_seed=0)
        assert decide(state, np.array([0.0, -7.0]), 100, 1, 10).call_teacher
        assert not decide(state, np.array([0.0, -2.0]), 100, 1, 10).call_teacher

    def test_pe_fixed_threshold(self):
        config = PolicyConfig(kind="pe", mode="fixed", fixed_threshold=0.5)
        state = new_policy_state(config, rng_seed=0)
        assert decide(state, _uniform_logprobs(), 100, 1, 10).call_teacher  # ln2 > 0.5
        assert not decide(state, np.array([0.0, -100.0]), 100, 1, 10).call_teacher

    def test_qbc_fixed_empty_committee_never_selects(self):
        config = PolicyConfig(kind="qbc", mode="fixed", fixed_threshold=0.0)
        state = new_policy_state(config, rng_seed=0)
        d = decide(state, _uniform_logprobs(), 100, 1, 10, features=np.zeros(2))
        assert not d.call_teacher
        assert state.qbc_degenerate_decisions == 1

    def test_qbc_fixed_with_disagreeing_committee(self):
        config = PolicyConfig(kind="qbc", mode="fixed", fixed_threshold=0.25)
        state = new_policy_state(config, rng_seed=0)
        W = np.zeros((2, 3))
        W[1, -1] = 5.0  # always predicts class 1, disagreeing with zero-model's 0
        snapshot_committee(state, StudentModel(weights=W))
        d = decide(state, np.array([-0.1, -2.0]), 100, 1, 10, features=np.zeros(2))
        assert d.call_teacher
        assert d.score.value == 1.0

    def test_cs_similarity_rule(self):
        config = PolicyConfig(kind="cs", mode="fixed", coreset_threshold=0.9)
        state = new_policy_state(config, rng_seed=0)
        emb = np.array([1.0, 0.0])
        # empty store: sentinel is below any threshold, so select
        assert decide(state, _uniform_logprobs(), 100, 1, 10, embedding=emb).call_teacher
        state.record_teacher_annotation(emb)
        # identical input: similarity 1.0 >= 0.9, no call
        assert not decide(state, _uniform_logprobs(), 100, 1, 10, embedding=emb).call_teacher
        # orthogonal input: similarity 0.0 < 0.9, call
        orto = np.array([0.0, 1.0])
        assert decide(state, _uniform_logprobs(), 100, 1, 10, embedding=orto).call_teacher

    def test_adaptive_appends_history_in_order(self):
        config = PolicyConfig(kind="ms", mode="adaptive")
        state = new_policy_state(config, rng_seed=0)
        margins = [3.0, 1.0, 2.0]
        for m in margins:
            decide(state, np.array([0.0, -m]), 100, 1, 10)
        assert state.history == [-3.0, -1.0, -2.0]  # uncertainty orientation

    def test_random_rate_zero_and_one(self):
        state = new_policy_state(PolicyConfig(kind="random"), rng_seed=0)
        assert not decide(state, _uniform_logprobs(), 0.0, 1.0, 10).call_teacher
        state2 = new_policy_state(PolicyConfig(kind="random"), rng_seed=0)
        calls = sum(
            decide(state2, _uniform_logprobs(), 1000.0, 1.0, 10).call_teacher
            for _ in range(100)
        )
        assert calls == 100  # rate clamps at 1

    def test_random_rate_statistics(self):
        hits = 0
        trials = 4000
        state = new_policy_state(PolicyConfig(kind="random"), rng_seed=7)
        for _ in range(trials):
            hits += decide(state, _uniform_logprobs(), 30.0, 1.0, 100).call_teacher
        assert abs(hits / trials - 0.3) < 0.03


class TestOrientation:
    def test_negation_with_flip_preserves_decisions(self):
        rng = np.random.default_rng(9)
        raw = [CriterionScore(float(v), higher_is_uncertain=True)
               for v in rng.normal(size=200)]
        mirrored = [s.negated() for s in raw]
        incoming = [CriterionScore(float(v), higher_is_uncertain=True)
                    for v in rng.normal(size=50)]
        for budget in (5.0, 20.0, 60.0):
            thr_a = adaptive_threshold([s.uncertainty() for s in raw], budget, 100)
            thr_b = adaptive_threshold([s.uncertainty() for s in mirrored], budget, 100)
            assert thr_a == thr_b
            for s in incoming:
                assert (s.uncertainty() >= thr_a) == (s.negated().uncertainty() >= thr_b)


class TestConfigValidation:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            PolicyConfig(kind="nonsense").validate()

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            PolicyConfig(kind="ms", mode="sometimes").validate()

    def test_coreset_threshold_range(self):
        with pytest.raises(ValueError):
            PolicyConfig(kind="cs", coreset_threshold=1.5).validate()
