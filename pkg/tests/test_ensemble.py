import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ota_ensemble.ensemble import (
    Decision,
    NoisyContribution,
    ScoreVector,
    add_privacy_noise,
    belief_prediction,
    cis_decide,
    to_one_hot,
    vote_prediction,
)
from ota_ensemble.errors import ParameterError


def simplex_vectors(min_k=2, max_k=8):
    return (
        st.lists(st.floats(0.0, 1.0), min_size=min_k, max_size=max_k)
        .filter(lambda v: sum(v) > 1e-3)
        .map(lambda v: [x / sum(v) for x in v])
    )


class TestScoreVector:
    def test_accepts_and_renormalizes(self):
        sv = ScoreVector([0.1, 0.7, 0.2])
        assert sv.num_classes == 3
        assert sv.scores.sum() == pytest.approx(1.0, abs=1e-9)

    def test_renormalizes_within_tolerance(self):
        sv = ScoreVector([0.5, 0.5 + 5e-7])
        assert abs(sv.scores.sum() - 1.0) <= 1e-9

    def test_rejects_beyond_tolerance(self):
        with pytest.raises(ParameterError, match="sum"):
            ScoreVector([0.4, 0.4])

    def test_rejects_negative(self):
        with pytest.raises(ParameterError, match="negative"):
            ScoreVector([1.1, -0.1])

    def test_rejects_single_class(self):
        with pytest.raises(ParameterError):
            ScoreVector([1.0])

    def test_readonly(self):
        sv = ScoreVector([0.5, 0.5])
        with pytest.raises(ValueError):
            sv.scores[0] = 0.9

    @given(simplex_vectors())
    @settings(max_examples=100, deadline=None)
    def test_invariants_hold_for_accepted_inputs(self, values):
        sv = ScoreVector(values)
        assert np.all(sv.scores >= 0.0)
        assert np.all(sv.scores <= 1.0)
        assert abs(sv.scores.sum() - 1.0) <= 1e-9


class TestToOneHot:
    def test_middle_index(self):
        assert to_one_hot(2, 4).tolist() == [0.0, 1.0, 0.0, 0.0]

    def test_degenerate_length(self):
        assert to_one_hot(1, 1).tolist() == [1.0]

    def test_boundary_index(self):
        assert to_one_hot(4, 4).tolist() == [0.0, 0.0, 0.0, 1.0]

    @pytest.mark.parametrize("index", [0, 5, -1])
    def test_rejects_out_of_range(self, index):
        with pytest.raises(ParameterError):
            to_one_hot(index, 4)


class TestPredictions:
    def test_belief_is_identity(self):
        sv = ScoreVector([0.1, 0.7, 0.2])
        assert belief_prediction(sv).tolist() == sv.scores.tolist()

    def test_belief_uniform_and_one_hot_fixed_points(self):
        uniform = ScoreVector([0.25] * 4)
        assert belief_prediction(uniform).tolist() == uniform.scores.tolist()
        hot = ScoreVector([0.0, 1.0, 0.0])
        assert belief_prediction(hot).tolist() == [0.0, 1.0, 0.0]

    def test_vote_unique_argmax(self):
        assert vote_prediction(ScoreVector([0.1, 0.7, 0.2])).tolist() == [0.0, 1.0, 0.0]

    def test_vote_tie_breaks_low(self):
        assert vote_prediction(ScoreVector([0.5, 0.5])).tolist() == [1.0, 0.0]

    def test_vote_one_hot_fixed_point(self):
        assert vote_prediction(ScoreVector([0.0, 0.0, 1.0])).tolist() == [0.0, 0.0, 1.0]

    @given(simplex_vectors())
    @settings(max_examples=100, deadline=None)
    def test_vote_idempotent(self, values):
        once = vote_prediction(ScoreVector(values))
        twice = vote_prediction(ScoreVector(once))
        assert once.tolist() == twice.tolist()


class TestAddPrivacyNoise:
    def test_zero_noise_identity(self):
        rng = np.random.default_rng(0)
        out = add_privacy_noise(np.array([0.0, 1.0, 0.0]), 0.0, rng)
        assert out.values.tolist() == [0.0, 1.0, 0.0]
        assert out.noise_std_used == 0.0

    def test_deterministic_under_seed(self):
        a = add_privacy_noise(np.zeros(5), 1.0, np.random.default_rng(42))
        b = add_privacy_noise(np.zeros(5), 1.0, np.random.default_rng(42))
        assert a.values.tolist() == b.values.tolist()

    def test_noise_moments(self):
        rng = np.random.default_rng(7)
        draws = np.stack(
            [add_privacy_noise(np.zeros(2), 1.0, rng).values for _ in range(100_000)]
        )
        means = draws.mean(axis=0)
        variances = draws.var(axis=0)
        assert np.all(np.abs(means) <= 0.02)
        assert np.all((0.98 <= variances) & (variances <= 1.02))

    def test_rejects_negative_std(self):
        with pytest.raises(ParameterError):
            add_privacy_noise(np.zeros(2), -0.5, np.random.default_rng(0))

    def test_length_preserved(self):
        out = add_privacy_noise(np.zeros(7), 0.3, np.random.default_rng(1))
        assert out.values.shape == (7,)
        assert out.noise_std_used == 0.3


class TestCisDecide:
    def test_argmax(self):
        assert cis_decide(np.array([3.2, 7.1, -0.4]), 2.0) == Decision(2)

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = rng.normal(size=6)
            base = cis_decide(v, 1.0)
            for a in (0.1, 1.0, 10.0):
                assert cis_decide(v, a) == base

    def test_all_equal_decides_class_one(self):
        assert cis_decide(np.array([1.0, 1.0, 1.0]), 1.0) == Decision(1)

    def test_rejects_bad_power_scale(self):
        with pytest.raises(ParameterError):
            cis_decide(np.array([1.0, 2.0]), 0.0)

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=6),
        st.floats(0.01, 100.0),
        st.floats(0.01, 100.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_positive_scaling_preserves_decision(self, values, c, a):
        # coarse grid so scaling cannot collapse a strict order into a tie
        v = np.round(np.asarray(values), 3)
        assert cis_decide(c * v, a) == cis_decide(v, 1.0)


class TestNoisyContribution:
    def test_tracks_noise_std(self):
        c = NoisyContribution(np.array([0.5, 0.5]), 0.25)
        assert c.noise_std_used == 0.25
        assert c.values.shape == (2,)

    def test_rejects_negative_std(self):
        with pytest.raises(ParameterError):
            NoisyContribution(np.array([1.0]), -1.0)
