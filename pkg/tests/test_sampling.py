import numpy as np
import pytest

from gemix.sampling import (
    ConcentrationVector,
    build_concentration,
    sample_dominant_class,
    sample_latent,
    sample_mix_coefficient,
    sample_soft_label,
    substream,
)


class TestBuildConcentration:
    def test_three_class_example(self):
        cv = build_concentration(1, 3, a_eq=2.0, a_neq=1.0)
        assert np.array_equal(cv.theta, [1.0, 2.0, 1.0])
        assert cv.dominant == 1

    def test_single_class(self):
        cv = build_concentration(0, 1, a_eq=2.0, a_neq=1.0)
        assert np.array_equal(cv.theta, [2.0])

    def test_last_class_dominant(self):
        cv = build_concentration(3, 4, 2.0, 1.0)
        assert np.array_equal(cv.theta, [1.0, 1.0, 1.0, 2.0])

    @pytest.mark.parametrize("a_eq,a_neq", [(1.0, 1.0), (1.0, 2.0), (2.0, 0.0), (0.0, -1.0)])
    def test_rejects_bad_ordering(self, a_eq, a_neq):
        with pytest.raises(ValueError, match="a_eq > a_neq > 0"):
            build_concentration(0, 3, a_eq, a_neq)

    def test_rejects_bad_class(self):
        with pytest.raises(ValueError):
            build_concentration(3, 3)
        with pytest.raises(ValueError):
            build_concentration(-1, 3)


class TestDominantClass:
    def test_single_class_always_zero(self):
        rng = np.random.default_rng(0)
        assert all(sample_dominant_class(1, rng) == 0 for _ in range(100))

    def test_uniform_frequencies(self):
        rng = np.random.default_rng(1)
        draws = sample_dominant_class(3, rng, size=100_000)
        for c in range(3):
            assert abs((draws == c).mean() - 1 / 3) < 0.01

    def test_scalar_and_vector_draws_agree_in_range(self):
        rng = np.random.default_rng(2)
        assert 0 <= sample_dominant_class(4, rng) < 4
        draws = sample_dominant_class(4, rng, size=100)
        assert draws.min() >= 0 and draws.max() < 4

    def test_deterministic_given_seed(self):
        a = [sample_dominant_class(5, np.random.default_rng(7)) for _ in range(1)]
        first = [sample_dominant_class(5, np.random.default_rng(7)) for _ in range(1)]
        assert a == first

    def test_rejects_zero_classes(self):
        with pytest.raises(ValueError):
            sample_dominant_class(0, np.random.default_rng(0))


class TestSoftLabel:
    def test_dirichlet_mean_211(self):
        # Dirichlet mean is theta / sum(theta) = (0.5, 0.25, 0.25)
        rng = np.random.default_rng(2)
        draws = sample_soft_label(build_concentration(0, 3), rng, size=100_000)
        assert np.allclose(draws.mean(axis=0), [0.5, 0.25, 0.25], atol=0.01)

    def test_single_class_is_exactly_one(self):
        rng = np.random.default_rng(3)
        ell = sample_soft_label(np.array([2.0]), rng)
        assert ell.shape == (1,)
        assert ell[0] == 1.0

    def test_symmetric_pair_is_uniform(self):
        # For theta=(1,1) the first coordinate is U[0,1]; compare the
        # empirical CDF against the analytic one with a KS statistic.
        rng = np.random.default_rng(4)
        draws = np.sort(sample_soft_label(np.array([1.0, 1.0]), rng, size=100_000)[:, 0])
        n = len(draws)
        grid = np.arange(1, n + 1) / n
        ks = max(np.max(grid - draws), np.max(draws - (grid - 1 / n)))
        assert ks < 0.01

    def test_simplex_invariant(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            k = int(rng.integers(1, 8))
            theta = rng.uniform(0.2, 5.0, size=k)
            ell = sample_soft_label(theta, rng)
            assert ell.min() >= 0.0 and ell.max() <= 1.0
            assert abs(ell.sum() - 1.0) <= 1e-6

    def test_accepts_concentration_vector_and_array(self):
        ell = sample_soft_label(ConcentrationVector(np.array([2.0, 1.0]), 0),
                                np.random.default_rng(6))
        assert ell.shape == (2,)

    def test_rejects_nonpositive_theta(self):
        with pytest.raises(ValueError):
            sample_soft_label(np.array([1.0, 0.0]), np.random.default_rng(0))


class TestMixCoefficient:
    def test_uniform_mean_for_alpha_one(self):
        rng = np.random.default_rng(7)
        draws = sample_mix_coefficient(1.0, rng, size=100_000)
        assert abs(draws.mean() - 0.5) < 0.01

    def test_symmetric_mean_any_alpha(self):
        rng = np.random.default_rng(8)
        draws = sample_mix_coefficient(0.4, rng, size=100_000)
        assert abs(draws.mean() - 0.5) < 0.01

    def test_variance_alpha_02(self):
        # Var Beta(a, a) = a^2 / ((2a)^2 (2a+1)) = 1 / (4 (2a+1)); a=0.2 -> 1/5.6
        rng = np.random.default_rng(9)
        draws = sample_mix_coefficient(0.2, rng, size=100_000)
        assert abs(draws.var() - 1 / 5.6) < 0.005

    def test_range(self):
        rng = np.random.default_rng(10)
        draws = [sample_mix_coefficient(0.5, rng) for _ in range(1000)]
        assert all(0.0 <= lam <= 1.0 for lam in draws)

    def test_rejects_nonpositive_alpha(self):
        for alpha in (0.0, -1.0):
            with pytest.raises(ValueError):
                sample_mix_coefficient(alpha, np.random.default_rng(0))


class TestLatent:
    def test_moments(self):
        rng = np.random.default_rng(11)
        draws = sample_latent(64, rng, size=100_000)
        assert np.all(np.abs(draws.mean(axis=0)) < 0.02)
        assert np.all(np.abs(draws.var(axis=0) - 1.0) < 0.03)

    def test_scalar_case(self):
        assert sample_latent(1, np.random.default_rng(12)).shape == (1,)

    def test_deterministic_given_seed(self):
        a = sample_latent(16, np.random.default_rng(13))
        b = sample_latent(16, np.random.default_rng(13))
        assert np.array_equal(a, b)

    def test_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            sample_latent(0, np.random.default_rng(0))


class TestSubstreams:
    def test_same_purpose_same_stream(self):
        a = substream(42, "labels").standard_normal(8)
        b = substream(42, "labels").standard_normal(8)
        assert np.array_equal(a, b)

    def test_purposes_are_independent_streams(self):
        a = substream(42, "labels").standard_normal(8)
        b = substream(42, "latents").standard_normal(8)
        assert not np.array_equal(a, b)

    def test_consuming_one_stream_leaves_others_fixed(self):
        latents = substream(42, "latents")
        latents.standard_normal(1000)  # extra draws of one kind
        after = substream(42, "labels").standard_normal(8)
        baseline = substream(42, "labels").standard_normal(8)
        assert np.array_equal(after, baseline)

    def test_raw_offset_allowed(self):
        assert substream(42, 3) is not None
