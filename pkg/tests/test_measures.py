import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbscan.measures import (
    DegeneratePairError,
    MeasureError,
    MeasurePair,
    centered_statistic_fn,
    chi_square_zeta,
    likelihood_ratio,
    relative_entropy,
    sample_label,
)


def mpmath_entropy(mu, nu):
    """Independent oracle: 50-digit direct summation."""
    import mpmath
    with mpmath.workdps(50):
        return float(sum(mpmath.mpf(repr(n)) * mpmath.log(mpmath.mpf(repr(n)) / mpmath.mpf(repr(m)))
                         for m, n in zip(mu, nu)))


def random_pair(rng, m):
    mu = rng.random(m) + 0.05
    nu = rng.random(m) + 0.05
    return MeasurePair(mu / mu.sum(), nu / nu.sum())


class TestValidation:
    def test_rejects_zero_entries(self):
        with pytest.raises(MeasureError):
            MeasurePair([1.0, 0.0], [0.5, 0.5])

    def test_rejects_negative(self):
        with pytest.raises(MeasureError):
            MeasurePair([1.2, -0.2], [0.5, 0.5])

    def test_refuses_renormalization(self):
        with pytest.raises(MeasureError):
            MeasurePair([0.5, 0.6], [0.5, 0.5])

    def test_rejects_mismatched_alphabets(self):
        with pytest.raises(MeasureError):
            MeasurePair([0.5, 0.5], [0.25, 0.25, 0.5])

    def test_tiny_alphabet(self):
        with pytest.raises(MeasureError):
            MeasurePair([1.0], [1.0])


class TestRelativeEntropy:
    def test_identical_measures_zero(self):
        pair = MeasurePair([0.5, 0.5], [0.5, 0.5])
        assert relative_entropy(pair) == 0.0

    def test_binary_three_quarters(self):
        pair = MeasurePair([0.5, 0.5], [0.75, 0.25])
        expected = mpmath_entropy([0.5, 0.5], [0.75, 0.25])
        got = relative_entropy(pair)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.130812, abs=1e-6)

    def test_four_symbols_sharp(self):
        mu = [0.25] * 4
        nu = [0.97, 0.01, 0.01, 0.01]
        got = relative_entropy(MeasurePair(mu, nu))
        assert got == pytest.approx(mpmath_entropy(mu, nu), abs=1e-12)
        assert got == pytest.approx(1.2186, abs=1e-4)

    def test_nonnegative_and_bounded(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            pair = random_pair(rng, int(rng.integers(2, 6)))
            h = relative_entropy(pair)
            assert h >= 0.0
            assert h <= math.log(1.0 / pair.mu.min()) + 1e-12

    def test_zero_iff_equal(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            pair = random_pair(rng, 3)
            if not pair.is_degenerate():
                assert relative_entropy(pair) > 0.0


class TestChiSquareZeta:
    def test_identical_is_one(self):
        assert chi_square_zeta(MeasurePair([0.3, 0.7], [0.3, 0.7])) == pytest.approx(1.0)

    @pytest.mark.parametrize("nu,expected", [([0.75, 0.25], 1.25), ([0.9, 0.1], 1.64)])
    def test_binary_values(self, nu, expected):
        pair = MeasurePair([0.5, 0.5], nu)
        assert chi_square_zeta(pair) == pytest.approx(expected, abs=1e-12)

    def test_at_least_one(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            pair = random_pair(rng, int(rng.integers(2, 6)))
            z = chi_square_zeta(pair)
            assert z >= 1.0 - 1e-12
            if pair.is_degenerate():
                assert z == pytest.approx(1.0)


class TestLikelihoodRatio:
    def test_identical_any_label(self):
        pair = MeasurePair([0.4, 0.6], [0.4, 0.6])
        assert likelihood_ratio(pair, 0) == 1.0
        assert likelihood_ratio(pair, 1) == 1.0

    def test_values(self):
        pair = MeasurePair([0.5, 0.5], [0.75, 0.25])
        assert likelihood_ratio(pair, 0) == pytest.approx(1.5)
        assert likelihood_ratio(pair, 1) == pytest.approx(0.5)

    def test_label_out_of_range(self):
        pair = MeasurePair([0.5, 0.5], [0.75, 0.25])
        with pytest.raises(MeasureError):
            likelihood_ratio(pair, 2)

    def test_mu_weighted_mean_is_one(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            pair = random_pair(rng, int(rng.integers(2, 7)))
            total = sum(pair.mu[a] * likelihood_ratio(pair, a) for a in range(pair.m))
            assert total == pytest.approx(1.0, abs=1e-12)


class TestCenteredStatistic:
    def test_binary_examples(self):
        f = centered_statistic_fn(MeasurePair([0.5, 0.5], [0.75, 0.25]))
        np.testing.assert_allclose(f, [2.0, -2.0])
        f2 = centered_statistic_fn(MeasurePair([0.5, 0.5], [0.9, 0.1]))
        np.testing.assert_allclose(f2, [1.25, -1.25])

    def test_degenerate_pair_raises(self):
        with pytest.raises(DegeneratePairError):
            centered_statistic_fn(MeasurePair([0.5, 0.5], [0.5, 0.5]))

    def test_moment_conditions(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            pair = random_pair(rng, int(rng.integers(2, 7)))
            if pair.is_degenerate():
                continue
            f = centered_statistic_fn(pair)
            assert float(pair.mu @ f) == pytest.approx(0.0, abs=1e-12)
            assert float(pair.nu @ f) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=6),
       st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=6))
@settings(max_examples=100, deadline=None)
def test_entropy_and_zeta_invariants(raw_mu, raw_nu):
    m = min(len(raw_mu), len(raw_nu))
    mu = np.array(raw_mu[:m]) / sum(raw_mu[:m])
    nu = np.array(raw_nu[:m]) / sum(raw_nu[:m])
    pair = MeasurePair(mu, nu)
    assert relative_entropy(pair) >= -1e-15
    assert relative_entropy(pair) <= math.log(1.0 / pair.mu.min()) + 1e-9
    assert chi_square_zeta(pair) >= 1.0 - 1e-12


class TestSampleLabel:
    def test_point_mass(self):
        rng = np.random.default_rng(0)
        assert sample_label([0.0, 0.0, 1.0], rng) == 2

    def test_frequency_within_binomial_ci(self):
        rng = np.random.default_rng(21)
        draws = sample_label([0.5, 0.5], rng, size=10**6)
        freq = float(np.mean(draws == 0))
        assert 0.498 <= freq <= 0.502

    def test_deterministic_given_seed(self):
        a = sample_label([0.3, 0.3, 0.4], np.random.default_rng(99), size=1000)
        b = sample_label([0.3, 0.3, 0.4], np.random.default_rng(99), size=1000)
        np.testing.assert_array_equal(a, b)

    def test_rejects_bad_vectors(self):
        rng = np.random.default_rng(0)
        with pytest.raises(MeasureError):
            sample_label([0.7, 0.7], rng)
        with pytest.raises(MeasureError):
            sample_label([-0.5, 1.5], rng)
