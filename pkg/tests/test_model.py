"""Model-layer unit tests: Malus probabilities, delay timescales, samplers."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from eprsim import ModelParams, ValidationError
from eprsim.model import (
    delay_from_uniform,
    delay_timescale,
    hidden_from_uniform,
    normalize_angle,
    outcome_from_uniform,
    outcome_prob,
    sample_delay,
    sample_hidden_pair,
    sample_outcome,
)

angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.d, p.t0, p.window) == (4.0, 1000.0, 10.0)

    @pytest.mark.parametrize("kwargs", [dict(t0=0.0), dict(t0=-1.0), dict(window=-0.1), dict(d=-1.0)])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            ModelParams(**kwargs)


class TestOutcomeProb:
    def test_plus_at_zero(self):
        assert outcome_prob(+1, 0.0) == 1.0

    def test_minus_at_zero(self):
        assert outcome_prob(-1, 0.0) == 0.0

    def test_malus_at_pi_over_8(self):
        # cos(pi/4) = sqrt(2)/2, so p(+1) = (1 + sqrt(2)/2) / 2
        assert outcome_prob(+1, np.pi / 8) == pytest.approx(0.8535533905932737, abs=1e-15)

    def test_invalid_outcome_rejected(self):
        with pytest.raises(ValidationError):
            outcome_prob(0, 0.3)
        with pytest.raises(ValidationError):
            outcome_prob(2, 0.3)

    @given(zeta=angles)
    def test_normalization_is_exact(self, zeta):
        assert outcome_prob(+1, zeta) + outcome_prob(-1, zeta) == 1.0

    @given(zeta=angles)
    def test_range(self, zeta):
        p = outcome_prob(+1, zeta)
        assert 0.0 <= p <= 1.0

    @given(zeta=angles)
    def test_pi_periodic(self, zeta):
        assert outcome_prob(+1, zeta + np.pi) == pytest.approx(outcome_prob(+1, zeta), abs=1e-9)


class TestDelayTimescale:
    def test_max_at_pi_over_4(self):
        assert delay_timescale(np.pi / 4, ModelParams(d=4, t0=1.0, window=0)) == pytest.approx(1.0)

    def test_zero_at_zero(self):
        assert delay_timescale(0.0, ModelParams(d=4, t0=1.0, window=0)) == 0.0

    def test_half_power(self):
        # |sin(pi/4)|^2 = 1/2 with t0 = 2
        assert delay_timescale(np.pi / 8, ModelParams(d=2, t0=2.0, window=0)) == pytest.approx(1.0)

    def test_d_zero_is_constant_everywhere(self):
        p = ModelParams(d=0, t0=3.0, window=0)
        zeta = np.array([0.0, np.pi / 2, np.pi / 4, 1.234])
        assert np.all(delay_timescale(zeta, p) == 3.0)

    @given(zeta=angles, d=st.floats(min_value=0, max_value=8), t0=st.floats(min_value=1e-3, max_value=1e4))
    def test_range_and_period(self, zeta, d, t0):
        p = ModelParams(d=d, t0=t0, window=0)
        t = delay_timescale(zeta, p)
        assert 0.0 <= t <= t0
        # Near the zeros a fractional power d < 1 amplifies the rounding
        # of sin(2 zeta); the tolerance has to scale accordingly.
        atol = 10.0 * t0 * (5e-16) ** min(d, 1.0) if d > 0 else 0.0
        assert delay_timescale(zeta + np.pi, p) == pytest.approx(t, rel=1e-9, abs=atol)


class TestSamplers:
    def test_outcome_deterministic_extremes(self):
        rng = np.random.default_rng(1)
        assert all(sample_outcome(0.0, rng) == 1 for _ in range(200))
        assert all(sample_outcome(np.pi / 2, rng) == -1 for _ in range(200))

    def test_outcome_mean_unbiased_at_pi_over_4(self):
        rng = np.random.default_rng(2)
        n = 10**6
        draws = sample_outcome(np.full(n, np.pi / 4), rng)
        assert abs(draws.mean()) < 5.0 / np.sqrt(n)

    @pytest.mark.parametrize("zeta", np.linspace(0.05, 3.0, 7))
    def test_outcome_frequency_matches_probability(self, zeta):
        rng = np.random.default_rng(int(zeta * 1000))
        n = 40_000
        freq = np.mean(sample_outcome(np.full(n, zeta), rng) == 1)
        assert abs(freq - outcome_prob(+1, zeta)) < 5.0 / np.sqrt(n)

    def test_delay_at_degenerate_timescale_is_zero(self):
        rng = np.random.default_rng(3)
        p = ModelParams(d=4, t0=1.0, window=0)
        assert all(sample_delay(0.0, p, rng) == 0.0 for _ in range(100))

    def test_delay_mean_is_half_timescale(self):
        rng = np.random.default_rng(4)
        p = ModelParams(d=4, t0=1.0, window=0)
        n = 10**6
        draws = sample_delay(np.full(n, np.pi / 4), p, rng)
        sigma = (1.0 / np.sqrt(12.0)) / np.sqrt(n)
        assert abs(draws.mean() - 0.5) < 5.0 * sigma

    def test_delay_uniform_ks(self):
        rng = np.random.default_rng(5)
        p = ModelParams(d=4, t0=2.0, window=0)
        zeta = np.pi / 8
        scale = delay_timescale(zeta, p)
        draws = sample_delay(np.full(10**5, zeta), p, rng)
        assert np.all((0 <= draws) & (draws <= scale))
        assert stats.kstest(draws / scale, "uniform").pvalue > 0.001

    def test_delay_d_zero_spans_t0(self):
        rng = np.random.default_rng(6)
        p = ModelParams(d=0, t0=1.0, window=0)
        draws = sample_delay(np.full(1000, np.pi / 4), p, rng)
        assert np.all((0 <= draws) & (draws <= 1.0))


class TestHiddenPair:
    def test_orthogonality(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            pair = sample_hidden_pair(rng)
            assert np.isclose((pair.s2 - pair.s1) % np.pi, np.pi / 2, atol=1e-12)

    def test_range(self):
        rng = np.random.default_rng(8)
        draws = np.array([sample_hidden_pair(rng).s1 for _ in range(2000)])
        assert np.all((0 <= draws) & (draws < 2 * np.pi))

    def test_uniformity_mod_pi_ks(self):
        rng = np.random.default_rng(9)
        s1 = hidden_from_uniform(rng.random(10**5))
        assert stats.kstest((s1 % np.pi) / np.pi, "uniform").pvalue > 0.001


class TestUniformMaps:
    """The deterministic maps behind the samplers, used by the event generator."""

    def test_outcome_threshold(self):
        zeta = 0.7
        p = outcome_prob(+1, zeta)
        assert outcome_from_uniform(p - 1e-9, zeta) == 1
        assert outcome_from_uniform(p + 1e-9, zeta) == -1

    def test_delay_scales_uniform(self):
        p = ModelParams(d=2, t0=5.0, window=0)
        u = np.array([0.0, 0.25, 1.0 - 1e-16])
        d = delay_from_uniform(u, np.pi / 4, p)
        assert np.allclose(d, u * 5.0)

    def test_rotation_of_settings_and_hidden_cancels(self):
        # zeta = a - s is unchanged when both rotate by delta, so every
        # derived quantity is too.
        u = np.linspace(0, 1, 11, endpoint=False)
        s = hidden_from_uniform(u)
        for delta in (0.1, 1.0, np.pi / 3):
            np.testing.assert_allclose((0.4 + delta) - (s + delta), 0.4 - s, atol=1e-12)


def test_normalize_angle():
    assert normalize_angle(np.pi + 0.5) == pytest.approx(0.5)
    assert normalize_angle(-0.25) == pytest.approx(np.pi - 0.25)
    assert normalize_angle(0.0) == 0.0
