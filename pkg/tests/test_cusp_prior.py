import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from cuspfactor.cusp_prior import (
    CuspHyper,
    draw_indicators,
    expected_active,
    expected_omega,
    expected_pi,
    expected_theta,
    sample_prior_batch,
    sample_prior_sequence,
    slab_outside_mass,
    stick_break,
    tail_prob,
    truncation_bound,
)
from cuspfactor.errors import ParameterDomainError
from cuspfactor.prob_core import make_rng

from conftest import mc_within


class TestHyper:
    def test_defaults(self):
        h = CuspHyper()
        assert (h.alpha, h.a_theta, h.b_theta, h.theta_inf) == (5.0, 2.0, 2.0, 0.05)
        assert h.slab_mean == 2.0

    @pytest.mark.parametrize("kw", [{"alpha": 0}, {"a_theta": -1}, {"b_theta": 0}, {"theta_inf": -0.1}])
    def test_domain(self, kw):
        with pytest.raises(ParameterDomainError):
            CuspHyper(**kw)

    def test_warns_when_slab_not_above_spike(self):
        with pytest.warns(UserWarning):
            CuspHyper(a_theta=2.0, b_theta=0.05, theta_inf=0.05)

    def test_zero_spike_allowed(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert CuspHyper(theta_inf=0.0).theta_inf == 0.0


class TestStickBreak:
    def test_single(self):
        s = stick_break([1.0])
        assert np.array_equal(s.omega, [1.0]) and np.array_equal(s.pi, [1.0])

    def test_two(self):
        s = stick_break([0.5, 1.0])
        assert np.allclose(s.omega, [0.5, 0.5], atol=1e-12)
        assert np.allclose(s.pi, [0.5, 1.0], atol=1e-12)

    def test_three(self):
        s = stick_break([0.2, 0.5, 1.0])
        assert np.allclose(s.omega, [0.2, 0.4, 0.4], atol=1e-12)
        assert np.allclose(s.pi, [0.2, 0.6, 1.0], atol=1e-12)

    @pytest.mark.parametrize("v", [[0.0, 1.0], [0.5, 1.2], [], [np.nan]])
    def test_domain(self, v):
        with pytest.raises(ParameterDomainError):
            stick_break(v)

    def test_random_vectors(self):
        rng = make_rng(7)
        for _ in range(10_000):
            H = int(rng.integers(1, 30))
            v = rng.uniform(1e-6, 1.0, size=H)
            v[-1] = 1.0
            s = stick_break(v)
            assert s.pi[-1] == 1.0
            assert abs(s.omega.sum() - s.pi[-1]) <= 1e-12
            assert np.all(np.diff(s.pi) >= 0)
            assert np.allclose(np.cumsum(s.omega), s.pi, atol=1e-12, rtol=0)

    @given(st.lists(st.floats(1e-9, 1.0), min_size=1, max_size=50))
    @settings(max_examples=200, deadline=None)
    def test_identities(self, v):
        s = stick_break(v)
        before = np.concatenate(([1.0], np.cumprod(1 - np.array(v))[:-1]))
        assert np.allclose(s.omega, np.array(v) * before, atol=1e-12, rtol=0)
        assert np.allclose(np.cumsum(s.omega), s.pi, atol=1e-12, rtol=0)
        assert np.all(np.diff(s.pi) >= 0)


class TestClosedForms:
    @pytest.mark.parametrize("alpha,h,expected", [(1, 1, 0.5), (5, 1, 1 / 6), (5, 2, 11 / 36)])
    def test_expected_pi(self, alpha, h, expected):
        assert expected_pi(alpha, h) == pytest.approx(expected, abs=1e-12)

    def test_expected_omega_sums_to_pi(self):
        for h in range(1, 20):
            assert sum(expected_omega(3.0, l) for l in range(1, h + 1)) == pytest.approx(expected_pi(3.0, h))

    def test_expected_theta_fixed_point(self):
        assert expected_theta(2.0, 4, 0.3, 0.3) == pytest.approx(0.3)

    def test_expected_theta_values(self):
        assert expected_theta(1, 1, 2.0, 0.0) == pytest.approx(1.0)
        assert expected_theta(5, 3, 2.0, 0.05) == pytest.approx(0.05 + (5 / 6) ** 3 * 1.95)
        assert expected_theta(5, 3, 2.0, 0.05) == pytest.approx(1.178472, abs=1e-6)

    def test_tail_prob(self):
        assert tail_prob(3.0, 4, 0.0) == 0.0
        assert tail_prob(1, 1, 1.0) == pytest.approx(0.5)
        assert tail_prob(5, 3, 1.0) == pytest.approx(0.578704, abs=1e-6)

    def test_truncation_bound(self):
        assert truncation_bound(5, 3, 0.0) == 0.0
        assert truncation_bound(1, 10, 1.0) == pytest.approx(9.765625e-4)
        assert truncation_bound(5, 0, 1.0) == pytest.approx(5.0)

    def test_expected_active(self):
        assert expected_active(5) == 5
        assert expected_active(0.1) == pytest.approx(0.1)
        assert expected_active(1e-12) < 1e-11

    @pytest.mark.parametrize("bad", [lambda: expected_pi(0, 1), lambda: expected_pi(1, 0),
                                     lambda: tail_prob(1, 1, 1.5), lambda: truncation_bound(1, -1, 0.5)])
    def test_domain(self, bad):
        with pytest.raises(ParameterDomainError):
            bad()


class TestSlabMass:
    @pytest.mark.parametrize("a,b,c,eps", [(2, 2, 0.05, 0.1), (2, 2, 0.05, 0.5), (1, 2, 0.0, 0.1), (5, 1, 0.3, 0.2)])
    def test_against_quadrature(self, a, b, c, eps):
        pdf = stats.invgamma(a, scale=b).pdf
        inside, _ = integrate.quad(pdf, max(c - eps, 0.0), c + eps, epsabs=1e-14, epsrel=1e-12)
        assert slab_outside_mass(a, b, c, eps) == pytest.approx(1 - inside, abs=1e-10)

    def test_bad_eps(self):
        with pytest.raises(ParameterDomainError):
            slab_outside_mass(2, 2, 0.05, 0.0)


class TestPriorSampling:
    def test_single_component(self, rng):
        h = CuspHyper()
        for _ in range(50):
            d = sample_prior_sequence(h, 1, rng)
            assert d.z[0] == 1 and d.theta[0] == h.theta_inf and d.active_count == 0

    def test_invariants(self, rng):
        h = CuspHyper()
        for _ in range(200):
            d = sample_prior_sequence(h, 12, rng)
            spike = d.z <= np.arange(1, 13)
            assert np.all(d.theta[spike] == h.theta_inf)
            assert np.all(d.theta[~spike] != h.theta_inf)
            assert np.all(d.theta > 0)
            assert d.active_count <= 11
            assert np.all((d.z >= 1) & (d.z <= 12))

    def test_indicator_frequencies(self, rng):
        pi = stick_break([0.3, 0.5, 1.0]).pi
        z = np.concatenate([draw_indicators(pi, rng) for _ in range(10_000)])
        counts = np.bincount(z, minlength=4)[1:]
        assert stats.chisquare(counts, z.size * np.array([0.3, 0.35, 0.35])).pvalue > 1e-3

    def test_batch_matches_sequence_law(self):
        h = CuspHyper(alpha=3.0)
        batch = sample_prior_batch(h, 15, 20_000, make_rng(1))
        seq = np.array([sample_prior_sequence(h, 15, make_rng(2, i)).active_count for i in range(4000)])
        a = batch.active_count.astype(float)
        se = np.sqrt(a.var(ddof=1) / a.size + seq.var(ddof=1) / seq.size)
        assert abs(a.mean() - seq.mean()) < 4 * se

    def test_active_mean(self):
        batch = sample_prior_batch(CuspHyper(), 200, 20_000, make_rng(3))
        assert mc_within(batch.active_count, 5.0)

    @pytest.mark.parametrize("h", [1, 3, 10])
    def test_spike_frequency(self, h):
        batch = sample_prior_batch(CuspHyper(), 200, 20_000, make_rng(4))
        assert mc_within(batch.spike[:, h - 1], expected_pi(5.0, h))

    def test_spike_mass_given_sticks(self, rng):
        """Conditionally on the sticks, theta_h sits at the spike with probability pi_h."""
        h = CuspHyper()
        v = np.ones(8)
        v[:-1] = rng.beta(1, h.alpha, size=7)
        sticks = stick_break(v)
        z = np.array([draw_indicators(sticks.pi, rng) for _ in range(40_000)])
        spike = z <= np.arange(1, 9)
        for k in range(8):
            assert mc_within(spike[:, k], sticks.pi[k])
