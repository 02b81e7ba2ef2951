import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import linkbound as lb
from linkbound.inverse_moment import StieltjesTable, truncation_point, with_step


def lognormal_cdf(channel):
    return lambda x: lb.snr_cdf(channel, x)


def step_cdf(atoms, cum_probs):
    """Right-continuous step CDF of a discrete distribution, vectorized."""
    xs = np.asarray(atoms, dtype=float)
    ps = np.asarray(cum_probs, dtype=float)

    def cdf(x):
        idx = np.searchsorted(xs, np.asarray(x, dtype=float), side="right")
        return np.where(idx > 0, ps[np.maximum(idx - 1, 0)], 0.0)

    return cdf


class TestConfigValidation:
    def test_bad_fields(self):
        with pytest.raises(ValueError):
            lb.DiscretizationConfig(step_delta=0.0)
        with pytest.raises(ValueError):
            lb.DiscretizationConfig(tail_mass_tol=0.0)
        with pytest.raises(ValueError):
            lb.DiscretizationConfig(tail_mass_tol=1.0)
        with pytest.raises(ValueError):
            lb.DiscretizationConfig(max_terms=0)


class TestDiscretizedBound:
    def test_theta_zero_is_one(self, operating_channel):
        cfg = lb.DiscretizationConfig()
        assert lb.inverse_moment_bound(lognormal_cdf(operating_channel), 0.0, cfg) == 1.0

    def test_degenerate_at_zero_telescopes_to_one(self):
        cdf = lambda x: np.ones_like(np.asarray(x, dtype=float))
        cfg = lb.DiscretizationConfig()
        for theta in (0.5, 3.0, 20.0):
            val = lb.inverse_moment_bound(cdf, theta, cfg)
            assert val == pytest.approx(1.0, abs=1e-14)

    def test_point_mass_brackets(self):
        g = 17.3
        cdf = step_cdf([g], [1.0])
        cfg = lb.DiscretizationConfig(step_delta=1e-2)
        for theta in (0.5, 2.0, 7.0):
            val = lb.inverse_moment_bound(cdf, theta, cfg)
            exact = (1.0 + g) ** (-theta)
            upper = (1.0 + g - cfg.step_delta) ** (-theta)
            assert exact <= val <= upper + 1e-15

    def test_negative_theta_rejected(self, operating_channel):
        with pytest.raises(ValueError):
            lb.inverse_moment_bound(lognormal_cdf(operating_channel), -1.0, lb.DiscretizationConfig())

    def test_dominates_exact(self, operating_channel):
        cdf = lognormal_cdf(operating_channel)
        for delta in (1.0, 1e-1, 1e-2):
            cfg = lb.DiscretizationConfig(step_delta=delta)
            thetas = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0]
            bounds = lb.inverse_moment_bound_many(cdf, thetas, cfg)
            for theta, bound in zip(thetas, bounds):
                exact = lb.exact_inverse_moment(operating_channel, theta)
                assert bound >= exact * (1.0 - 1e-12)

    def test_monotone_refinement_halving(self, operating_channel):
        cdf = lognormal_cdf(operating_channel)
        for theta in (0.5, 2.0, 10.0):
            prev = None
            for delta in (0.04, 0.02, 0.01, 0.005):
                val = lb.inverse_moment_bound(
                    cdf, theta, lb.DiscretizationConfig(step_delta=delta)
                )
                if prev is not None:
                    assert val <= prev + 1e-12
                prev = val

    def test_truncation_monotone_in_max_terms(self, operating_channel):
        cdf = lognormal_cdf(operating_channel)
        prev = None
        for cap in (100, 1000, 10000, 100000):
            val = lb.inverse_moment_bound(
                cdf, 1.0, lb.DiscretizationConfig(step_delta=1e-2, max_terms=cap)
            )
            if prev is not None:
                assert val <= prev + 1e-15
            prev = val

    def test_range(self, operating_channel):
        cdf = lognormal_cdf(operating_channel)
        cfg = lb.DiscretizationConfig(step_delta=0.05)
        for theta in (1e-6, 0.3, 4.0, 40.0):
            val = lb.inverse_moment_bound(cdf, theta, cfg)
            assert 0.0 < val <= 1.0

    def test_refine_to_limit_matches_quadrature(self, operating_channel):
        cdf = lognormal_cdf(operating_channel)
        cfg = lb.DiscretizationConfig(step_delta=4e-2, refine_to_limit=True)
        thetas = [0.1, 0.5, 2.0, 10.0]
        vals = lb.inverse_moment_bound_many(cdf, thetas, cfg)
        for theta, val in zip(thetas, vals):
            exact = lb.exact_inverse_moment(operating_channel, theta)
            assert val == pytest.approx(exact, rel=1e-4)

    def test_non_monotone_cdf_rejected(self):
        def bad(x):
            x = np.asarray(x, dtype=float)
            return np.where(x < 1.0, 0.5, 0.2)

        with pytest.raises(lb.CdfContractError):
            lb.inverse_moment_bound(bad, 1.0, lb.DiscretizationConfig(step_delta=0.5))

    def test_out_of_range_cdf_rejected(self):
        bad = lambda x: np.full_like(np.asarray(x, dtype=float), 1.5)
        with pytest.raises(lb.CdfContractError):
            lb.inverse_moment_bound(bad, 1.0, lb.DiscretizationConfig(step_delta=0.5))

    @settings(max_examples=40, deadline=None)
    @given(
        data=st.lists(
            st.tuples(st.floats(0.0, 50.0), st.floats(0.01, 1.0)), min_size=1, max_size=5
        ),
        theta=st.floats(0.0, 20.0),
    )
    def test_dominates_exact_on_discrete_distributions(self, data, theta):
        atoms = sorted(x for x, _ in data)
        weights = np.asarray([w for _, w in data])
        probs = weights / weights.sum()
        cdf = step_cdf(atoms, np.cumsum(probs))
        exact = float(np.sum(probs * (1.0 + np.asarray(atoms)) ** (-theta)))
        cfg = lb.DiscretizationConfig(step_delta=0.05, max_terms=100000)
        val = lb.inverse_moment_bound(cdf, theta, cfg)
        assert val >= exact * (1.0 - 1e-12) - 1e-15


class TestExactInverseMoment:
    def test_theta_zero(self, operating_channel):
        assert lb.exact_inverse_moment(operating_channel, 0.0) == 1.0

    def test_point_mass(self):
        assert lb.exact_inverse_moment(lb.PointMass(4.0), 3.0) == pytest.approx(
            5.0**-3.0, rel=1e-12
        )

    def test_negative_theta_rejected(self, operating_channel):
        with pytest.raises(ValueError):
            lb.exact_inverse_moment(operating_channel, -0.1)

    def test_monte_carlo_cross_check(self, operating_channel):
        rng = np.random.default_rng(99)
        n = 10_000_000
        draws = lb.sample_snr(operating_channel, rng, n)
        log1p_draws = np.log1p(draws)
        for theta in (0.5, 2.0, 10.0):
            samples = np.exp(-theta * log1p_draws)
            mean = float(samples.mean())
            se = float(samples.std(ddof=1)) / math.sqrt(n)
            exact = lb.exact_inverse_moment(operating_channel, theta)
            assert abs(exact - mean) < 3.0 * se

    def test_generic_cdf_path_agrees_with_gaussian_path(self, operating_channel):
        class Wrapper:
            def __init__(self, chan):
                self.cdf = lambda x: lb.snr_cdf(chan, x)

        for theta in (0.5, 2.0):
            a = lb.exact_inverse_moment(operating_channel, theta)
            b = lb.exact_inverse_moment(Wrapper(operating_channel), theta)
            assert b == pytest.approx(a, rel=1e-6)

    def test_generic_pdf_path(self):
        class Expo:
            @staticmethod
            def pdf(x):
                return math.exp(-x)

        # E[(1+X)^-1] for X ~ Exp(1) is e * E1(1) = 0.59634736...
        val = lb.exact_inverse_moment(Expo(), 1.0)
        assert val == pytest.approx(0.5963473623231941, rel=1e-9)


class TestTruncationAndTable:
    def test_truncation_point_is_step_independent(self, operating_channel):
        cdf = lognormal_cdf(operating_channel)
        a = truncation_point(cdf, 2.0, lb.DiscretizationConfig(step_delta=1.0))
        b = truncation_point(cdf, 2.0, lb.DiscretizationConfig(step_delta=1e-3))
        assert a == b

    def test_with_step(self):
        cfg = with_step(lb.DiscretizationConfig(), 0.5)
        assert cfg.step_delta == 0.5

    def test_table_upper_bounds_grid_value(self, operating_channel):
        cdf = lognormal_cdf(operating_channel)
        cfg = lb.DiscretizationConfig(step_delta=1e-2)
        n = int(math.ceil(truncation_point(cdf, 0.0, cfg) / cfg.step_delta))
        table = StieltjesTable(cdf, cfg.step_delta, n, block_log_width=2e-5)
        for theta in (0.5, 1.0, 3.0):
            grid_val = lb.inverse_moment_bound(cdf, theta, cfg)
            table_val = table.bound(theta)
            exact = lb.exact_inverse_moment(operating_channel, theta)
            assert table_val >= exact
            # Within the advertised looseness of the unmerged grid value.
            assert table_val <= grid_val * (1.0 + theta * 2e-5) + 1e-15
