"""Numerical kernel: expit, chi-square tails, MVN sampling, logistic solver."""

import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given, settings, strategies as st

from mdgof.numerics import (DesignMatrix, chisq_sf, chisq_sf_real, child_rng,
                            expit, fit_weighted_logistic, sample_mvn,
                            weighted_bernoulli_loglik)

from oracles import chisq_sf_quadrature, grid_search_logistic


class TestExpit:
    def test_midpoint(self):
        assert expit(0.0) == 0.5

    def test_symmetry(self):
        x = np.linspace(-20, 20, 101)
        assert np.allclose(expit(x) + expit(-x), 1.0)

    def test_matches_scipy(self):
        x = np.linspace(-700, 700, 201)
        assert np.allclose(expit(x), scipy.special.expit(x))

    def test_extreme_arguments_finite(self):
        assert expit(-1000.0) == 0.0
        assert expit(1000.0) == 1.0


class TestChisqTail:
    def test_against_scipy(self):
        for df in (1, 2, 3, 7):
            for x in (0.1, 1.0, 3.84, 15.0):
                assert chisq_sf(x, df) == pytest.approx(
                    scipy.stats.chi2.sf(x, df), abs=1e-12)

    def test_against_quadrature_at_critical_point(self):
        # The 0.95 quantile of chi-square with one degree of freedom.
        x = 3.841458820694124
        assert abs(chisq_sf(x, 1) - chisq_sf_quadrature(x, 1)) <= 1e-4
        assert chisq_sf(x, 1) == pytest.approx(0.05, abs=1e-9)

    def test_fractional_df(self):
        assert chisq_sf_real(2.5, 1.7) == pytest.approx(
            scipy.stats.chi2.sf(2.5, 1.7), abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            chisq_sf(1.0, 0)
        with pytest.raises(ValueError):
            chisq_sf(1.0, 1.5)
        with pytest.raises(ValueError):
            chisq_sf(-1.0, 1)
        with pytest.raises(ValueError):
            chisq_sf_real(1.0, 0.0)


class TestSampleMvn:
    def test_moments(self):
        rng = np.random.default_rng(3)
        cov = np.array([[1.0, 0.75], [0.75, 1.0]])
        draws = sample_mvn(200_000, np.zeros(2), cov, rng)
        assert np.allclose(draws.mean(axis=0), 0.0, atol=0.02)
        assert np.allclose(np.cov(draws.T), cov, atol=0.02)

    def test_singular_covariance_constant(self):
        rng = np.random.default_rng(0)
        draws = sample_mvn(100, np.array([2.0]), np.array([[0.0]]), rng)
        assert np.allclose(draws, 2.0)

    def test_non_psd_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(np.linalg.LinAlgError):
            sample_mvn(10, np.zeros(2),
                       np.array([[1.0, 2.0], [2.0, 1.0]]), rng)

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_mvn(10, np.zeros(2), np.eye(3), rng)


class TestChildRng:
    def test_deterministic(self):
        a = child_rng(7, 3).random(5)
        b = child_rng(7, 3).random(5)
        assert np.array_equal(a, b)

    def test_streams_distinct(self):
        a = child_rng(7, 3).random(5)
        b = child_rng(7, 4).random(5)
        assert not np.array_equal(a, b)


def _logistic_data(rng, n, beta):
    x = np.column_stack([np.ones(n), rng.normal(size=(n, len(beta) - 1))])
    y = (rng.random(n) < expit(x @ beta)).astype(float)
    return x, y


class TestWeightedLogistic:
    def test_recovers_coefficients(self):
        rng = np.random.default_rng(11)
        beta = np.array([0.4, -0.9, 1.2])
        x, y = _logistic_data(rng, 200_000, beta)
        fit = fit_weighted_logistic(DesignMatrix(("c", "a", "b"), x), y)
        assert fit.converged
        assert np.allclose(fit.coefficients, beta, atol=0.03)

    def test_matches_grid_search_oracle(self):
        rng = np.random.default_rng(5)
        beta = np.array([0.3, -0.8])
        x, y = _logistic_data(rng, 60, beta)
        w = rng.uniform(0.5, 2.0, size=60)
        fit = fit_weighted_logistic(DesignMatrix(("c", "a"), x), y, w)
        assert fit.converged
        oracle = grid_search_logistic(x, y, w)
        assert np.max(np.abs(fit.coefficients - oracle)) <= 1e-4

    def test_score_equation_satisfied(self):
        rng = np.random.default_rng(2)
        x, y = _logistic_data(rng, 500, np.array([0.1, 0.7]))
        w = rng.uniform(0.1, 3.0, size=500)
        fit = fit_weighted_logistic(DesignMatrix(("c", "a"), x), y, w)
        score = x.T @ (w * (y - expit(x @ fit.coefficients)))
        assert np.max(np.abs(score)) < 1e-8 * w.sum()

    def test_one_class_outcome_flagged(self):
        x = np.column_stack([np.ones(20), np.arange(20.0)])
        fit = fit_weighted_logistic(DesignMatrix(("c", "a"), x), np.ones(20))
        assert not fit.converged
        assert "degenerate" in fit.message

    def test_complete_separation_flagged(self):
        x = np.column_stack([np.ones(40), np.linspace(-2, 2, 40)])
        y = (x[:, 1] > 0).astype(float)
        fit = fit_weighted_logistic(DesignMatrix(("c", "a"), x), y)
        assert not fit.converged

    def test_negative_weights_rejected(self):
        x = np.ones((4, 1))
        with pytest.raises(ValueError):
            fit_weighted_logistic(DesignMatrix(("c",), x),
                                  np.array([0, 1, 0, 1]),
                                  np.array([1.0, -1.0, 1.0, 1.0]))

    def test_non_binary_outcome_rejected(self):
        x = np.ones((3, 1))
        with pytest.raises(ValueError):
            fit_weighted_logistic(DesignMatrix(("c",), x),
                                  np.array([0.0, 0.5, 1.0]))

    def test_warm_start_agrees(self):
        rng = np.random.default_rng(9)
        x, y = _logistic_data(rng, 2000, np.array([0.2, -0.5, 0.9]))
        design = DesignMatrix(("c", "a", "b"), x)
        cold = fit_weighted_logistic(design, y)
        warm = fit_weighted_logistic(design, y, start=cold.coefficients)
        assert warm.converged
        assert warm.iterations <= cold.iterations
        assert np.allclose(warm.coefficients, cold.coefficients, atol=1e-7)

    def test_intercept_only_closed_form(self):
        y = np.array([1.0] * 30 + [0.0] * 10)
        fit = fit_weighted_logistic(DesignMatrix(("c",), np.ones((40, 1))), y)
        assert fit.coefficients[0] == pytest.approx(np.log(3.0), abs=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 20.0))
    def test_weight_homogeneity(self, seed, scale):
        """Rescaling all weights by a constant must not move the maximizer."""
        rng = np.random.default_rng(seed)
        x, y = _logistic_data(rng, 300, np.array([0.0, 0.6]))
        w = rng.uniform(0.2, 2.0, size=300)
        design = DesignMatrix(("c", "a"), x)
        base = fit_weighted_logistic(design, y, w)
        scaled = fit_weighted_logistic(design, y, scale * w)
        assert base.converged and scaled.converged
        assert np.allclose(base.coefficients, scaled.coefficients, atol=1e-5)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        x, y = _logistic_data(rng, 400, np.array([0.3, -0.7, 0.5]))
        w = rng.uniform(0.3, 2.0, size=400)
        beta = rng.normal(scale=0.5, size=3)
        analytic = x.T @ (w * (y - expit(x @ beta)))
        h = 1e-6
        numeric = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            numeric[i] = (weighted_bernoulli_loglik(beta + e, x, y, w)
                          - weighted_bernoulli_loglik(beta - e, x, y, w)) / (2 * h)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic), 1.0)
        assert np.max(rel) <= 1e-4
