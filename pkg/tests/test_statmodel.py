"""Likelihood, prior, and cached-posterior tests.

Closed-form expectations are spelled out inline (the Gaussian
log-density and the box/variance prior have short exact forms), and the
cached model is cross-checked against the one-shot evaluation path.
"""

import math
import threading

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from thermocal.errors import DomainError
from thermocal.statmodel import (
    LOG_2PI,
    MeasurementSeries,
    NuisanceParams,
    PosteriorModel,
    PriorSpec,
    log_likelihood,
    log_posterior_unnormalized,
    log_prior,
    sum_squares,
)
from thermocal.thermal import block_average, simulate

THETA0 = np.array([0.175, 10.0, 5.0])
LAMBDA2_0 = 2.25


@pytest.fixture(scope="module")
def model(measurements, forcing, geometry):
    _, z = measurements
    return PosteriorModel(z, forcing, geometry)


# ---------------------------------------------------------------------------
# sum of squares


def test_sum_squares_zero_at_perfect_fit():
    y = np.linspace(100.0, 200.0, 30)
    assert sum_squares(y, y) == 0.0


def test_sum_squares_unit_offsets():
    y = np.linspace(100.0, 200.0, 30)
    assert sum_squares(y + 1.0, y) == pytest.approx(30.0, rel=1e-12)


def test_sum_squares_small_example():
    assert sum_squares([2.0, 3.0], [0.0, 0.0]) == 13.0


def test_sum_squares_permutation_invariant():
    rng = np.random.default_rng(0)
    z = rng.normal(size=30)
    y = rng.normal(size=30)
    perm = rng.permutation(30)
    assert sum_squares(z[perm], y[perm]) == pytest.approx(sum_squares(z, y), rel=1e-15)


def test_sum_squares_rejects_mismatched_lengths():
    with pytest.raises(DomainError, match="mismatch"):
        sum_squares([1.0, 2.0], [1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# log likelihood


def test_log_likelihood_perfect_fit_unit_variance():
    y = np.full(30, 150.0)
    assert log_likelihood(y, y, 1.0) == pytest.approx(-15.0 * LOG_2PI, rel=1e-14)


def test_log_likelihood_at_ss_equal_2_lambda2_t():
    # SS = 2 lambda2 T makes the quadratic term exactly -T
    t, lam2 = 30, 4.0
    z = np.zeros(t)
    y = np.full(t, math.sqrt(2.0 * lam2))  # SS = 2 lam2 t
    expected = -0.5 * t * (LOG_2PI + math.log(lam2)) - t
    assert log_likelihood(z, y, lam2) == pytest.approx(expected, rel=1e-14)


def test_log_likelihood_variance_doubling_at_zero_ss():
    y = np.full(30, 150.0)
    drop = log_likelihood(y, y, 2.0) - log_likelihood(y, y, 1.0)
    assert drop == pytest.approx(-15.0 * math.log(2.0), rel=1e-14)


def test_log_likelihood_accepts_nuisance_wrapper():
    y = np.full(30, 150.0)
    assert log_likelihood(y, y, NuisanceParams(lambda2=3.0)) == log_likelihood(y, y, 3.0)


def test_log_likelihood_rejects_nonpositive_variance():
    y = np.zeros(5)
    with pytest.raises(DomainError, match="lambda2"):
        log_likelihood(y, y, 0.0)
    with pytest.raises(DomainError, match="lambda2"):
        log_likelihood(y, y, -1.0)


def test_profile_variance_argmax_is_mean_square_residual():
    rng = np.random.default_rng(1)
    z = rng.normal(size=30)
    y = np.zeros(30)
    ss = sum_squares(z, y)
    res = minimize_scalar(lambda lam2: -log_likelihood(z, y, lam2),
                          bounds=(1e-6, 50.0), method="bounded",
                          options={"xatol": 1e-12})
    assert res.x == pytest.approx(ss / 30.0, rel=1e-6)


# ---------------------------------------------------------------------------
# prior


def test_log_prior_box_normalization():
    # default box has volume 1 * 100 * 100
    assert log_prior(THETA0, 1.0) == pytest.approx(-math.log(1e4), rel=1e-14)


def test_log_prior_outside_box_is_minus_inf():
    assert log_prior([1.2, 10.0, 5.0], 1.0) == -math.inf
    assert log_prior([0.5, -0.1, 5.0], 1.0) == -math.inf
    assert log_prior([0.5, 10.0, 100.5], 1.0) == -math.inf


def test_log_prior_variance_term_is_reciprocal():
    for k in (0.5, 2.0, 7.0):
        diff = log_prior(THETA0, k) - log_prior(THETA0, 1.0)
        assert diff == pytest.approx(-math.log(k), rel=1e-12)


def test_log_prior_nonpositive_variance_is_minus_inf():
    assert log_prior(THETA0, 0.0) == -math.inf
    assert log_prior(THETA0, -2.0) == -math.inf


def test_prior_spec_validation():
    with pytest.raises(DomainError, match="strictly below"):
        PriorSpec(theta_lower=[0.0, 0.0, 5.0], theta_upper=[1.0, 100.0, 5.0])
    with pytest.raises(DomainError, match="variance prior"):
        PriorSpec(variance_prior="flat")
    spec = PriorSpec()
    assert spec.midpoint().tolist() == [0.5, 50.0, 50.0]
    assert spec.log_box_measure == pytest.approx(math.log(1e4))


# ---------------------------------------------------------------------------
# one-shot posterior


def test_log_posterior_matches_manual_composition(forcing, geometry, measurements):
    _, z = measurements
    lp = log_posterior_unnormalized(THETA0, LAMBDA2_0, z, forcing, geometry)
    pred = simulate(THETA0, 0.0, forcing, geometry)
    y = block_average(pred.powers, 30)
    manual = log_prior(THETA0, LAMBDA2_0) + log_likelihood(z, y, LAMBDA2_0)
    assert lp == pytest.approx(manual, rel=1e-14)


def test_log_posterior_out_of_support_is_minus_inf(forcing, geometry, measurements):
    _, z = measurements
    assert log_posterior_unnormalized([2.0, 10.0, 5.0], 1.0, z, forcing, geometry) == -math.inf


# ---------------------------------------------------------------------------
# cached model


def test_model_defaults(model):
    assert model.n_obs == 30
    assert model.init_theta().tolist() == [0.5, 50.0, 50.0]
    assert model.default_scales().tolist() == [0.05, 5.0, 5.0]
    assert model.in_support(THETA0)
    assert not model.in_support([0.5, 101.0, 5.0])


def test_model_evaluate_matches_one_shot(model, forcing, geometry, measurements):
    _, z = measurements
    lp, y = model.evaluate(THETA0, LAMBDA2_0)
    assert y is not None and y.shape == (30,)
    assert lp == pytest.approx(
        log_posterior_unnormalized(THETA0, LAMBDA2_0, z, forcing, geometry), rel=1e-14)


def test_model_out_of_support_skips_the_simulator(model):
    before = model.simulation_count
    lp, y = model.evaluate([-0.2, 10.0, 5.0], 1.0)
    assert lp == -math.inf and y is None
    lp, y = model.evaluate(THETA0, -1.0)
    assert lp == -math.inf and y is None
    assert model.simulation_count == before


def test_model_caches_predictions(measurements, forcing, geometry):
    _, z = measurements
    m = PosteriorModel(z, forcing, geometry)
    theta = np.array([0.3, 20.0, 4.0])
    y1 = m.prediction(theta)
    y2 = m.prediction(theta)
    assert m.simulation_count == 1
    assert m.cache_size == 1
    assert y1 is y2  # memoized array is shared, not recomputed
    m.prediction(np.array([0.4, 20.0, 4.0]))
    assert m.simulation_count == 2


def test_model_likelihood_drop_of_five(model):
    # push theta2 until SS grows by exactly 10 lambda2: log posterior drops by 5
    ss0 = model.sum_squares(THETA0)
    target = ss0 + 10.0 * LAMBDA2_0

    def gap(t2):
        return model.sum_squares([THETA0[0], t2, THETA0[2]]) - target

    assert gap(THETA0[1]) < 0 < gap(100.0)
    t2_star = brentq(gap, THETA0[1], 100.0, xtol=1e-10)
    lp0, _ = model.evaluate(THETA0, LAMBDA2_0)
    lp1, _ = model.evaluate([THETA0[0], t2_star, THETA0[2]], LAMBDA2_0)
    assert lp0 - lp1 == pytest.approx(5.0, abs=1e-6)


def test_model_prediction_thread_safety(measurements, forcing, geometry):
    _, z = measurements
    m = PosteriorModel(z, forcing, geometry)
    theta = np.array([0.25, 15.0, 6.0])
    results = [None] * 8

    def worker(i):
        results[i] = m.prediction(theta)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    # racing evaluations may duplicate the simulation but never disagree
    for r in results[1:]:
        assert np.array_equal(r, results[0])
    assert m.cache_size == 1


def test_model_rejects_wrong_block_count(measurements, forcing, geometry):
    _, z = measurements
    with pytest.raises(DomainError, match="block_count"):
        PosteriorModel(z, forcing, geometry, block_count=29)


# ---------------------------------------------------------------------------
# measurement container


def test_measurement_series_validation():
    with pytest.raises(DomainError, match="index 2"):
        MeasurementSeries(values=[1.0, 2.0, float("nan")])
    with pytest.raises(DomainError, match="length"):
        MeasurementSeries(values=[1.0, 2.0], timestamps=[0.0])
    ms = MeasurementSeries(values=[1.0, 2.0, 3.0])
    assert len(ms) == 3
    assert np.asarray(ms).tolist() == [1.0, 2.0, 3.0]
