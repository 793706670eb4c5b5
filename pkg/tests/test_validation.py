"""Predictive-check tests.

The chi-square survival function is cross-checked against direct
numerical integration of the density (written out with `math.gamma`, not
the incomplete-gamma routine the module uses), and the two p_B estimators
are required to agree within Monte Carlo error on a real calibration.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from thermocal.errors import DomainError
from thermocal.rng import DOMAIN_REPLICATE, substream
from thermocal.validation import (
    MIN_DRAWS,
    PosteriorSample,
    chi2_discrepancy,
    chi2_survival,
    conditional_pvalue,
    p_b_expectation,
    p_b_replicate,
    propagate,
    qoi_quantiles,
    validate_model,
)

# P(chi2_30 > 30), frozen from the quadrature oracle below
CHI2_30_AT_MEAN = 0.46565370894400965


def chi2_pdf(x, k):
    return x ** (0.5 * k - 1.0) * math.exp(-0.5 * x) / (
        2.0 ** (0.5 * k) * math.gamma(0.5 * k))


def make_sample(m=200, t=30, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    thetas = np.column_stack([rng.uniform(0, 1, m), rng.uniform(0, 100, m),
                              rng.uniform(0, 100, m)])
    lambda2s = rng.uniform(1.0, 3.0, m)
    preds = 150.0 + spread * rng.normal(size=(m, t))
    return PosteriorSample(thetas, lambda2s, preds)


# ---------------------------------------------------------------------------
# chi-square machinery


def test_chi2_survival_against_quadrature():
    # integrate the lower tail on the finite interval; the complement is
    # better conditioned for quad than the semi-infinite upper tail
    for x2, dof in ((30.0, 30), (12.5, 30), (45.0, 30), (3.0, 5), (8.0, 12)):
        lower, err = quad(chi2_pdf, 0.0, x2, args=(dof,), epsabs=1e-12, epsrel=1e-12)
        assert err < 1e-10
        assert chi2_survival(x2, dof) == pytest.approx(1.0 - lower, abs=1e-8)


def test_chi2_survival_frozen_anchor():
    assert chi2_survival(30.0, 30) == pytest.approx(CHI2_30_AT_MEAN, rel=1e-13)


def test_chi2_survival_is_one_at_zero_and_decreasing():
    assert chi2_survival(0.0, 30) == 1.0
    xs = np.linspace(0.0, 80.0, 41)
    vals = [chi2_survival(x, 30) for x in xs]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_chi2_survival_validation():
    with pytest.raises(DomainError, match="degrees of freedom"):
        chi2_survival(10.0, 0)
    with pytest.raises(DomainError, match="discrepancy"):
        chi2_survival(-1.0, 30)


def test_chi2_discrepancy_is_standardized_ss():
    z = np.array([1.0, 2.0, 3.0])
    pred = np.array([0.0, 0.0, 0.0])
    assert chi2_discrepancy(z, pred, 2.0) == pytest.approx(7.0, rel=1e-14)
    with pytest.raises(DomainError, match="lambda2"):
        chi2_discrepancy(z, pred, 0.0)
    with pytest.raises(DomainError, match="matching"):
        chi2_discrepancy(z, pred[:2], 1.0)


def test_conditional_pvalue_composes_both_pieces():
    rng = np.random.default_rng(1)
    z = rng.normal(size=30)
    pred = np.zeros(30)
    expected = chi2_survival(chi2_discrepancy(z, pred, 1.5), 30)
    assert conditional_pvalue(z, pred, 1.5) == expected


# ---------------------------------------------------------------------------
# quantiles


def test_qoi_quantiles_constant_sample():
    out = qoi_quantiles(np.full(50, 7.0), [0.025, 0.5, 0.975])
    assert out.tolist() == [7.0, 7.0, 7.0]


def test_qoi_quantiles_median_interpolates():
    # 1..100 has no middle entry; linear interpolation gives 50.5
    assert qoi_quantiles(np.arange(1.0, 101.0), 0.5)[0] == 50.5


def test_qoi_quantiles_uniform_tail():
    draws = np.random.default_rng(2).uniform(size=100_000)
    assert qoi_quantiles(draws, 0.975)[0] == pytest.approx(0.975, abs=0.005)


def test_qoi_quantiles_validation():
    with pytest.raises(DomainError, match="probabilities"):
        qoi_quantiles([1.0, 2.0], [1.5])
    with pytest.raises(DomainError, match="non-empty"):
        qoi_quantiles([], [0.5])


# ---------------------------------------------------------------------------
# p_B estimators


def test_p_b_expectation_identical_draws_has_zero_se():
    pred = np.full(30, 150.0)
    sample = PosteriorSample(np.tile([0.5, 50.0, 50.0], (120, 1)),
                             np.full(120, 2.0), np.tile(pred, (120, 1)))
    z = pred + 0.7
    est, se, pvals = p_b_expectation(z, sample)
    assert np.all(pvals == pvals[0])
    assert se == pytest.approx(0.0, abs=1e-15)  # constant column, mean rounding only
    assert est == pytest.approx(conditional_pvalue(z, pred, 2.0), rel=1e-14)


def test_p_b_expectation_matches_per_draw_mean():
    sample = make_sample(m=150, seed=3)
    z = 150.0 + np.random.default_rng(4).normal(size=30)
    est, se, pvals = p_b_expectation(z, sample)
    manual = np.array([conditional_pvalue(z, sample.predictions[m], sample.lambda2s[m])
                       for m in range(sample.m)])
    assert np.allclose(pvals, manual, rtol=1e-13)
    assert est == pytest.approx(manual.mean(), rel=1e-13)
    assert se == pytest.approx(manual.std(ddof=1) / math.sqrt(150), rel=1e-12)


def test_p_b_replicate_perfect_fit_gives_one():
    sample = make_sample(m=150, seed=5)
    z = sample.predictions[0].copy()
    sample.predictions[:] = z  # every draw predicts the data exactly
    res = p_b_replicate(z, sample, seed=1)
    assert res.estimate == 1.0
    assert np.all(res.realized == 0.0)
    assert res.se == 0.0


def test_p_b_replicate_matches_documented_construction():
    sample = make_sample(m=140, seed=6)
    z = 150.0 + np.random.default_rng(7).normal(size=30)
    res = p_b_replicate(z, sample, seed=42)
    rng = substream(42, DOMAIN_REPLICATE)
    noise = rng.standard_normal(sample.predictions.shape)
    z_rep = sample.predictions + np.sqrt(sample.lambda2s)[:, None] * noise
    rep = np.sum((z_rep - sample.predictions) ** 2, axis=1) / sample.lambda2s
    real = np.sum((z - sample.predictions) ** 2, axis=1) / sample.lambda2s
    expected = float(np.mean(rep > real))
    assert res.estimate == expected
    assert res.se == pytest.approx(math.sqrt(expected * (1 - expected) / 140), rel=1e-12)
    assert np.allclose(res.replicated, rep, rtol=1e-12)


def test_p_b_replicate_is_seed_deterministic():
    sample = make_sample(m=120, seed=8)
    z = 150.0 + np.random.default_rng(9).normal(size=30)
    a = p_b_replicate(z, sample, seed=3)
    b = p_b_replicate(z, sample, seed=3)
    c = p_b_replicate(z, sample, seed=4)
    assert a.estimate == b.estimate
    assert np.array_equal(a.replicated, b.replicated)
    assert not np.array_equal(a.replicated, c.replicated)


def test_p_values_refuse_small_samples():
    sample = make_sample(m=MIN_DRAWS - 1, seed=10)
    z = np.full(30, 150.0)
    with pytest.raises(DomainError, match="at least 100"):
        p_b_expectation(z, sample)
    with pytest.raises(DomainError, match="at least 100"):
        p_b_replicate(z, sample)


def test_p_values_need_predictions():
    sample = PosteriorSample(np.tile([0.5, 50.0, 50.0], (120, 1)), np.full(120, 2.0))
    with pytest.raises(DomainError, match="predictions"):
        p_b_expectation(np.zeros(30), sample)


def test_estimators_agree_on_a_real_calibration(study_chain, measurements):
    _, chain = study_chain
    _, z = measurements
    sample = PosteriorSample.from_chain(chain)
    est1, se1, _ = p_b_expectation(z, sample)
    rep = p_b_replicate(z, sample, seed=0)
    assert abs(est1 - rep.estimate) <= 3.0 * (se1 + rep.se)


# ---------------------------------------------------------------------------
# propagation


def test_propagate_reuses_stored_predictions():
    sample = make_sample(m=50, seed=11)

    def exploding_predictor(theta):
        raise AssertionError("simulator must not run when predictions are stored")

    ens = propagate(sample, predictor=exploding_predictor)
    assert ens.series is sample.predictions
    assert np.allclose(ens.qoi, sample.predictions.mean(axis=1), rtol=1e-14)
    assert np.allclose(ens.mean_trajectory, sample.predictions.mean(axis=0), rtol=1e-14)


def test_propagate_single_draw():
    sample = PosteriorSample(np.array([[0.5, 50.0, 50.0]]), np.array([2.0]),
                             np.arange(30.0)[None, :])
    ens = propagate(sample)
    assert ens.series.shape == (1, 30)
    assert ens.qoi[0] == pytest.approx(np.arange(30.0).mean())
    assert np.array_equal(ens.mean_trajectory, np.arange(30.0))


def test_propagate_identical_draws_are_degenerate():
    pred = np.linspace(100.0, 200.0, 30)
    sample = PosteriorSample(np.tile([0.5, 50.0, 50.0], (20, 1)),
                             np.full(20, 2.0), np.tile(pred, (20, 1)))
    ens = propagate(sample)
    assert np.all(ens.qoi == ens.qoi[0])
    assert np.allclose(ens.mean_trajectory, pred, rtol=1e-14)


def test_propagate_falls_back_to_the_predictor():
    thetas = np.column_stack([np.linspace(0.1, 0.9, 5), np.full(5, 10.0), np.full(5, 5.0)])
    sample = PosteriorSample(thetas, np.full(5, 1.0))
    ens = propagate(sample, predictor=lambda th: np.full(4, 100.0 * th[0]))
    assert ens.series.shape == (5, 4)
    assert np.allclose(ens.qoi, 100.0 * thetas[:, 0], rtol=1e-14)


def test_propagate_reports_the_failing_draw():
    thetas = np.tile([0.5, 50.0, 50.0], (5, 1))
    sample = PosteriorSample(thetas, np.full(5, 1.0))
    calls = {"n": 0}

    def predictor(theta):
        if calls["n"] == 3:
            raise ValueError("boom")
        calls["n"] += 1
        return np.zeros(4)

    with pytest.raises(DomainError, match="draw 3"):
        propagate(sample, predictor=predictor)
    with pytest.raises(DomainError, match="predictor"):
        propagate(PosteriorSample(thetas, np.full(5, 1.0)))


# ---------------------------------------------------------------------------
# assembled report


def test_validate_model_report_contents():
    sample = make_sample(m=300, seed=12, spread=2.0)
    z = sample.predictions[7] + np.random.default_rng(13).normal(
        scale=np.sqrt(sample.lambda2s[7]), size=30)
    report = validate_model(z, sample, alpha=0.05, seed=0)
    d = report.as_dict()
    assert set(d["qoi_quantiles"]) == {"0.025", "0.5", "0.975"}
    assert d["qoi_quantiles"]["0.025"] <= d["qoi_quantiles"]["0.5"] <= d["qoi_quantiles"]["0.975"]
    assert d["n_draws"] == 300 and d["n_obs"] == 30
    assert report.reject_h0 == (report.p_b_expectation <= 0.05)
    assert d["qoi_mean_power_w"] == pytest.approx(sample.predictions.mean(), rel=1e-12)
    est1, se1, _ = p_b_expectation(z, sample)
    assert report.p_b_expectation == est1 and report.se_expectation == se1


def test_validate_model_rejects_on_gross_misfit():
    sample = make_sample(m=200, seed=14, spread=0.5)
    z = sample.predictions.mean(axis=0) + 40.0  # ~25 sd away per block
    report = validate_model(z, sample)
    assert report.p_b_expectation <= 0.05
    assert report.reject_h0


def test_validate_model_alpha_validation():
    sample = make_sample(m=120, seed=15)
    with pytest.raises(DomainError, match="alpha"):
        validate_model(np.full(30, 150.0), sample, alpha=0.0)


def test_posterior_sample_validation():
    with pytest.raises(DomainError, match="thetas"):
        PosteriorSample(np.zeros((5, 2)), np.ones(5))
    with pytest.raises(DomainError, match="lambda2s"):
        PosteriorSample(np.zeros((5, 3)), np.ones(4))
    with pytest.raises(DomainError, match="finite"):
        PosteriorSample(np.zeros((5, 3)), np.array([1.0, 1.0, -1.0, 1.0, 1.0]))
    with pytest.raises(DomainError, match="predictions"):
        PosteriorSample(np.zeros((5, 3)), np.ones(5), np.zeros((4, 30)))
