import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laf.model import Dataset, compose_gamma, scenario_a_config
from laf.ngp import NgpVariances, assemble_xi_system, stacked_transition
from laf.online import (
    conditional_mean,
    extract_fixed_params,
    online_update,
    one_step_errors,
    predict,
    warmstart_prior,
)
from laf.sampler import Chain, GammaAccumulator, run_gibbs, step1_update_xi, step3_update_psi, step5_update_nu
from laf.statespace import ObservationSequence, kalman_smoother
from laf.synth import ScenarioSpec, continue_generate, generate


@pytest.fixture(scope="module")
def fitted():
    data, truth = generate(ScenarioSpec.A(seed=0, T=30))
    cfg = scenario_a_config(n_iter=40, burn_in=20, thin=1, seed=0)
    chain = run_gibbs(cfg, data)
    return data, truth, cfg, chain


def _chain(draws, grid):
    return Chain(list(draws), grid, GammaAccumulator())


def test_identical_draws(fitted):
    _, _, _, chain = fitted
    d = chain.draws[-1]
    fp = extract_fixed_params(_chain([d, d, d], chain.grid))
    # means of identical values agree to rounding
    np.testing.assert_allclose(fp.theta, d.theta, rtol=1e-15)
    np.testing.assert_allclose(fp.sigma2, d.sigma2, rtol=1e-15)
    np.testing.assert_allclose(fp.xi_state_mean, d.paths.xi_states()[-1], rtol=1e-15, atol=1e-300)
    for m, c in ((fp.xi_state_mean, fp.xi_state_cov), (fp.psi_state_mean, fp.psi_state_cov)):
        assert np.abs(c).max() <= 1e-28 * max(1.0, np.abs(m).max()) ** 2


def test_two_draw_means(fitted):
    _, _, _, chain = fitted
    a, b = chain.draws[0], chain.draws[-1]
    fp = extract_fixed_params(_chain([a, b], chain.grid))
    np.testing.assert_allclose(fp.theta, (a.theta + b.theta) / 2, rtol=1e-14)
    np.testing.assert_allclose(fp.variances.sigma2_A, (a.variances.sigma2_A + b.variances.sigma2_A) / 2)
    np.testing.assert_allclose(fp.psi_path_mean, (a.paths.psi + b.paths.psi) / 2)


def _streaming_moments(rows):
    # Welford updates, divided by n
    mean = np.zeros(rows[0].size)
    m2 = np.zeros((rows[0].size,) * 2)
    for n, x in enumerate(rows, start=1):
        d = x - mean
        mean = mean + d / n
        m2 = m2 + np.outer(d, x - mean)
    return mean, m2 / len(rows)


def test_state_moments_match_streaming_oracle(fitted):
    _, _, _, chain = fitted
    fp = extract_fixed_params([_chain(chain.draws[:7], chain.grid), _chain(chain.draws[7:], chain.grid)])
    for states, mean, cov in (
        ([d.paths.xi_states()[-1] for d in chain.draws], fp.xi_state_mean, fp.xi_state_cov),
        ([d.paths.psi_states()[-1] for d in chain.draws], fp.psi_state_mean, fp.psi_state_cov),
    ):
        m, c = _streaming_moments(states)
        np.testing.assert_allclose(mean, m, rtol=0, atol=1e-12 * max(1, np.abs(m).max()))
        np.testing.assert_allclose(cov, c, rtol=0, atol=1e-12 * max(1, np.abs(c).max()))
        np.testing.assert_allclose(cov, cov.T, atol=0)
        assert np.linalg.eigvalsh(cov).min() > -1e-10 * max(1, np.abs(c).max())


def test_empty_chain_rejected(fitted):
    with pytest.raises(ValueError):
        extract_fixed_params(_chain([], fitted[3].grid))


def test_warm_prior_is_diffuse(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    cfg = dataclasses.replace(cfg, warmstart_var=7.0)
    xa, xP, pa, pP = warmstart_prior(fp, chain.grid, 3, cfg)
    assert np.all(xa == 0) and np.all(pa == 0)
    np.testing.assert_array_equal(xP, 7.0 * np.eye(3 * fp.L * fp.K))
    np.testing.assert_array_equal(pP, 7.0 * np.eye(3 * fp.K))


def test_noise_free_predictive_start(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    tiny = NgpVariances(np.full((2, 2), 1e-300), np.full((2, 2), 1e-300),
                        np.full(2, 1e-300), np.full(2, 1e-300))
    fp = dataclasses.replace(fp, variances=tiny)
    t_next = fp.grid.raw[-1] + 1.0
    grid = fp.grid.with_raw(np.array([t_next]))
    xa, xP, pa, pP = warmstart_prior(fp, grid, 0, cfg)
    delta = grid.t[0] - fp.grid.t[-1]
    Tx = stacked_transition(np.array([delta]), 4)[0][0]
    Tp = stacked_transition(np.array([delta]), 2)[0][0]
    np.testing.assert_array_equal(xa, Tx @ fp.xi_state_mean)
    np.testing.assert_array_equal(pa, Tp @ fp.psi_state_mean)
    np.testing.assert_allclose(xP, Tx @ fp.xi_state_cov @ Tx.T, atol=1e-12)


def test_zero_noise_prediction_extrapolates_linearly(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    tiny = NgpVariances(np.full((2, 2), 1e-300), np.full((2, 2), 1e-300),
                        np.full(2, 1e-300), np.full(2, 1e-300))
    fp = dataclasses.replace(fp, variances=tiny, xi_state_cov=np.zeros_like(fp.xi_state_cov),
                             psi_state_cov=np.zeros_like(fp.psi_state_cov))
    pred = predict(fp, data, 3, k=0, cfg=cfg, rng=np.random.default_rng(1), n_iter=5, burn_in=0)
    grid = fp.grid.with_raw(pred.times)
    deltas = np.diff(np.r_[fp.grid.t[-1], grid.t])
    xs, ps = fp.xi_state_mean, fp.psi_state_mean
    for h in range(3):
        Tx = stacked_transition(deltas[h:h + 1], 4)[0][0]
        Tp = stacked_transition(deltas[h:h + 1], 2)[0][0]
        xs, ps = Tx @ xs, Tp @ ps
        xi = xs[:4].reshape(2, 2, order="F")
        g = compose_gamma(fp.theta, xi[None], ps[None, :2], fp.sigma2)
        for draw_mu in pred.mu_draws[:, h]:
            np.testing.assert_allclose(draw_mu, g.mu[0], rtol=1e-8, atol=1e-10)


def test_zero_horizon_covers_warm_window(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    res = online_update(fp, None, data, 4, cfg, np.random.default_rng(0), n_iter=3, burn_in=1)
    assert res.window.T == 4 and res.new_slice == slice(4, 4)
    np.testing.assert_allclose(res.chain.grid.t, chain.grid.t[-4:], rtol=1e-14)
    assert res.chain.gamma.mean.sigma.shape == (4, 5, 5)


def _batch_fixed_chain(draw, data, cfg, grid, rng, n_iter):
    out = []
    for _ in range(n_iter):
        draw = step1_update_xi(draw, data, cfg, rng, grid)
        draw = step3_update_psi(draw, data, cfg, rng, grid)
        draw = step5_update_nu(draw, data, cfg, rng)
        out.append(draw)
    return out


def test_full_warm_start_matches_batch_smoother(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    start = chain.draws[-1].replace(loadings=chain.draws[-1].loadings, sigma2=fp.sigma2,
                                    variances=fp.variances)
    start = start.replace(loadings=dataclasses.replace(start.loadings, theta=fp.theta))
    # smoother means of the xi system under both initial priors
    xa, xP, _, _ = warmstart_prior(fp, chain.grid, data.T, cfg)
    obs = ObservationSequence(data.filled(0.0), data.mask)
    args = (fp.theta, start.factors.eta, chain.grid, fp.variances, fp.sigma2)
    m_batch = kalman_smoother(assemble_xi_system(*args), obs).smoothed_mean
    m_warm = kalman_smoother(assemble_xi_system(*args, a1=xa, P1=xP), obs).smoothed_mean
    np.testing.assert_allclose(m_warm, m_batch, rtol=1e-8, atol=1e-10)
    # end to end with identical seeds
    res = online_update(fp, None, data, data.T, cfg, np.random.default_rng(9),
                        n_iter=4, burn_in=0, init=start)
    ref = _batch_fixed_chain(start, data, cfg, chain.grid, np.random.default_rng(9), 4)
    for a, b in zip(res.chain.draws, ref):
        np.testing.assert_allclose(a.paths.xi, b.paths.xi, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(a.paths.psi, b.paths.psi, rtol=1e-8, atol=1e-10)


def test_dimension_mismatch(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    bad = Dataset.from_array([100.0], np.zeros((1, 3)))
    with pytest.raises(ValueError):
        online_update(fp, bad, data, 2, cfg, n_iter=2, burn_in=0)


def test_new_times_must_follow_sample(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    early = Dataset.from_array([data.times[-1]], np.zeros((1, 5)))
    with pytest.raises(ValueError):
        online_update(fp, early, data, 0, cfg, n_iter=2, burn_in=0)


def _oracle_conditional(mu, sigma, y, j):
    prec = np.linalg.inv(sigma)
    rest = np.arange(mu.size) != j
    return mu[j] - prec[j, rest] @ (y[rest] - mu[rest]) / prec[j, j]


@settings(max_examples=50)
@given(seed=st.integers(0, 10**6), j=st.integers(0, 3))
def test_conditional_mean_oracle(seed, j):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4))
    sigma = A @ A.T + 0.5 * np.eye(4)
    mu, y = rng.normal(size=4), rng.normal(size=4)
    assert conditional_mean(mu, sigma, y, j) == pytest.approx(_oracle_conditional(mu, sigma, y, j),
                                                              rel=1e-10, abs=1e-10)


def test_prediction_shapes(fitted):
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    pred = predict(fp, data, 2, k=3, cfg=cfg, rng=np.random.default_rng(0), n_iter=6, burn_in=2)
    assert pred.y_draws.shape == (4, 2, 5) and pred.sigma_mean.shape == (2, 5, 5)
    np.testing.assert_array_equal(pred.times, data.times[-1] + np.array([1.0, 2.0]))
    lo, hi = pred.intervals(0.9)
    assert lo.shape == (2, 5) and np.all(lo <= hi)


def test_error_harness_format(fitted):
    data, truth, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    new, _ = continue_generate(truth, 2, np.random.default_rng(3))
    y = new.y.copy()
    y[1, 2] = np.nan
    new = Dataset.from_array(new.times, y)
    errs = one_step_errors(fp, data, new, 3, cfg, np.random.default_rng(0), n_iter=4, burn_in=1)
    assert sorted(errs) == ["a", "b", "c"]
    for e in errs.values():
        assert e.shape == (2, 5)
        assert np.isnan(e[1, 2]) and np.isfinite(np.delete(e.ravel(), 7)).all()
    np.testing.assert_array_equal(errs["a"][0], new.y[0])
    with pytest.raises(ValueError):
        one_step_errors(fp, data, new, 0, cfg)


def test_masked_future_adds_no_likelihood(fitted):
    from laf.sampler import _data_loglik
    from laf.statespace import kalman_filter
    data, _, cfg, chain = fitted
    fp = extract_fixed_params(chain)
    pred = predict(fp, data, 3, k=5, cfg=cfg, rng=np.random.default_rng(2), n_iter=3, burn_in=0)
    res = pred.result
    win = res.window
    assert not win.mask[-3:].any()
    d = res.chain.draws[-1]
    obs = ObservationSequence(win.filled(0.0), win.mask)
    xa, xP, _, _ = warmstart_prior(fp, res.chain.grid, 5, cfg)
    sys = assemble_xi_system(fp.theta, d.factors.eta, res.chain.grid, fp.variances, fp.sigma2,
                             a1=xa, P1=xP)
    np.testing.assert_array_equal(kalman_filter(sys, obs).loglik_terms[-3:], 0.0)
    g = compose_gamma(d.theta, d.paths.xi, d.paths.psi, d.sigma2)
    past = win.subset(np.arange(win.T - 3))
    g_past = compose_gamma(d.theta, d.paths.xi[:-3], d.paths.psi[:-3], d.sigma2)
    assert _data_loglik(g, win) == _data_loglik(g_past, past)
