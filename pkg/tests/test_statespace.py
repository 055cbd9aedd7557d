import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laf.statespace import (
    NumericalError,
    ObservationSequence,
    StateSpaceSystem,
    kalman_filter,
    kalman_smoother,
    simulate,
    simulation_smoother,
)
from oracles import joint_gaussian_posterior, random_system


def local_level(n, H=1.0, Q=1.0, P1=1.0):
    return StateSpaceSystem(n, np.eye(1), np.eye(1) * H, np.eye(1), np.eye(1),
                            np.eye(1) * Q, np.zeros(1), np.eye(1) * P1).validate()


def test_zero_obs_noise_pins_state():
    sys = StateSpaceSystem(1, np.eye(1), np.zeros((1, 1)), np.eye(1), np.eye(1),
                           np.zeros((1, 1)), np.zeros(1), np.eye(1))
    out = kalman_filter(sys, ObservationSequence.from_array([[2.0]]))
    assert out.filtered_mean[0, 0] == pytest.approx(2.0)
    assert out.filtered_cov[0, 0, 0] == pytest.approx(0.0, abs=1e-12)


def test_conjugate_update():
    out = kalman_filter(local_level(1), ObservationSequence.from_array([[2.0]]))
    assert out.filtered_mean[0, 0] == pytest.approx(1.0)
    assert out.filtered_cov[0, 0, 0] == pytest.approx(0.5)


def test_masked_step_carries_no_information():
    obs = ObservationSequence.from_array([[2.0]], mask=[[False]])
    out = kalman_filter(local_level(1), obs)
    assert out.filtered_mean[0, 0] == 0.0
    assert out.filtered_cov[0, 0, 0] == 1.0
    assert out.loglik_terms[0] == 0.0


def test_nan_is_missing():
    a = ObservationSequence.from_array([[np.nan], [1.0]])
    assert a.mask.tolist() == [[False], [True]]


def test_single_step_smoothed_equals_filtered():
    out = kalman_smoother(local_level(1), ObservationSequence.from_array([[0.7]]))
    np.testing.assert_allclose(out.smoothed_mean, out.filtered_mean)
    np.testing.assert_allclose(out.smoothed_cov, out.filtered_cov)


def test_two_step_local_level_against_joint_conditioning():
    sys = local_level(2)
    y = np.array([[0.0], [2.0]])
    out = kalman_smoother(sys, ObservationSequence.from_array(y))
    # x1 ~ N(0,1), x2 = x1 + w; y_i = x_i + e_i, all unit variances
    Sx = np.array([[1.0, 1.0], [1.0, 2.0]])
    Sy = Sx + np.eye(2)
    m = Sx @ np.linalg.solve(Sy, y[:, 0])
    V = Sx - Sx @ np.linalg.solve(Sy, Sx)
    np.testing.assert_allclose(out.smoothed_mean[:, 0], m, atol=1e-14)
    np.testing.assert_allclose(out.smoothed_cov[:, 0, 0], np.diag(V), atol=1e-14)
    # hand value: Sx Sy^-1 y = (0.4, 1.2); the later observation pulls x1 up
    # from its filtered value 0
    assert out.filtered_mean[0, 0] == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(out.smoothed_mean[:, 0], [0.4, 1.2], atol=1e-14)


def test_all_masked_smoother_is_prior_path():
    rng = np.random.default_rng(3)
    sys = random_system(rng, 6, 2, 2)
    obs = ObservationSequence.from_array(np.full((6, 2), np.nan))
    out = kalman_smoother(sys, obs)
    a = sys.a1.copy()
    for i in range(6):
        np.testing.assert_allclose(out.smoothed_mean[i], a, atol=1e-12)
        if i < 5:
            a = sys.T[i] @ a
    assert out.loglik == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_filter_smoother_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, m, p = 4, 3, 2
    sys = random_system(rng, n, m, p)
    y = rng.normal(size=(n, p))
    mask = rng.random((n, p)) > 0.25
    obs = ObservationSequence.from_array(y, mask)
    out = kalman_smoother(sys, obs)
    mean, cov, ll = joint_gaussian_posterior(sys, y, mask)
    np.testing.assert_allclose(out.smoothed_mean, mean, rtol=1e-8, atol=1e-10)
    for i in range(n):
        np.testing.assert_allclose(out.smoothed_cov[i], cov[i * m:(i + 1) * m, i * m:(i + 1) * m],
                                   rtol=1e-8, atol=1e-10)
    assert out.loglik == pytest.approx(ll, rel=1e-8)
    # filtered moments at step i condition on data up to i only
    for i in range(n):
        mf, cf, _ = joint_gaussian_posterior(sys, y, mask & (np.arange(n)[:, None] <= i))
        np.testing.assert_allclose(out.filtered_mean[i], mf[i], rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(out.filtered_cov[i], cf[i * m:(i + 1) * m, i * m:(i + 1) * m],
                                   rtol=1e-8, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 5), m=st.integers(1, 3),
       p=st.integers(1, 3), tv=st.booleans())
def test_smoothed_covariances_are_symmetric_psd(seed, n, m, p, tv):
    rng = np.random.default_rng(seed)
    sys = random_system(rng, n, m, p, time_varying=tv)
    y = rng.normal(size=(n, p))
    out = kalman_smoother(sys, ObservationSequence.from_array(y, rng.random((n, p)) > 0.3))
    for C in list(out.smoothed_cov) + list(out.filtered_cov):
        np.testing.assert_allclose(C, C.T, atol=1e-12)
        assert np.linalg.eigvalsh(C).min() > -1e-9


def test_degenerate_observation_pins_every_draw():
    rng = np.random.default_rng(5)
    n, m = 5, 2
    Z = rng.normal(size=(n, m, m)) + 2 * np.eye(m)
    sys = StateSpaceSystem(n, Z, np.zeros((m, m)), np.eye(m), np.eye(m), np.eye(m),
                           np.zeros(m), np.eye(m)).validate()
    y = rng.normal(size=(n, m))
    obs = ObservationSequence.from_array(y)
    for _ in range(5):
        x = simulation_smoother(sys, obs, rng)
        np.testing.assert_allclose(np.einsum("ipm,im->ip", Z, x), y, atol=1e-8)


def test_simulation_smoother_prior_when_all_masked():
    rng = np.random.default_rng(11)
    n, m = 6, 2
    sys = random_system(rng, n, m, 2)
    obs = ObservationSequence.from_array(np.full((n, 2), np.nan))
    draws = np.array([simulation_smoother(sys, obs, rng) for _ in range(20000)])
    prior = kalman_smoother(sys, obs).smoothed_mean
    se = draws.std(axis=0) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - prior) < 3 * se)


def test_simulate_shapes():
    rng = np.random.default_rng(0)
    sys = random_system(rng, 4, 3, 2)
    x, y = simulate(sys, rng)
    assert x.shape == (4, 3) and y.shape == (4, 2)


def test_singular_innovation_raises_with_step():
    sys = StateSpaceSystem(2, np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1), np.eye(1),
                           np.eye(1), np.zeros(1), np.eye(1))
    with pytest.raises(NumericalError) as exc:
        kalman_filter(sys, ObservationSequence.from_array([[1.0], [1.0]]))
    assert exc.value.step == 0


def test_validate_rejects_bad_shapes():
    with pytest.raises(ValueError):
        StateSpaceSystem(2, np.eye(2), np.eye(3), np.eye(2), np.eye(2), np.eye(2),
                         np.zeros(2), np.eye(2)).validate()
    with pytest.raises(ValueError):
        StateSpaceSystem(2, np.eye(1), -np.eye(1), np.eye(1), np.eye(1), np.eye(1),
                         np.zeros(1), np.eye(1)).validate()


@pytest.mark.parametrize("tv", [True, False])
def test_batched_correction_matches_single_pass(tv):
    from laf.statespace import _backward, _batch_means, _run_filter
    rng = np.random.default_rng(21)
    n, m, p = 6, 3, 2
    sys = random_system(rng, n, m, p, time_varying=tv)
    mask = rng.random((n, p)) > 0.3
    Y = rng.normal(size=(4, n, p)) * mask
    fp = _run_filter(sys, np.zeros((n, p)), mask, a1=np.zeros(m))
    batch = _batch_means(sys, fp, Y)
    for k in range(4):
        single, _ = _backward(sys, _run_filter(sys, Y[k], mask, a1=np.zeros(m)), with_cov=False)
        np.testing.assert_allclose(batch[k], single, atol=1e-12)


def test_batched_draws_respect_exact_observations():
    rng = np.random.default_rng(22)
    n, m = 4, 2
    Z = rng.normal(size=(n, m, m)) + 2 * np.eye(m)
    sys = StateSpaceSystem(n, Z, np.zeros((m, m)), np.eye(m), np.eye(m), np.eye(m),
                           np.zeros(m), np.eye(m)).validate()
    y = rng.normal(size=(n, m))
    x = simulation_smoother(sys, ObservationSequence.from_array(y), rng, size=50)
    assert x.shape == (50, n, m)
    np.testing.assert_allclose(np.einsum("ipm,sim->sip", Z, x), np.broadcast_to(y, (50, n, m)),
                               atol=1e-8)
