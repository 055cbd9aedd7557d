import numpy as np
import pytest
from hypothesis import given, strategies as st

from laf.synth import (
    ScenarioSpec,
    bumps,
    conditional_gp,
    continue_generate,
    generate,
    sample_gp,
    se_kernel,
)


def test_bumps_far_from_centers_is_small():
    assert bumps(np.array([0.99]))[0] < 0.05


def test_bumps_at_dominant_center():
    assert bumps(np.array([0.1]))[0] >= 4.0


@given(t=st.floats(-2.0, 3.0, allow_nan=False))
def test_bumps_nonnegative(t):
    for shift in range(4):
        assert bumps(np.array([t]), shift)[0] >= 0.0


def test_shift_rotates_locations():
    # shift 1 puts the second location first, so 0.13 gets the first height
    assert bumps(np.array([0.13]), 1)[0] >= 4.0 * 0.99


def test_gp_unit_marginal_variance():
    rng = np.random.default_rng(0)
    x = sample_gp(np.array([0.2, 0.5]), 10.0, rng, size=10000)
    v = x[:, 0] ** 2
    assert abs(v.mean() - 1.0) <= 3 * v.std(ddof=1) / np.sqrt(v.size)


def test_gp_decorrelates_for_large_kappa():
    rng = np.random.default_rng(1)
    x = sample_gp(np.array([0.0, 0.1]), 1e4, rng, size=10000)
    assert abs(np.corrcoef(x.T)[0, 1]) < 0.05


def test_gp_correlation_at_unit_scaled_distance():
    rng = np.random.default_rng(2)
    kappa = 10.0
    t = np.array([0.0, 1 / np.sqrt(kappa)])
    x = sample_gp(t, kappa, rng, size=20000)
    prod = x[:, 0] * x[:, 1]
    assert abs(prod.mean() - np.exp(-1)) <= 3 * prod.std(ddof=1) / np.sqrt(prod.size)
    assert se_kernel(t, t, kappa)[0, 1] == pytest.approx(np.exp(-1))


def test_generation_is_seeded_and_shaped():
    a_data, a = generate(ScenarioSpec.A(seed=3))
    b_data, b = generate(ScenarioSpec.A(seed=3))
    np.testing.assert_array_equal(a_data.y, b_data.y)
    assert a_data.y.shape == (100, 5)
    assert a.xi.shape == (100, 2, 2)
    assert a.gamma.sigma.shape == (100, 5, 5)
    d, truth = generate(ScenarioSpec.B(seed=0))
    assert d.y.shape == (100, 10) and truth.xi.shape == (100, 5, 4)


def test_replicate_covariance_matches_truth():
    # regenerate observations at one time point with the truth held fixed
    _, truth = generate(ScenarioSpec.A(seed=4))
    i = 9
    rng = np.random.default_rng(5)
    n = 50000
    lam = truth.theta @ truth.xi[i]
    nu = rng.standard_normal((n, lam.shape[1]))
    y = (truth.psi[i] + nu) @ lam.T + rng.standard_normal((n, lam.shape[0])) * np.sqrt(truth.sigma2)
    r = y - truth.gamma.mu[i]
    S = truth.gamma.sigma[i]
    for j in range(5):
        for k in range(j + 1):
            prod = r[:, j] * r[:, k]
            assert abs(prod.mean() - S[j, k]) <= 3 * prod.std(ddof=1) / np.sqrt(n)


def test_extension_of_length_zero_is_identity():
    _, truth = generate(ScenarioSpec.A(seed=0))
    new, same = continue_generate(truth, 0, np.random.default_rng(0))
    assert new.T == 0 and same is truth


def test_extension_lengths():
    _, truth = generate(ScenarioSpec.A(seed=0))
    new, full = continue_generate(truth, 50, np.random.default_rng(0))
    assert new.T == 50 and full.gamma.sigma.shape[0] == 150
    np.testing.assert_array_equal(new.times, np.arange(101, 151))
    np.testing.assert_array_equal(full.xi[:100], truth.xi)


def test_conditional_gp_against_joint_conditioning():
    rng = np.random.default_rng(6)
    t_old = np.linspace(0.01, 1.0, 20)
    f_old = sample_gp(t_old, 10.0, rng)
    t_new = np.array([1.01, 1.05])
    m, C = conditional_gp(t_old, f_old, t_new, 10.0)
    t_all = np.r_[t_old, t_new]
    K = se_kernel(t_all, t_all, 10.0) + 1e-10 * np.eye(t_all.size)
    Koo, Kno = K[:20, :20], K[20:, :20]
    m_ref = Kno @ np.linalg.solve(Koo, f_old)
    C_ref = K[20:, 20:] - Kno @ np.linalg.solve(Koo, Kno.T)
    np.testing.assert_allclose(m, m_ref, atol=1e-5)
    np.testing.assert_allclose(C, C_ref, atol=1e-5)
    # continuity at the junction
    assert abs(m[0] - f_old[-1]) < 0.1


@pytest.mark.parametrize("make", [ScenarioSpec.A, ScenarioSpec.B])
def test_generator_outputs_finite(make):
    data, truth = generate(make(seed=2))
    new, full = continue_generate(truth, 5, np.random.default_rng(1))
    for arr in (data.y, new.y, truth.theta, truth.xi, truth.psi, truth.nu, truth.sigma2,
                full.gamma.mu, full.gamma.sigma):
        assert np.isfinite(arr).all()
