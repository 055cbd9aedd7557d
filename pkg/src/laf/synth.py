"""
Synthetic data with known mean/covariance paths.

Scenario A uses spiky "bumps" dictionary functions (locally varying
smoothness); scenario B uses smooth Gaussian-process dictionaries.  Both
generate data from the latent factor model

    y_i = theta xi(t_i) eta_i + eps_i,   eta_i = psi(t_i) + nu_i

on the raw grid 1..T, with all dictionary functions evaluated on the
rescaled grid t_i = i / T.
"""
from dataclasses import dataclass

import numpy as np

from .model import Dataset, MeanCovPath, compose_gamma

__all__ = [
    "BUMP_LOCATIONS",
    "BUMP_HEIGHTS",
    "BUMP_WIDTHS",
    "ScenarioSpec",
    "GroundTruth",
    "bumps",
    "se_kernel",
    "sample_gp",
    "conditional_gp",
    "generate",
    "continue_generate",
]

BUMP_LOCATIONS = np.array([0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
BUMP_HEIGHTS = np.array([4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
BUMP_WIDTHS = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])


def bumps(t, shift=0):
    """Bumps test function; ``shift`` cyclically rotates the locations.

    f(t) = sum_j h_j (1 + |t - p_j| / w_j)^-4
    """
    t = np.asarray(t, dtype=float)
    loc = np.roll(BUMP_LOCATIONS, -int(shift))
    x = np.abs(t[..., None] - loc) / BUMP_WIDTHS
    return (BUMP_HEIGHTS * (1.0 + x) ** -4).sum(axis=-1)


def se_kernel(s, t, kappa):
    """exp(-kappa (s - t)^2); kappa multiplies the squared distance."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.exp(-kappa * (s[:, None] - t[None, :]) ** 2)


def _jittered_cholesky(C):
    jitter = 1e-10
    while True:
        try:
            return np.linalg.cholesky(C + jitter * np.eye(C.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10
            if jitter > 1e-6:
                raise


def sample_gp(t, kappa, rng, size=None):
    """Draw(s) from a zero-mean GP with kernel exp(-kappa d^2) on ``t``."""
    t = np.asarray(t, dtype=float)
    L = _jittered_cholesky(se_kernel(t, t, kappa))
    shape = (t.size,) if size is None else (size, t.size)
    z = rng.standard_normal(shape)
    return z @ L.T


def conditional_gp(t_old, f_old, t_new, kappa):
    """Mean and covariance of the GP at ``t_new`` given values at ``t_old``."""
    K_oo = se_kernel(t_old, t_old, kappa)
    K_no = se_kernel(t_new, t_old, kappa)
    K_nn = se_kernel(t_new, t_new, kappa)
    L = _jittered_cholesky(K_oo)
    A = np.linalg.solve(L, K_no.T)                       # L^-1 K_on
    mean = A.T @ np.linalg.solve(L, f_old)
    cov = K_nn - A.T @ A
    return mean, 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str = "A"
    p: int = 5
    L: int = 2
    K: int = 2
    T: int = 100
    kappa: float = 10.0
    a1: float = 10.0
    a2: float = 10.0
    a_sigma: float = 1.0
    b_sigma: float = 0.1
    seed: int = 0

    @classmethod
    def A(cls, **kw):
        return cls(**{"scenario": "A", "p": 5, "L": 2, "K": 2, "T": 100, **kw})

    @classmethod
    def B(cls, **kw):
        return cls(**{"scenario": "B", "p": 10, "L": 5, "K": 4, "T": 100, **kw})


@dataclass(frozen=True)
class GroundTruth:
    """True path and the generating quantities (time-major)."""

    gamma: MeanCovPath
    theta: np.ndarray
    xi: np.ndarray
    psi: np.ndarray
    sigma2: np.ndarray
    nu: np.ndarray
    times: np.ndarray
    spec: ScenarioSpec

    @property
    def t(self):
        return self.times / self.spec.T


def _draw_theta(spec, rng):
    phi = rng.gamma(1.5, 1.0 / 1.5, size=(spec.p, spec.L))
    vartheta = np.r_[rng.gamma(spec.a1, 1.0), rng.gamma(spec.a2, 1.0, size=spec.L - 1)]
    tau = np.cumprod(vartheta)
    return rng.standard_normal((spec.p, spec.L)) / np.sqrt(phi * tau)


def _bumps_xi(t, L, K):
    xi = np.empty((t.size, L, K))
    for k in range(K):
        for l in range(L):
            xi[:, l, k] = bumps(t, shift=k * L + l)
    return xi


def _observe(theta, xi, psi, nu, sigma2, rng):
    eta = psi + nu
    mean = np.einsum("pl,tlk,tk->tp", theta, xi, eta)
    return mean + rng.standard_normal(mean.shape) * np.sqrt(sigma2)


def generate(spec, rng=None):
    """Simulate one dataset; returns ``(Dataset, GroundTruth)``."""
    if spec.scenario not in ("A", "B"):
        raise ValueError(f"unknown scenario {spec.scenario!r}")
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    times = np.arange(1, spec.T + 1, dtype=float)
    t = times / spec.T
    theta = _draw_theta(spec, rng)
    sigma2 = 1.0 / rng.gamma(spec.a_sigma, 1.0 / spec.b_sigma, size=spec.p)
    if spec.scenario == "A":
        xi = _bumps_xi(t, spec.L, spec.K)
    else:
        xi = sample_gp(t, spec.kappa, rng, size=spec.L * spec.K)
        xi = xi.reshape(spec.K, spec.L, spec.T).transpose(2, 1, 0)
    psi = sample_gp(t, spec.kappa, rng, size=spec.K).T
    nu = rng.standard_normal((spec.T, spec.K))
    y = _observe(theta, xi, psi, nu, sigma2, rng)
    truth = GroundTruth(compose_gamma(theta, xi, psi, sigma2), theta, xi, psi,
                        sigma2, nu, times, spec)
    return Dataset.from_array(times, y), truth


def continue_generate(prev, extra_T, rng):
    """Extend a simulated dataset by ``extra_T`` steps.

    Theta and the idiosyncratic variances are kept; bumps dictionaries are
    evaluated further along the grid and GP dictionaries continue from the
    conditional GP given the earlier path.  Returns the Dataset of the new
    steps and the GroundTruth over the full extended grid.
    """
    spec = prev.spec
    if extra_T == 0:
        return Dataset.from_array(np.empty(0), np.empty((0, spec.p))), prev
    T0 = prev.times.size
    times = np.arange(T0 + 1, T0 + extra_T + 1, dtype=float)
    t_new = times / spec.T
    t_old = prev.t
    if spec.scenario == "A":
        xi = _bumps_xi(t_new, spec.L, spec.K)
    else:
        flat_old = prev.xi.transpose(2, 1, 0).reshape(spec.L * spec.K, T0)
        flat = np.empty((spec.L * spec.K, extra_T))
        for e in range(flat_old.shape[0]):
            m, C = conditional_gp(t_old, flat_old[e], t_new, spec.kappa)
            flat[e] = m + _jittered_cholesky(C) @ rng.standard_normal(extra_T)
        xi = flat.reshape(spec.K, spec.L, extra_T).transpose(2, 1, 0)
    psi = np.empty((extra_T, spec.K))
    for k in range(spec.K):
        m, C = conditional_gp(t_old, prev.psi[:, k], t_new, spec.kappa)
        psi[:, k] = m + _jittered_cholesky(C) @ rng.standard_normal(extra_T)
    nu = rng.standard_normal((extra_T, spec.K))
    y = _observe(prev.theta, xi, psi, nu, prev.sigma2, rng)
    xi_all = np.concatenate([prev.xi, xi])
    psi_all = np.concatenate([prev.psi, psi])
    full = GroundTruth(
        compose_gamma(prev.theta, xi_all, psi_all, prev.sigma2),
        prev.theta, xi_all, psi_all, prev.sigma2,
        np.concatenate([prev.nu, nu]),
        np.concatenate([prev.times, times]),
        spec,
    )
    return Dataset.from_array(times, y), full
