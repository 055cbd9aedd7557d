"""
Gibbs sampler for the LAF model.

One sweep runs, in order:

1. xi dictionary states by simulation smoothing,
2. xi state-equation variances (inverse gamma),
3. psi dictionary states by simulation smoothing (factors integrated out),
4. psi state-equation variances,
5. latent factor innovations nu (Gaussian),
6. idiosyncratic precisions (gamma),
7. loadings theta row by row (Gaussian),
8. local shrinkage precisions phi (gamma),
9. global shrinkage gammas vartheta (gamma, sequential in h).

Missing cells are left out of every likelihood term.  The ``*_posterior``
functions return the parameters of each full conditional so they can be
checked independently of the random draws.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import (
    FactorState,
    Loadings,
    MeanCovPath,
    PosteriorDraw,
    check_config,
    compose_gamma,
)
from .ngp import (
    DictionaryPaths,
    NgpVariances,
    TimeGrid,
    assemble_psi_system,
    assemble_xi_system,
)
from .statespace import NumericalError, ObservationSequence, simulation_smoother

__all__ = [
    "Chain",
    "GammaAccumulator",
    "SamplerError",
    "init_chain",
    "increment_sums",
    "nu_posterior",
    "precision_posterior",
    "theta_row_posterior",
    "phi_posterior",
    "vartheta_posterior",
    "step1_update_xi",
    "step2_update_xi_variances",
    "step3_update_psi",
    "step4_update_psi_variances",
    "step5_update_nu",
    "step6_update_sigma0",
    "step7_update_theta",
    "step8_update_phi",
    "step9_update_vartheta",
    "gibbs_sweep",
    "run_gibbs",
    "run_chains",
]

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


def _invgamma(rng, shape, scale):
    return scale / rng.gamma(shape, 1.0, size=np.shape(scale))


def _gamma(rng, shape, rate):
    return rng.gamma(shape, 1.0, size=np.shape(rate)) / rate


def _grid_of(data):
    return data.grid()


def _resolve_grid(data, grid):
    return grid if grid is not None else _grid_of(data)


# --------------------------------------------------------------------------
# initialization

def _prior_mean_or_one(a, b):
    return b / (a - 1.0) if a > 1 else 1.0


def init_chain(cfg, data, rng):
    """Starting state: loadings and precisions from their priors, zero
    dictionary paths, standard normal factor innovations, nGP variances at
    their prior means (or 1 when the mean does not exist)."""
    L, K, p, T = cfg.L_star, cfg.K_star, data.p, data.T
    phi = rng.gamma(1.5, 1.0 / 1.5, size=(p, L))
    vartheta = np.empty(L)
    vartheta[0] = rng.gamma(cfg.a1, 1.0)
    vartheta[1:] = rng.gamma(cfg.a2, 1.0, size=L - 1)
    tau = np.cumprod(vartheta)
    theta = rng.standard_normal((p, L)) / np.sqrt(phi * tau)
    sigma2 = 1.0 / rng.gamma(cfg.a_sigma, 1.0 / cfg.b_sigma, size=p)
    nu = rng.standard_normal((T, K))
    variances = NgpVariances(
        np.full((L, K), _prior_mean_or_one(cfg.a_xi, cfg.b_xi)),
        np.full((L, K), _prior_mean_or_one(cfg.a_A, cfg.b_A)),
        np.full(K, _prior_mean_or_one(cfg.a_psi, cfg.b_psi)),
        np.full(K, _prior_mean_or_one(cfg.a_B, cfg.b_B)),
    )
    paths = DictionaryPaths.zeros(T, L, K)
    return PosteriorDraw(
        loadings=Loadings(theta, phi, vartheta),
        sigma2=sigma2,
        paths=paths,
        factors=FactorState(nu, paths.psi + nu),
        variances=variances,
    )


# --------------------------------------------------------------------------
# full conditional parameters

def increment_sums(level_deriv, mean_level, deltas):
    """Scaled squared increments of one nGP element family.

    ``level_deriv`` holds the derivative path f'(t_i) and ``mean_level`` the
    instantaneous mean A(t_i), both with time on axis 0.  Returns
    ``(sum (f'_{i+1} - f'_i - A_i d_i)^2 / d_i, sum (A_{i+1} - A_i)^2 / d_i)``
    reduced over time.
    """
    d = np.asarray(deltas, dtype=float)
    if np.any(d <= 0):
        raise ValueError("grid spacings must be positive")
    shape = (-1,) + (1,) * (np.ndim(level_deriv) - 1)
    d = d.reshape(shape)
    e_f = level_deriv[1:] - level_deriv[:-1] - mean_level[:-1] * d
    e_A = mean_level[1:] - mean_level[:-1]
    return (e_f ** 2 / d).sum(axis=0), (e_A ** 2 / d).sum(axis=0)


def _ig_update(a, b, sums, n_increments):
    return a + 0.5 * n_increments, b + 0.5 * sums


def xi_variance_posterior(paths, deltas, cfg):
    """InvGa (shape, scale) pairs for sigma2_xi and sigma2_A, arrays (L, K)."""
    s_f, s_A = increment_sums(paths.xi_deriv, paths.A, deltas)
    n = len(deltas)
    return _ig_update(cfg.a_xi, cfg.b_xi, s_f, n), _ig_update(cfg.a_A, cfg.b_A, s_A, n)


def psi_variance_posterior(paths, deltas, cfg):
    """InvGa (shape, scale) pairs for sigma2_psi and sigma2_B, arrays (K,)."""
    s_f, s_A = increment_sums(paths.psi_deriv, paths.B, deltas)
    n = len(deltas)
    return _ig_update(cfg.a_psi, cfg.b_psi, s_f, n), _ig_update(cfg.a_B, cfg.b_B, s_A, n)


def nu_posterior(theta, xi, psi, sigma2, y, mask):
    """Mean (T, K) and covariance (T, K, K) of the factor innovations."""
    lam = theta[None] @ xi                                   # (T, p, K)
    w = np.where(mask, 1.0 / sigma2, 0.0)                    # (T, p)
    resid = np.where(mask, y - np.einsum("tpk,tk->tp", lam, psi), 0.0)
    K = xi.shape[2]
    prec = np.eye(K)[None] + np.einsum("tpk,tp,tpl->tkl", lam, w, lam)
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.swapaxes(1, 2))
    b = np.einsum("tpk,tp->tk", lam, w * resid)
    mean = np.einsum("tkl,tl->tk", cov, b)
    return mean, cov


def precision_posterior(theta, xi, eta, y, mask, cfg):
    """Gamma (shape, rate) of each idiosyncratic precision, arrays (p,)."""
    fit = np.einsum("pl,tlk,tk->tp", theta, xi, eta)
    resid2 = np.where(mask, (np.nan_to_num(y) - fit) ** 2, 0.0)
    return cfg.a_sigma + 0.5 * mask.sum(axis=0), cfg.b_sigma + 0.5 * resid2.sum(axis=0)


def _eta_tilde(xi, eta):
    return np.einsum("tlk,tk->tl", xi, eta)                 # rows xi(t_i) eta_i


def theta_row_posterior(j, eta_tilde, y, mask, sigma2, phi, tau):
    """Mean (L,) and covariance (L, L) of row j of theta."""
    o = mask[:, j]
    X = eta_tilde[o]
    yj = y[o, j]
    prec = X.T @ X / sigma2[j] + np.diag(phi[j] * tau)
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (X.T @ yj) / sigma2[j]
    return mean, cov


def phi_posterior(theta, tau):
    """Gamma (shape, rate) of the local precisions, arrays (p, L)."""
    return np.full(theta.shape, 2.0), 0.5 * (3.0 + tau[None, :] * theta ** 2)


def vartheta_posterior(h, theta, phi, vartheta, cfg):
    """Gamma (shape, rate) of vartheta_h (0-based h) given the others."""
    p, L = theta.shape
    others = vartheta.copy()
    others[h] = 1.0
    tau_minus = np.cumprod(others)
    col = (phi * theta ** 2).sum(axis=0)
    shape = (cfg.a1 if h == 0 else cfg.a2) + 0.5 * p * (L - h)
    rate = 1.0 + 0.5 * (tau_minus[h:] * col[h:]).sum()
    return shape, rate


# --------------------------------------------------------------------------
# Gibbs steps

def _obs(data):
    return ObservationSequence(data.filled(0.0), data.mask)


def step1_update_xi(draw, data, cfg, rng, grid=None, a1=None, P1=None):
    grid = _resolve_grid(data, grid)
    sys = assemble_xi_system(
        draw.theta, draw.factors.eta, grid, draw.variances, draw.sigma2,
        cfg.sigma2_mu, cfg.sigma2_alpha, a1=a1, P1=P1,
    )
    states = simulation_smoother(sys, _obs(data), rng)
    return draw.replace(paths=draw.paths.with_xi_states(states))


def step2_update_xi_variances(draw, grid, cfg, rng):
    (a_f, b_f), (a_A, b_A) = xi_variance_posterior(draw.paths, grid.delta, cfg)
    v = draw.variances
    return draw.replace(variances=NgpVariances(
        _invgamma(rng, a_f, b_f), _invgamma(rng, a_A, b_A), v.sigma2_psi, v.sigma2_B))


def step3_update_psi(draw, data, cfg, rng, grid=None, a1=None, P1=None):
    grid = _resolve_grid(data, grid)
    sys = assemble_psi_system(
        draw.theta, draw.paths.xi, grid, draw.variances, draw.sigma2,
        cfg.sigma2_mu_psi, cfg.sigma2_alpha_psi, a1=a1, P1=P1,
    )
    states = simulation_smoother(sys, _obs(data), rng)
    return draw.replace(paths=draw.paths.with_psi_states(states))


def step4_update_psi_variances(draw, grid, cfg, rng):
    (a_f, b_f), (a_B, b_B) = psi_variance_posterior(draw.paths, grid.delta, cfg)
    v = draw.variances
    return draw.replace(variances=NgpVariances(
        v.sigma2_xi, v.sigma2_A, _invgamma(rng, a_f, b_f), _invgamma(rng, a_B, b_B)))


def step5_update_nu(draw, data, cfg, rng):
    mean, cov = nu_posterior(draw.theta, draw.paths.xi, draw.paths.psi,
                             draw.sigma2, data.filled(0.0), data.mask)
    chol = np.linalg.cholesky(cov)
    z = rng.standard_normal(mean.shape)
    nu = mean + np.einsum("tkl,tl->tk", chol, z)
    return draw.replace(factors=FactorState(nu, draw.paths.psi + nu))


def step6_update_sigma0(draw, data, cfg, rng):
    shape, rate = precision_posterior(draw.theta, draw.paths.xi, draw.factors.eta,
                                      data.filled(0.0), data.mask, cfg)
    return draw.replace(sigma2=1.0 / _gamma(rng, shape, rate))


def step7_update_theta(draw, data, cfg, rng):
    et = _eta_tilde(draw.paths.xi, draw.factors.eta)
    y = data.filled(0.0)
    ld = draw.loadings
    tau = ld.tau
    theta = np.empty_like(ld.theta)
    for j in range(theta.shape[0]):
        mean, cov = theta_row_posterior(j, et, y, data.mask, draw.sigma2, ld.phi, tau)
        theta[j] = mean + np.linalg.cholesky(cov) @ rng.standard_normal(mean.size)
    return draw.replace(loadings=Loadings(theta, ld.phi, ld.vartheta))


def step8_update_phi(draw, cfg, rng):
    ld = draw.loadings
    shape, rate = phi_posterior(ld.theta, ld.tau)
    return draw.replace(loadings=Loadings(ld.theta, _gamma(rng, shape, rate), ld.vartheta))


def step9_update_vartheta(draw, cfg, rng):
    ld = draw.loadings
    vartheta = ld.vartheta.copy()
    for h in range(vartheta.size):
        shape, rate = vartheta_posterior(h, ld.theta, ld.phi, vartheta, cfg)
        vartheta[h] = rng.gamma(shape, 1.0 / rate)
    return draw.replace(loadings=Loadings(ld.theta, ld.phi, vartheta))


def gibbs_sweep(draw, data, grid, cfg, rng):
    """One full sweep of steps 1-9."""
    draw = step1_update_xi(draw, data, cfg, rng, grid)
    draw = step2_update_xi_variances(draw, grid, cfg, rng)
    draw = step3_update_psi(draw, data, cfg, rng, grid)
    draw = step4_update_psi_variances(draw, grid, cfg, rng)
    draw = step5_update_nu(draw, data, cfg, rng)
    draw = step6_update_sigma0(draw, data, cfg, rng)
    draw = step7_update_theta(draw, data, cfg, rng)
    draw = step8_update_phi(draw, cfg, rng)
    draw = step9_update_vartheta(draw, cfg, rng)
    return draw


# --------------------------------------------------------------------------
# chains

class GammaAccumulator:
    """Running mean of mu and Sigma plus a bounded reservoir of draws.

    The reservoir keeps every draw until ``capacity`` is reached and then
    switches to uniform reservoir sampling, so interval summaries stay
    available without storing every composed path.
    """

    def __init__(self, capacity=2000, seed=0):
        self.capacity = capacity
        self.count = 0
        self.mu_sum = None
        self.sigma_sum = None
        self.mu_draws = []
        self.sigma_draws = []
        self._rng = np.random.default_rng(seed)

    def add(self, gamma):
        if self.count == 0:
            self.mu_sum = np.zeros_like(gamma.mu)
            self.sigma_sum = np.zeros_like(gamma.sigma)
        self.mu_sum += gamma.mu
        self.sigma_sum += gamma.sigma
        self.count += 1
        if len(self.mu_draws) < self.capacity:
            self.mu_draws.append(gamma.mu)
            self.sigma_draws.append(gamma.sigma)
        else:
            k = self._rng.integers(self.count)
            if k < self.capacity:
                self.mu_draws[k] = gamma.mu
                self.sigma_draws[k] = gamma.sigma

    def merge(self, other):
        out = GammaAccumulator(self.capacity + other.capacity)
        out.count = self.count + other.count
        out.mu_sum = self.mu_sum + other.mu_sum
        out.sigma_sum = self.sigma_sum + other.sigma_sum
        out.mu_draws = self.mu_draws + other.mu_draws
        out.sigma_draws = self.sigma_draws + other.sigma_draws
        return out

    @property
    def mean(self):
        if self.count == 0:
            raise ValueError("no draws accumulated")
        return MeanCovPath(self.mu_sum / self.count, self.sigma_sum / self.count)

    def samples(self):
        """Reservoir draws as arrays (n, T, p) and (n, T, p, p)."""
        return np.array(self.mu_draws), np.array(self.sigma_draws)


@dataclass
class Chain:
    """Retained draws of one Gibbs run."""

    draws: list
    grid: TimeGrid
    gamma: GammaAccumulator
    composed: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.draws)

    def stack(self, name):
        """Stack one field across draws, e.g. ``"theta"`` or ``"xi"``."""
        getters = {
            "theta": lambda d: d.theta,
            "phi": lambda d: d.loadings.phi,
            "vartheta": lambda d: d.loadings.vartheta,
            "sigma2": lambda d: d.sigma2,
            "nu": lambda d: d.factors.nu,
            "eta": lambda d: d.factors.eta,
            "xi": lambda d: d.paths.xi,
            "xi_deriv": lambda d: d.paths.xi_deriv,
            "A": lambda d: d.paths.A,
            "psi": lambda d: d.paths.psi,
            "psi_deriv": lambda d: d.paths.psi_deriv,
            "B": lambda d: d.paths.B,
            "sigma2_xi": lambda d: d.variances.sigma2_xi,
            "sigma2_A": lambda d: d.variances.sigma2_A,
            "sigma2_psi": lambda d: d.variances.sigma2_psi,
            "sigma2_B": lambda d: d.variances.sigma2_B,
        }
        return np.array([getters[name](d) for d in self.draws])


def _data_loglik(gamma, data):
    ll = 0.0
    y = data.filled(0.0)
    for i in range(data.T):
        o = data.mask[i]
        if not o.any():
            continue
        S = gamma.sigma[i][np.ix_(o, o)]
        r = y[i, o] - gamma.mu[i, o]
        c = np.linalg.cholesky(S)
        z = np.linalg.solve(c, r)
        ll -= 0.5 * (o.sum() * np.log(2 * np.pi) + 2 * np.log(np.diag(c)).sum() + z @ z)
    return ll


def run_gibbs(cfg, data, rng=None, *, init=None, keep_composed=False,
              callback: Optional[Callable] = None, reservoir=2000):
    """Run one Gibbs chain.

    Parameters
    ----------
    cfg : LafConfig
    data : Dataset
    rng : numpy Generator, defaults to ``default_rng(cfg.seed)``
    init : optional starting PosteriorDraw
    keep_composed : also keep every composed MeanCovPath
    callback : called as ``callback(iteration, loglik)`` after each sweep;
        the data log-likelihood is only evaluated when a callback is given.

    Returns
    -------
    Chain with ``floor((n_iter - burn_in) / thin)`` retained draws.
    """
    check_config(cfg)
    if cfg.p is not None and cfg.p != data.p:
        raise ValueError(f"config has p={cfg.p} but data has {data.p} series")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    grid = data.grid()
    draw = init_chain(cfg, data, rng) if init is None else init
    acc = GammaAccumulator(reservoir, seed=cfg.seed)
    kept, composed = [], [] if keep_composed else None
    started = time.time()
    n_keep = cfg.n_retained
    for it in range(cfg.n_iter):
        try:
            draw = gibbs_sweep(draw, data, grid, cfg, rng)
        except (NumericalError, np.linalg.LinAlgError) as exc:
            raise SamplerError(f"iteration {it}: {exc}", iteration=it) from exc
        post = it - cfg.burn_in + 1
        retain = post > 0 and post % cfg.thin == 0 and len(kept) < n_keep
        gamma = compose_gamma(draw) if (retain or callback) else None
        if retain:
            kept.append(draw)
            acc.add(gamma)
            if keep_composed:
                composed.append(gamma)
        if callback is not None:
            callback(it, _data_loglik(gamma, data))
    meta = dict(n_iter=cfg.n_iter, burn_in=cfg.burn_in, thin=cfg.thin,
                seed=cfg.seed, wall_time=time.time() - started)
    log.debug("chain finished: %s", meta)
    return Chain(kept, grid, acc, composed, meta)


def _chain_worker(args):
    cfg, data, seed_seq, keep_composed = args
    return run_gibbs(cfg, data, np.random.default_rng(seed_seq), keep_composed=keep_composed)


def run_chains(cfg, data, n_chains, *, workers=1, keep_composed=False):
    """Run independent chains with seeds spawned from ``cfg.seed``."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_chains)
    jobs = [(cfg, data, s, keep_composed) for s in seeds]
    if workers > 1 and n_chains > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_chain_worker, jobs))
    return [_chain_worker(j) for j in jobs]
