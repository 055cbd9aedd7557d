"""
Online updating and prediction with the static parameters held fixed.

Loadings, idiosyncratic variances and nGP variances are set to their
posterior means from a completed Gibbs run.  Only the dictionary paths
and latent factors are then resampled over a short window: the last
``k`` observations already fitted (the warm start) followed by the new
observations.  With ``k > 0`` the window starts from a diffuse but proper
prior N(0, c I); with ``k = 0`` it starts from the one-step-ahead
predictive distribution implied by the posterior of the states at T.

Prediction treats future observations as missing.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Dataset, FactorState, LafConfig, Loadings, PosteriorDraw, compose_gamma
from .ngp import DictionaryPaths, NgpVariances, TimeGrid, stacked_transition, vec
from .sampler import (
    Chain,
    GammaAccumulator,
    step1_update_xi,
    step3_update_psi,
    step5_update_nu,
)

# default warm-start length; shorter windows let the diffuse initial prior
# inflate the first few new covariance estimates
WARM_START = 8

__all__ = [
    "WARM_START",
    "FixedParams",
    "OnlineResult",
    "Prediction",
    "extract_fixed_params",
    "online_update",
    "warmstart_prior",
    "predict",
    "conditional_mean",
    "one_step_errors",
]


@dataclass(frozen=True)
class FixedParams:
    """Posterior means of the static parameters plus state moments at T.

    ``xi_state_*`` refer to the stacked (xi, xi', A) vector, ``psi_state_*``
    to (psi, psi', B).  ``xi_path_mean`` (T, L, K) and ``psi_path_mean``
    (T, K) are only used to initialize the online chains.
    """

    theta: np.ndarray
    sigma2: np.ndarray
    variances: NgpVariances
    xi_state_mean: np.ndarray
    xi_state_cov: np.ndarray
    psi_state_mean: np.ndarray
    psi_state_cov: np.ndarray
    grid: TimeGrid
    xi_path_mean: np.ndarray
    psi_path_mean: np.ndarray

    @property
    def L(self):
        return self.theta.shape[1]

    @property
    def K(self):
        return self.psi_state_mean.size // 3


def _moments(x):
    mean = x.mean(axis=0)
    d = x - mean
    cov = d.T @ d / x.shape[0]
    return mean, 0.5 * (cov + cov.T)


def extract_fixed_params(chains):
    """Posterior means and end-of-sample state moments from one or more chains.

    State covariances are the (biased, 1/n) sample covariances of the
    retained draws.
    """
    if not isinstance(chains, (list, tuple)):
        chains = [chains]
    draws = [d for ch in chains for d in ch.draws]
    if not draws:
        raise ValueError("chain has no retained draws")
    xi_T = np.array([d.paths.xi_states()[-1] for d in draws])
    psi_T = np.array([d.paths.psi_states()[-1] for d in draws])
    xm, xc = _moments(xi_T)
    pm, pc = _moments(psi_T)
    mean = lambda get: np.mean([get(d) for d in draws], axis=0)  # noqa: E731
    variances = NgpVariances(
        mean(lambda d: d.variances.sigma2_xi),
        mean(lambda d: d.variances.sigma2_A),
        mean(lambda d: d.variances.sigma2_psi),
        mean(lambda d: d.variances.sigma2_B),
    )
    return FixedParams(
        theta=mean(lambda d: d.theta),
        sigma2=mean(lambda d: d.sigma2),
        variances=variances,
        xi_state_mean=xm,
        xi_state_cov=xc,
        psi_state_mean=pm,
        psi_state_cov=pc,
        grid=chains[0].grid,
        xi_path_mean=mean(lambda d: d.paths.xi),
        psi_path_mean=mean(lambda d: d.paths.psi),
    )


@dataclass
class OnlineResult:
    """Chain over the processed window (warm-start steps first)."""

    chain: Chain
    window: Dataset
    n_warm: int

    @property
    def new_slice(self):
        return slice(self.n_warm, self.window.T)


def _predictive_start(mean, cov, delta, s2_f, s2_A):
    E = mean.size // 3
    Tm, R = stacked_transition(np.array([delta]), E)
    Tm = Tm[0]
    Q = np.diag(np.concatenate([s2_f, s2_A]) * delta)
    P = Tm @ cov @ Tm.T + R @ Q @ R.T
    return Tm @ mean, 0.5 * (P + P.T)


def _propagate(mean, deltas):
    E = mean.size // 3
    out = np.empty((len(deltas) + 1, mean.size))
    out[0] = mean
    if len(deltas):
        Tm, _ = stacked_transition(deltas, E)
        for i in range(len(deltas)):
            out[i + 1] = Tm[i] @ out[i]
    return out


def _window(fixed, history, new_data, k):
    if k < 0:
        raise ValueError("warm start length must be >= 0")
    parts = []
    if k > 0:
        if history is None or history.T < k:
            raise ValueError(f"warm start needs the last {k} fitted observations")
        parts.append(history.subset(np.arange(history.T - k, history.T)))
    if new_data is not None and new_data.T:
        if new_data.p != fixed.theta.shape[0]:
            raise ValueError(f"new data has {new_data.p} series, expected {fixed.theta.shape[0]}")
        parts.append(new_data)
    if not parts:
        raise ValueError("nothing to process: k = 0 and no new data")
    times = np.concatenate([d.times for d in parts])
    y = np.concatenate([d.y for d in parts])
    mask = np.concatenate([d.mask for d in parts])
    return Dataset(times, y, mask, parts[0].names)


def _initial_draw(fixed, window, grid, k, rng):
    L, K = fixed.L, fixed.K
    T_hist = fixed.xi_path_mean.shape[0]
    Tw = window.T
    n_new = Tw - k
    xi_states = np.empty((Tw, 3 * L * K))
    psi_states = np.empty((Tw, 3 * K))
    base = DictionaryPaths(
        fixed.xi_path_mean, np.zeros_like(fixed.xi_path_mean), np.zeros_like(fixed.xi_path_mean),
        fixed.psi_path_mean, np.zeros_like(fixed.psi_path_mean), np.zeros_like(fixed.psi_path_mean),
    )
    if k:
        xi_states[:k] = base.xi_states()[T_hist - k:]
        psi_states[:k] = base.psi_states()[T_hist - k:]
    if n_new:
        t_all = np.r_[fixed.grid.t[-1], grid.t[k:]]
        xi_states[k:] = _propagate(fixed.xi_state_mean, np.diff(t_all))[1:]
        psi_states[k:] = _propagate(fixed.psi_state_mean, np.diff(t_all))[1:]
    paths = DictionaryPaths.zeros(Tw, L, K).with_xi_states(xi_states).with_psi_states(psi_states)
    nu = rng.standard_normal((Tw, K))
    return PosteriorDraw(
        loadings=Loadings(fixed.theta, np.ones_like(fixed.theta), np.ones(L)),
        sigma2=fixed.sigma2,
        paths=paths,
        factors=FactorState(nu, paths.psi + nu),
        variances=fixed.variances,
    )


def warmstart_prior(fixed, grid, k, cfg):
    """Initial-state moments ``(xi_a1, xi_P1, psi_a1, psi_P1)`` for a window.

    With ``k > 0`` the prior is N(0, c I) with ``c = cfg.warmstart_var``;
    with ``k = 0`` it is the one-step-ahead predictive distribution from
    the end-of-sample state moments to the first time of ``grid``.
    """
    L, K = fixed.L, fixed.K
    if k > 0:
        c = cfg.warmstart_var
        return (np.zeros(3 * L * K), c * np.eye(3 * L * K),
                np.zeros(3 * K), c * np.eye(3 * K))
    delta = grid.t[0] - fixed.grid.t[-1]
    v = fixed.variances
    xi_a1, xi_P1 = _predictive_start(fixed.xi_state_mean, fixed.xi_state_cov, delta,
                                     vec(v.sigma2_xi), vec(v.sigma2_A))
    psi_a1, psi_P1 = _predictive_start(fixed.psi_state_mean, fixed.psi_state_cov, delta,
                                       v.sigma2_psi, v.sigma2_B)
    return xi_a1, xi_P1, psi_a1, psi_P1


def online_update(fixed, new_data, history=None, k=WARM_START, cfg=None, rng=None, *,
                  n_iter=None, burn_in=None, thin=1, keep_composed=False, init=None):
    """Resample dictionary paths and factors over the warm-start window
    plus the new observations, with static parameters fixed.

    Each sweep draws xi by simulation smoothing, psi by simulation
    smoothing, and then the factor innovations.

    Parameters
    ----------
    fixed : FixedParams
    new_data : Dataset or None
        Observations after the fitted sample (may contain missing cells).
    history : Dataset
        The fitted sample; its last ``k`` rows form the warm start.
    k : int
        Warm-start length.  ``k = 0`` starts from the one-step-ahead
        predictive distribution at the first new time.
    cfg : LafConfig
        ``warmstart_var`` sets c in the N(0, c I) warm-start prior; MCMC
        lengths default to ``cfg.n_iter`` / ``cfg.burn_in``.
    init : PosteriorDraw, optional
        Starting state over the window; by default paths start at the
        posterior-mean paths (warm-start steps) and at their noise-free
        propagation (new steps).
    """
    cfg = LafConfig() if cfg is None else cfg
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n_iter = cfg.n_iter if n_iter is None else n_iter
    burn_in = cfg.burn_in if burn_in is None else burn_in
    window = _window(fixed, history, new_data, k)
    grid = fixed.grid.with_raw(window.times)
    if k == 0 and grid.t[0] <= fixed.grid.t[-1]:
        raise ValueError("new observations must come after the fitted sample")
    xi_a1, xi_P1, psi_a1, psi_P1 = warmstart_prior(fixed, grid, k, cfg)
    draw = _initial_draw(fixed, window, grid, k, rng) if init is None else init
    acc = GammaAccumulator(seed=cfg.seed)
    kept, composed = [], [] if keep_composed else None
    for it in range(n_iter):
        draw = step1_update_xi(draw, window, cfg, rng, grid, a1=xi_a1, P1=xi_P1)
        draw = step3_update_psi(draw, window, cfg, rng, grid, a1=psi_a1, P1=psi_P1)
        draw = step5_update_nu(draw, window, cfg, rng)
        post = it - burn_in + 1
        if post > 0 and post % thin == 0:
            g = compose_gamma(draw)
            kept.append(draw)
            acc.add(g)
            if keep_composed:
                composed.append(g)
    chain = Chain(kept, grid, acc, composed,
                  dict(n_iter=n_iter, burn_in=burn_in, thin=thin, warm_start=k))
    return OnlineResult(chain, window, k)


def conditional_mean(mu, sigma, y, j):
    """E[y_j | y_{-j}] under N(mu, sigma)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    y = np.asarray(y, dtype=float)
    rest = np.arange(mu.size) != j
    w = np.linalg.solve(sigma[np.ix_(rest, rest)], sigma[rest, j])
    return float(mu[j] + w @ (y[rest] - mu[rest]))


@dataclass
class Prediction:
    """Predictive summaries for the appended future steps."""

    times: np.ndarray
    mu_mean: np.ndarray            # (H, p)
    sigma_mean: np.ndarray         # (H, p, p)
    mu_draws: np.ndarray           # (n, H, p)
    sigma_draws: np.ndarray        # (n, H, p, p)
    y_draws: np.ndarray            # (n, H, p)
    result: OnlineResult

    def intervals(self, prob=0.95):
        """Equal-tailed predictive intervals for each series, (H, p) arrays."""
        a = (1 - prob) / 2
        return (np.quantile(self.y_draws, a, axis=0),
                np.quantile(self.y_draws, 1 - a, axis=0))


def predict(fixed, history, horizon, k=WARM_START, cfg=None, rng=None, *, new_data=None,
            spacing=None, **mcmc):
    """h-step-ahead predictive draws of mu, Sigma and y.

    ``horizon`` fully masked steps, spaced by ``spacing`` raw time units
    (default: the last spacing of the fitted grid), are appended after
    ``history`` (and ``new_data`` when given) and the online sampler is run.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    cfg = LafConfig() if cfg is None else cfg
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    if spacing is None:
        raw = fixed.grid.raw
        spacing = raw[-1] - raw[-2] if raw.size > 1 else fixed.grid.scale
    last = history.times[-1]
    if new_data is not None and new_data.T:
        last = new_data.times[-1]
    future_t = last + spacing * np.arange(1, horizon + 1)
    p = fixed.theta.shape[0]
    future = Dataset(future_t, np.full((horizon, p), np.nan), np.zeros((horizon, p), bool))
    if new_data is not None and new_data.T:
        future = Dataset(np.r_[new_data.times, future_t], np.vstack([new_data.y, future.y]),
                         np.vstack([new_data.mask, future.mask]), new_data.names)
    res = online_update(fixed, future, history, k, cfg, rng, **mcmc)
    sl = slice(res.window.T - horizon, res.window.T)
    mus, sigmas = [], []
    for d in res.chain.draws:
        g = compose_gamma(d.theta, d.paths.xi[sl], d.paths.psi[sl], d.sigma2)
        mus.append(g.mu)
        sigmas.append(g.sigma)
    mus = np.array(mus)
    sigmas = np.array(sigmas)
    chol = np.linalg.cholesky(sigmas)
    y = mus + np.einsum("nhij,nhj->nhi", chol, rng.standard_normal(mus.shape))
    return Prediction(future_t, mus.mean(axis=0), sigmas.mean(axis=0), mus, sigmas, y, res)


def one_step_errors(fixed, history, realized, k=WARM_START, cfg=None, rng=None, **mcmc):
    """One-step-ahead prediction errors of three predictors.

    For each realized step, the online sampler is run on the last ``k``
    observations available before it plus one missing step, and the
    posterior means of mu and Sigma at that step give

    (a) zero prediction,
    (b) the predictive mean mu,
    (c) the conditional mean of each series given the other series.

    Returns a dict of (n, p) arrays ``{"a": ..., "b": ..., "c": ...}`` of
    realized minus predicted values.
    """
    cfg = LafConfig() if cfg is None else cfg
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    if k < 1:
        raise ValueError("one_step_errors needs a warm start k >= 1")
    full = Dataset(np.r_[history.times, realized.times], np.vstack([history.y, realized.y]),
                   np.vstack([history.mask, realized.mask]), history.names)
    n0 = history.T
    errs = {m: np.full((realized.T, realized.p), np.nan) for m in "abc"}
    for s in range(realized.T):
        past = full.subset(np.arange(0, n0 + s))
        step = Dataset(realized.times[s:s + 1], np.full((1, realized.p), np.nan),
                       np.zeros((1, realized.p), bool))
        res = online_update(fixed, step, past, k, cfg, rng, **mcmc)
        mean = res.chain.gamma.mean
        mu, sig = mean.mu[-1], mean.sigma[-1]
        y = realized.y[s]
        o = realized.mask[s]
        errs["a"][s, o] = y[o]
        errs["b"][s, o] = y[o] - mu[o]
        for j in np.flatnonzero(o):
            others = o.copy()
            others[j] = False
            keep = others | (np.arange(o.size) == j)
            idx = np.flatnonzero(keep)
            jj = int(np.flatnonzero(idx == j)[0])
            cm = conditional_mean(mu[idx], sig[np.ix_(idx, idx)], np.where(o, y, 0.0)[idx], jj)
            errs["c"][s, j] = y[j] - cm
    return errs
