"""
Domain types of the locally adaptive factor (LAF) model and the map from a
parameter draw to the induced mean/covariance path

    mu(t)    = theta xi(t) psi(t)
    Sigma(t) = theta xi(t) xi(t)^T theta^T + diag(sigma2)

All arrays are time-major: the leading axis indexes the grid.
"""
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .ngp import DictionaryPaths, NgpVariances, TimeGrid

__all__ = [
    "ConfigError",
    "LafConfig",
    "Dataset",
    "Loadings",
    "FactorState",
    "PosteriorDraw",
    "MeanCovPath",
    "validate_config",
    "compose_gamma",
    "scenario_a_config",
    "scenario_b_config",
]


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists one message per bad field."""

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class LafConfig:
    """Truncation levels, prior hyperparameters and MCMC controls.

    Gamma distributions use the shape/rate convention, inverse gamma
    distributions shape/scale (density proportional to x^{-a-1} e^{-b/x}).
    The defaults are the locally-varying-smoothness simulation settings.
    """

    L_star: int = 2
    K_star: int = 2
    p: Optional[int] = None
    # InvGa priors on the nGP state-equation variances
    a_xi: float = 2.0
    b_xi: float = 1e8
    a_A: float = 2.0
    b_A: float = 1e8
    a_psi: float = 0.005
    b_psi: float = 0.005
    a_B: float = 0.005
    b_B: float = 0.005
    # multiplicative gamma shrinkage on theta
    a1: float = 2.0
    a2: float = 2.0
    # Ga prior on idiosyncratic precisions
    a_sigma: float = 1.0
    b_sigma: float = 0.1
    # initial-state variances (xi blocks, psi blocks)
    sigma2_mu: float = 100.0
    sigma2_alpha: float = 100.0
    sigma2_mu_psi: float = 100.0
    sigma2_alpha_psi: float = 100.0
    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 5
    seed: int = 0
    # online updating: initial state covariance c*I at the warm-start origin
    warmstart_var: float = 100.0

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def n_retained(self):
        return max(self.n_iter - self.burn_in, 0) // self.thin


_POSITIVE = (
    "a_xi", "b_xi", "a_A", "b_A", "a_psi", "b_psi", "a_B", "b_B", "a1", "a2",
    "a_sigma", "b_sigma", "sigma2_mu", "sigma2_alpha", "sigma2_mu_psi",
    "sigma2_alpha_psi", "warmstart_var",
)


def validate_config(cfg):
    """Return a list of invariant violations (empty when valid)."""
    errors = []
    for name in _POSITIVE:
        val = getattr(cfg, name)
        if not (isinstance(val, (int, float)) and np.isfinite(val) and val > 0):
            errors.append(f"{name} must be a positive finite number, got {val!r}")
    for name in ("L_star", "K_star", "n_iter", "thin"):
        val = getattr(cfg, name)
        if not (isinstance(val, (int, np.integer)) and val >= 1):
            errors.append(f"{name} must be an integer >= 1, got {val!r}")
    if not (isinstance(cfg.burn_in, (int, np.integer)) and cfg.burn_in >= 0):
        errors.append(f"burn_in must be a non-negative integer, got {cfg.burn_in!r}")
    elif isinstance(cfg.n_iter, (int, np.integer)) and cfg.burn_in >= cfg.n_iter:
        errors.append(f"burn_in ({cfg.burn_in}) must be smaller than n_iter ({cfg.n_iter})")
    if cfg.p is not None and not (isinstance(cfg.p, (int, np.integer)) and cfg.p >= 1):
        errors.append(f"p must be an integer >= 1, got {cfg.p!r}")
    if not isinstance(cfg.seed, (int, np.integer)) or cfg.seed < 0:
        errors.append(f"seed must be a non-negative integer, got {cfg.seed!r}")
    return errors


def check_config(cfg):
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def scenario_a_config(**overrides):
    """Settings used for the locally varying smoothness simulation."""
    return LafConfig(**overrides)


def scenario_b_config(**overrides):
    """Settings used for the smooth-process simulation."""
    base = dict(L_star=5, K_star=4, b_xi=1e4, b_A=1e4)
    base.update(overrides)
    return LafConfig(**base)


@dataclass(frozen=True)
class Dataset:
    """Observation times and a (T, p) observation matrix with missing cells.

    ``mask`` is True where a cell is observed; ``y`` holds NaN elsewhere.
    """

    times: np.ndarray
    y: np.ndarray
    mask: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        mask = np.asarray(self.mask, dtype=bool) & np.isfinite(y)
        if y.shape[0] != times.size:
            raise ValueError(f"{times.size} times but {y.shape[0]} observation rows")
        if mask.shape != y.shape:
            raise ValueError("mask and y shapes differ")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "y", np.where(mask, y, np.nan))
        object.__setattr__(self, "mask", mask)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"y{j + 1}" for j in range(y.shape[1])))

    @classmethod
    def from_array(cls, times, y, names=()):
        y = np.asarray(y, dtype=float)
        return cls(times, y, np.isfinite(y), tuple(names))

    @property
    def T(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.y.shape[1]

    def filled(self, value=0.0):
        return np.where(self.mask, self.y, value)

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.times[rows], self.y[rows], self.mask[rows], self.names)

    def grid(self):
        return TimeGrid.from_raw(self.times)


@dataclass(frozen=True)
class Loadings:
    """Loadings theta (p, L) with local precisions phi and global gammas."""

    theta: np.ndarray
    phi: np.ndarray
    vartheta: np.ndarray

    @property
    def tau(self):
        return np.cumprod(self.vartheta)


@dataclass(frozen=True)
class FactorState:
    """Latent factor innovations nu (T, K); eta = psi + nu."""

    nu: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class PosteriorDraw:
    loadings: Loadings
    sigma2: np.ndarray
    paths: DictionaryPaths
    factors: FactorState
    variances: NgpVariances

    @property
    def theta(self):
        return self.loadings.theta

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class MeanCovPath:
    """mu (T, p) and Sigma (T, p, p)."""

    mu: np.ndarray
    sigma: np.ndarray


def compose_gamma(draw_or_theta, xi=None, psi=None, sigma2=None):
    """Mean and covariance path induced by a draw.

    Accepts either a :class:`PosteriorDraw` or the explicit arrays
    ``theta`` (p, L), ``xi`` (T, L, K), ``psi`` (T, K), ``sigma2`` (p,).
    """
    if isinstance(draw_or_theta, PosteriorDraw):
        d = draw_or_theta
        theta, xi, psi, sigma2 = d.theta, d.paths.xi, d.paths.psi, d.sigma2
    else:
        theta = draw_or_theta
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if xi.ndim != 3 or xi.shape[1] != theta.shape[1]:
        raise ValueError("xi must have shape (T, L, K) matching theta (p, L)")
    if psi.shape != (xi.shape[0], xi.shape[2]):
        raise ValueError("psi must have shape (T, K)")
    if sigma2.shape != (theta.shape[0],):
        raise ValueError("sigma2 must have shape (p,)")
    lam = theta[None] @ xi
    mu = np.einsum("tpk,tk->tp", lam, psi)
    sigma = lam @ lam.swapaxes(1, 2)
    idx = np.arange(theta.shape[0])
    sigma[:, idx, idx] += sigma2
    return MeanCovPath(mu, sigma)
