"""
Nested Gaussian process (nGP) dictionary elements in state-space form.

Each dictionary element f (a loadings element xi_lk or a mean element
psi_k) is carried together with its first derivative f' and its local
instantaneous mean A.  Between grid points t_i and t_{i+1} = t_i + delta
the discretized dynamics are

    f(t_{i+1})  = f(t_i) + delta f'(t_i)
    f'(t_{i+1}) = f'(t_i) + delta A(t_i) + w_f,    w_f ~ N(0, s2_f delta)
    A(t_{i+1})  = A(t_i) + w_A,                    w_A ~ N(0, s2_A delta)

Stacked states always use the ordering (all f, all f', all A), with the
(l, k) elements of a matrix-valued dictionary flattened column-major
(l fastest).
"""
from dataclasses import dataclass

import numpy as np

from .statespace import StateSpaceSystem

__all__ = [
    "NgpVariances",
    "DictionaryPaths",
    "TimeGrid",
    "ngp_transition_block",
    "stacked_transition",
    "assemble_xi_system",
    "assemble_psi_system",
    "vec",
    "unvec",
]


def vec(mat):
    """Column-major flattening of the trailing two axes."""
    mat = np.asarray(mat)
    return mat.swapaxes(-1, -2).reshape(mat.shape[:-2] + (-1,))


def unvec(v, L, K):
    v = np.asarray(v)
    return v.reshape(v.shape[:-1] + (K, L)).swapaxes(-1, -2)


@dataclass(frozen=True)
class NgpVariances:
    """State-equation variances: (L, K) arrays for xi, (K,) arrays for psi."""

    sigma2_xi: np.ndarray
    sigma2_A: np.ndarray
    sigma2_psi: np.ndarray
    sigma2_B: np.ndarray

    def validate(self):
        for name in ("sigma2_xi", "sigma2_A", "sigma2_psi", "sigma2_B"):
            arr = np.asarray(getattr(self, name))
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"{name} must be finite and strictly positive")
        return self


@dataclass(frozen=True)
class DictionaryPaths:
    """Dictionary states along the grid (time-major).

    ``xi``, ``xi_deriv``, ``A`` have shape (T, L, K); ``psi``, ``psi_deriv``
    and ``B`` have shape (T, K).
    """

    xi: np.ndarray
    xi_deriv: np.ndarray
    A: np.ndarray
    psi: np.ndarray
    psi_deriv: np.ndarray
    B: np.ndarray

    @classmethod
    def zeros(cls, T, L, K):
        z3 = np.zeros((T, L, K))
        z2 = np.zeros((T, K))
        return cls(z3, z3.copy(), z3.copy(), z2, z2.copy(), z2.copy())

    def xi_states(self):
        """Stacked xi states, shape (T, 3LK)."""
        return np.concatenate([vec(self.xi), vec(self.xi_deriv), vec(self.A)], axis=1)

    def psi_states(self):
        """Stacked psi states, shape (T, 3K)."""
        return np.concatenate([self.psi, self.psi_deriv, self.B], axis=1)

    def with_xi_states(self, states):
        L, K = self.xi.shape[1:]
        n = L * K
        return DictionaryPaths(
            unvec(states[:, :n], L, K),
            unvec(states[:, n:2 * n], L, K),
            unvec(states[:, 2 * n:], L, K),
            self.psi, self.psi_deriv, self.B,
        )

    def with_psi_states(self, states):
        K = self.psi.shape[1]
        return DictionaryPaths(
            self.xi, self.xi_deriv, self.A,
            states[:, :K].copy(), states[:, K:2 * K].copy(), states[:, 2 * K:].copy(),
        )


@dataclass(frozen=True)
class TimeGrid:
    """Observation times, raw and affinely rescaled.

    The map is ``t = (raw - origin) / scale``.  With the default fit
    (:meth:`from_raw`) the first time maps to one mean spacing past zero and
    the last to 1, so an equally spaced grid 1..T becomes i/T.
    """

    raw: np.ndarray
    origin: float
    scale: float

    @classmethod
    def from_raw(cls, raw):
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 1 or raw.size < 1:
            raise ValueError("times must be a non-empty 1-d array")
        if raw.size > 1 and np.any(np.diff(raw) <= 0):
            raise ValueError("times must be strictly increasing")
        if raw.size == 1:
            return cls(raw, raw[0] - 1.0, 1.0)
        spacing = (raw[-1] - raw[0]) / (raw.size - 1)
        origin = raw[0] - spacing
        return cls(raw, float(origin), float(raw[-1] - origin))

    def with_raw(self, raw):
        """Same affine map applied to other raw times."""
        raw = np.asarray(raw, dtype=float)
        if raw.size > 1 and np.any(np.diff(raw) <= 0):
            raise ValueError("times must be strictly increasing")
        return TimeGrid(raw, self.origin, self.scale)

    @property
    def t(self):
        return (self.raw - self.origin) / self.scale

    @property
    def delta(self):
        return np.diff(self.t)

    def __len__(self):
        return self.raw.size


def ngp_transition_block(delta):
    """3x3 transition and 3x2 noise loading of one nGP element.

    The noise covariance for this step is ``diag(s2_f * delta, s2_A * delta)``.
    """
    delta = float(delta)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    T = np.array([[1.0, delta, 0.0], [0.0, 1.0, delta], [0.0, 0.0, 1.0]])
    R = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return T, R


def stacked_transition(deltas, n_elements):
    """Transition (n-1, 3E, 3E) and loading (3E, 2E) for E stacked elements."""
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas <= 0):
        raise ValueError("grid spacings must be positive")
    eye = np.eye(n_elements)
    T = np.empty((deltas.size, 3 * n_elements, 3 * n_elements))
    for i, d in enumerate(deltas):
        T[i] = np.kron(ngp_transition_block(d)[0], eye)
    R = np.kron(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), eye)
    return T, R


def _noise_cov(deltas, s2_f, s2_A):
    s2 = np.concatenate([s2_f, s2_A])
    return deltas[:, None, None] * np.diag(s2)[None]


def _initial_cov(n_elements, var_mu, var_alpha):
    return np.diag(np.r_[np.full(2 * n_elements, float(var_mu)),
                         np.full(n_elements, float(var_alpha))])


def assemble_xi_system(theta, eta, grid, variances, sigma0, init_var_mu=100.0,
                       init_var_alpha=100.0, a1=None, P1=None):
    """State-space system for the xi dictionary given loadings and factors.

    Parameters
    ----------
    theta : (p, L) array
    eta : (T, K) array of latent factors
    grid : TimeGrid or (T,) array of rescaled times
    variances : NgpVariances
    sigma0 : (p,) idiosyncratic variances
    a1, P1 : optional initial moments overriding the default N(0, diag).

    The observation matrix at step i is ``[kron(eta_i^T, theta), 0]`` so
    that ``Z_i @ states_i == theta @ xi(t_i) @ eta_i``.
    """
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    p, L = theta.shape
    T_len, K = eta.shape
    t = grid.t if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if t.size != T_len:
        raise ValueError(f"grid has {t.size} points but eta has {T_len} rows")
    sigma0 = np.asarray(sigma0, dtype=float)
    if sigma0.shape != (p,):
        raise ValueError(f"sigma0 must have shape {(p,)}")
    s2x = np.asarray(variances.sigma2_xi, dtype=float)
    s2a = np.asarray(variances.sigma2_A, dtype=float)
    if s2x.shape != (L, K) or s2a.shape != (L, K):
        raise ValueError(f"xi variances must have shape {(L, K)}")
    E = L * K
    Z = np.zeros((T_len, p, 3 * E))
    # kron(eta_i^T, theta)[:, k*L + l] = eta_ik * theta[:, l]
    Z[:, :, :E] = np.einsum("ik,jl->ijkl", eta, theta).reshape(T_len, p, E)
    deltas = np.diff(t)
    Tm, R = stacked_transition(deltas, E)
    Q = _noise_cov(deltas, vec(s2x), vec(s2a))
    m = 3 * E
    return StateSpaceSystem(
        n_steps=T_len,
        Z=Z,
        H=np.diag(sigma0),
        T=Tm,
        R=R,
        Q=Q,
        a1=np.zeros(m) if a1 is None else np.asarray(a1, dtype=float),
        P1=_initial_cov(E, init_var_mu, init_var_alpha) if P1 is None else np.asarray(P1, dtype=float),
    )


def assemble_psi_system(theta, xi, grid, variances, sigma0, init_var_mu=100.0,
                        init_var_alpha=100.0, a1=None, P1=None):
    """State-space system for the psi dictionary with the factors integrated out.

    ``xi`` has shape (T, L, K).  The observation matrix at step i is
    ``[theta xi(t_i), 0]`` and the observation noise covariance is
    ``theta xi xi^T theta^T + diag(sigma0)``.
    """
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    p, L = theta.shape
    T_len, L2, K = xi.shape
    if L2 != L:
        raise ValueError(f"xi has {L2} rows, theta has {L} columns")
    t = grid.t if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if t.size != T_len:
        raise ValueError(f"grid has {t.size} points but xi has {T_len} steps")
    sigma0 = np.asarray(sigma0, dtype=float)
    if sigma0.shape != (p,):
        raise ValueError(f"sigma0 must have shape {(p,)}")
    s2p = np.asarray(variances.sigma2_psi, dtype=float)
    s2b = np.asarray(variances.sigma2_B, dtype=float)
    if s2p.shape != (K,) or s2b.shape != (K,):
        raise ValueError(f"psi variances must have shape {(K,)}")
    lam = theta[None] @ xi                      # (T, p, K)
    Z = np.zeros((T_len, p, 3 * K))
    Z[:, :, :K] = lam
    H = lam @ lam.swapaxes(1, 2) + np.diag(sigma0)[None]
    deltas = np.diff(t)
    Tm, R = stacked_transition(deltas, K)
    Q = _noise_cov(deltas, s2p, s2b)
    return StateSpaceSystem(
        n_steps=T_len,
        Z=Z,
        H=H,
        T=Tm,
        R=R,
        Q=Q,
        a1=np.zeros(3 * K) if a1 is None else np.asarray(a1, dtype=float),
        P1=_initial_cov(K, init_var_mu, init_var_alpha) if P1 is None else np.asarray(P1, dtype=float),
    )
