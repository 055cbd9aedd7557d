"""
Time-varying linear Gaussian state-space models.

The model is

    y_i     = Z_i x_i + e_i,          e_i ~ N(0, H_i)
    x_{i+1} = T_i x_i + R_i w_i,      w_i ~ N(0, Q_i)
    x_1     ~ N(a_1, P_1)

for i = 1..n.  Every system matrix may be given either as a single 2-d
array (time-invariant) or as a 3-d array whose leading axis is the step.
Transition quantities (T, R, Q) are only read for i = 1..n-1.

Observations are an ``(n, p)`` array together with a boolean mask of the
same shape (True = observed).  Missing components are dropped from the
observation equation at that step, so a fully masked step carries no
information and contributes nothing to the log-likelihood.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "StateSpaceSystem",
    "ObservationSequence",
    "SmootherOutput",
    "NumericalError",
    "kalman_filter",
    "kalman_smoother",
    "simulation_smoother",
    "simulate",
]

_LOG2PI = np.log(2.0 * np.pi)
# smallest admissible pivot of the innovation covariance, relative to its scale
_PIVOT_RTOL = 1e-13


class NumericalError(ArithmeticError):
    """Raised when an innovation covariance cannot be factorized."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def _at(arr, i):
    return arr[i] if arr.ndim == 3 else arr


def _check_psd(name, mat):
    mat = np.asarray(mat)
    if not np.allclose(mat, mat.swapaxes(-1, -2), rtol=1e-8, atol=1e-12):
        raise ValueError(f"{name} is not symmetric")
    scale = max(float(np.abs(mat).max(initial=0.0)), 1.0)
    if mat.ndim == 2:
        mat = mat[None]
    for k, m in enumerate(mat):
        if m.size and np.linalg.eigvalsh(m).min() < -1e-10 * scale * m.shape[0]:
            raise ValueError(f"{name} is not positive semi-definite (step {k})")


@dataclass(frozen=True)
class StateSpaceSystem:
    """System matrices of a linear Gaussian state-space model.

    Shapes (``n`` steps, state dim ``m``, obs dim ``p``, noise dim ``r``):
    ``Z`` (p, m) or (n, p, m); ``H`` (p, p) or (n, p, p); ``T`` (m, m) or
    (n-1, m, m); ``R`` (m, r) or (n-1, m, r); ``Q`` (r, r) or (n-1, r, r);
    ``a1`` (m,); ``P1`` (m, m).
    """

    n_steps: int
    Z: np.ndarray
    H: np.ndarray
    T: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    a1: np.ndarray
    P1: np.ndarray

    @property
    def state_dim(self):
        return self.a1.shape[0]

    @property
    def obs_dim(self):
        return self.Z.shape[-2]

    def validate(self):
        n, m, p = self.n_steps, self.state_dim, self.obs_dim
        r = self.R.shape[-1]
        if n < 1:
            raise ValueError("n_steps must be >= 1")
        expect = {
            "Z": (p, m), "H": (p, p), "T": (m, m), "R": (m, r), "Q": (r, r),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape[-2:] != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected (..., {shape})")
            if arr.ndim == 3:
                need = n if name in ("Z", "H") else n - 1
                if arr.shape[0] < need:
                    raise ValueError(f"{name} has {arr.shape[0]} steps, need {need}")
            elif arr.ndim != 2:
                raise ValueError(f"{name} must be 2-d or 3-d")
        if self.P1.shape != (m, m):
            raise ValueError(f"P1 has shape {self.P1.shape}, expected {(m, m)}")
        _check_psd("P1", self.P1)
        _check_psd("H", self.H)
        _check_psd("Q", self.Q)
        return self


@dataclass(frozen=True)
class ObservationSequence:
    """Observations ``y`` (n, p) and mask (n, p), True where observed."""

    y: np.ndarray
    mask: np.ndarray

    @classmethod
    def from_array(cls, y, mask=None):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if mask is None:
            mask = ~np.isnan(y)
        mask = np.asarray(mask, dtype=bool) & ~np.isnan(y)
        return cls(np.where(mask, y, 0.0), mask)

    @property
    def n_steps(self):
        return self.y.shape[0]


@dataclass
class SmootherOutput:
    """Filter and (optionally) smoother moments.

    ``predicted_*`` are moments of x_i given y_1..y_{i-1}; ``filtered_*``
    given y_1..y_i; ``smoothed_*`` given all observations.
    """

    predicted_mean: np.ndarray
    predicted_cov: np.ndarray
    filtered_mean: np.ndarray
    filtered_cov: np.ndarray
    loglik: float
    loglik_terms: np.ndarray
    smoothed_mean: Optional[np.ndarray] = None
    smoothed_cov: Optional[np.ndarray] = None


class _FilterPass:
    """Raw quantities of one forward pass, kept for the backward pass."""

    __slots__ = ("a", "P", "af", "Pf", "obs", "Zo", "Finv_v", "Finv", "Kf", "ll")

    def __init__(self, n, m):
        self.a = np.empty((n, m))
        self.P = np.empty((n, m, m))
        self.af = np.empty((n, m))
        self.Pf = np.empty((n, m, m))
        self.obs = [None] * n
        self.Zo = [None] * n
        self.Finv_v = [None] * n
        self.Finv = [None] * n
        self.Kf = [None] * n
        self.ll = np.zeros(n)


def _run_filter(sys, y, mask, a1=None):
    n, m = sys.n_steps, sys.state_dim
    out = _FilterPass(n, m)
    a = sys.a1 if a1 is None else a1
    P = sys.P1
    Tc = sys.T if sys.T.ndim == 2 else None
    RQRc = sys.R @ sys.Q @ sys.R.T if sys.R.ndim == 2 and sys.Q.ndim == 2 else None
    for i in range(n):
        out.a[i] = a
        out.P[i] = P
        o = np.flatnonzero(mask[i])
        if o.size:
            Z = _at(sys.Z, i)
            H = _at(sys.H, i)
            if o.size < Z.shape[0]:
                Z = Z[o]
                H = H[np.ix_(o, o)]
            v = y[i, o] - Z @ a
            PZt = P @ Z.T
            F = Z @ PZt + H
            F = 0.5 * (F + F.T)
            try:
                L = np.linalg.cholesky(F)
            except np.linalg.LinAlgError:
                raise NumericalError(
                    f"innovation covariance not positive definite at step {i}", step=i
                ) from None
            d = np.diagonal(L)
            if d.min() ** 2 <= _PIVOT_RTOL * max(np.abs(np.diagonal(F)).max(), 1e-300):
                raise NumericalError(
                    f"innovation covariance numerically singular at step {i}", step=i
                )
            Linv = np.linalg.inv(L)
            Finv = Linv.T @ Linv
            Finv_v = Finv @ v
            Kf = PZt @ Finv
            a = a + PZt @ Finv_v
            P = P - Kf @ PZt.T
            P = 0.5 * (P + P.T)
            out.ll[i] = -0.5 * (o.size * _LOG2PI + 2.0 * np.log(d).sum() + v @ Finv_v)
            out.obs[i] = o
            out.Zo[i] = Z
            out.Finv_v[i] = Finv_v
            out.Finv[i] = Finv
            out.Kf[i] = Kf
        out.af[i] = a
        out.Pf[i] = P
        if i < n - 1:
            Tm = Tc if Tc is not None else sys.T[i]
            RQR = RQRc
            if RQR is None:
                R = _at(sys.R, i)
                RQR = R @ _at(sys.Q, i) @ R.T
            a = Tm @ a
            P = Tm @ P @ Tm.T + RQR
            P = 0.5 * (P + P.T)
    return out


def _backward(sys, fp, with_cov):
    n, m = sys.n_steps, sys.state_dim
    mean = np.empty((n, m))
    cov = np.empty((n, m, m)) if with_cov else None
    r = np.zeros(m)
    N = np.zeros((m, m)) if with_cov else None
    eye = np.eye(m)
    for i in range(n - 1, -1, -1):
        # on entry r, N belong to step i+1; convert to r_{i-1}, N_{i-1}
        if i < n - 1:
            Tm = _at(sys.T, i)
            s = Tm.T @ r
            if with_cov:
                S = Tm.T @ N @ Tm
        else:
            s = r
            if with_cov:
                S = N
        if fp.obs[i] is not None:
            Z = fp.Zo[i]
            Kf = fp.Kf[i]
            r = Z.T @ (fp.Finv_v[i] - Kf.T @ s) + s
            if with_cov:
                M = eye - Kf @ Z
                N = Z.T @ fp.Finv[i] @ Z + M.T @ S @ M
        else:
            r = s
            if with_cov:
                N = S
        P = fp.P[i]
        mean[i] = fp.a[i] + P @ r
        if with_cov:
            V = P - P @ N @ P
            cov[i] = 0.5 * (V + V.T)
    return mean, cov


def _prepare(sys, obs):
    if obs.y.shape != obs.mask.shape:
        raise ValueError("y and mask shapes differ")
    if obs.y.shape != (sys.n_steps, sys.obs_dim):
        raise ValueError(
            f"observations have shape {obs.y.shape}, system expects "
            f"{(sys.n_steps, sys.obs_dim)}"
        )
    return np.where(obs.mask, obs.y, 0.0), obs.mask


def kalman_filter(sys, obs):
    """Run the Kalman filter.

    Returns a :class:`SmootherOutput` with predicted and filtered moments
    and the log-likelihood of the observed components.  Raises
    :class:`NumericalError` naming the step if an innovation covariance
    is not numerically positive definite.
    """
    y, mask = _prepare(sys, obs)
    fp = _run_filter(sys, y, mask)
    return SmootherOutput(
        predicted_mean=fp.a,
        predicted_cov=fp.P,
        filtered_mean=fp.af,
        filtered_cov=fp.Pf,
        loglik=float(fp.ll.sum()),
        loglik_terms=fp.ll,
    )


def kalman_smoother(sys, obs):
    """Filter plus fixed-interval smoother (exact conditional moments)."""
    y, mask = _prepare(sys, obs)
    fp = _run_filter(sys, y, mask)
    mean, cov = _backward(sys, fp, with_cov=True)
    return SmootherOutput(
        predicted_mean=fp.a,
        predicted_cov=fp.P,
        filtered_mean=fp.af,
        filtered_cov=fp.Pf,
        loglik=float(fp.ll.sum()),
        loglik_terms=fp.ll,
        smoothed_mean=mean,
        smoothed_cov=cov,
    )


def _psd_factor(mat):
    """Return F with F F^T = mat for a PSD matrix (singular allowed)."""
    if mat.size == 0:
        return mat
    d = np.diagonal(mat)
    if np.count_nonzero(mat - np.diag(d)) == 0:
        return np.diag(np.sqrt(np.clip(d, 0.0, None)))
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (mat + mat.T))
        return V * np.sqrt(np.clip(w, 0.0, None))


def simulate(sys, rng):
    """Draw one unconditional (state path, observation) pair.

    Returns ``(x, y)`` with shapes (n, m) and (n, p).
    """
    n, m, p = sys.n_steps, sys.state_dim, sys.obs_dim
    x = np.empty((n, m))
    y = np.empty((n, p))
    x[0] = sys.a1 + _psd_factor(sys.P1) @ rng.standard_normal(m)
    Hf = _psd_factor(sys.H) if sys.H.ndim == 2 else None
    Qf = _psd_factor(sys.Q) if sys.Q.ndim == 2 else None
    for i in range(n):
        Hi = Hf if Hf is not None else _psd_factor(sys.H[i])
        y[i] = _at(sys.Z, i) @ x[i] + Hi @ rng.standard_normal(p)
        if i < n - 1:
            Qi = Qf if Qf is not None else _psd_factor(sys.Q[i])
            w = Qi @ rng.standard_normal(Qi.shape[0])
            x[i + 1] = _at(sys.T, i) @ x[i] + _at(sys.R, i) @ w
    return x, y


def _simulate_batch(sys, rng, size):
    n, m, p = sys.n_steps, sys.state_dim, sys.obs_dim
    x = np.empty((size, n, m))
    y = np.empty((size, n, p))
    x[:, 0] = sys.a1 + rng.standard_normal((size, m)) @ _psd_factor(sys.P1).T
    for i in range(n):
        Hf = _psd_factor(_at(sys.H, i))
        y[:, i] = x[:, i] @ _at(sys.Z, i).T + rng.standard_normal((size, p)) @ Hf.T
        if i < n - 1:
            Qf = _psd_factor(_at(sys.Q, i))
            w = rng.standard_normal((size, Qf.shape[0])) @ Qf.T
            x[:, i + 1] = x[:, i] @ _at(sys.T, i).T + w @ _at(sys.R, i).T
    return x, y


def _batch_means(sys, fp, y):
    """Smoothed means for a batch of data sets sharing one filter pass.

    ``fp`` holds the (data-independent) gains; ``y`` is (size, n, p) with
    zeros in masked cells and the initial mean is zero.
    """
    n, m = sys.n_steps, sys.state_dim
    size = y.shape[0]
    a = np.zeros((size, m))
    a_pred = np.empty((size, n, m))
    fv = [None] * n
    for i in range(n):
        a_pred[:, i] = a
        if fp.obs[i] is not None:
            Z = fp.Zo[i]
            v = y[:, i, fp.obs[i]] - a @ Z.T
            fv[i] = v @ fp.Finv[i]
            a = a + v @ fp.Kf[i].T
        if i < n - 1:
            a = a @ _at(sys.T, i).T
    mean = np.empty((size, n, m))
    r = np.zeros((size, m))
    for i in range(n - 1, -1, -1):
        s = r @ _at(sys.T, i) if i < n - 1 else r
        if fp.obs[i] is not None:
            r = (fv[i] - s @ fp.Kf[i]) @ fp.Zo[i] + s
        else:
            r = s
        mean[:, i] = a_pred[:, i] + r @ fp.P[i]
    return mean


def simulation_smoother(sys, obs, rng, size=None):
    """Draw state paths from p(x_1..x_n | observed y).

    Mean-correction scheme: simulate an unconditional pair (x+, y+) from
    the system, smooth the data difference y - y+ with a zero initial
    mean, and add the result to x+.  Returns an ``(n, m)`` array, or
    ``(size, n, m)`` when ``size`` is given; batched draws share a single
    filter pass.
    """
    y, mask = _prepare(sys, obs)
    if size is None:
        x_plus, y_plus = simulate(sys, rng)
        fp = _run_filter(sys, np.where(mask, y - y_plus, 0.0), mask,
                         a1=np.zeros(sys.state_dim))
        correction, _ = _backward(sys, fp, with_cov=False)
        return x_plus + correction
    x_plus, y_plus = _simulate_batch(sys, rng, size)
    fp = _run_filter(sys, np.zeros_like(y), mask, a1=np.zeros(sys.state_dim))
    return x_plus + _batch_means(sys, fp, np.where(mask, y - y_plus, 0.0))
