"""
Pilot and benchmark estimators: moving-average means and EWMA covariances.
"""
import numpy as np

from .diagnostics import squared_errors

__all__ = ["moving_average_mean", "ewma_cov", "default_ewma_init", "select_lambda"]


def moving_average_mean(data, window):
    """Centered equally weighted moving average over observed cells.

    The window shrinks at the boundaries; for even ``window`` the extra
    point is taken from the past.  Cells with no observed neighbour in the
    window are NaN.  Returns a (T, p) array.
    """
    window = int(window)
    if window < 1:
        raise ValueError("window must be >= 1")
    y = data.filled(0.0)
    w = data.mask.astype(float)
    T = data.T
    cs_y = np.vstack([np.zeros(data.p), np.cumsum(y, axis=0)])
    cs_w = np.vstack([np.zeros(data.p), np.cumsum(w, axis=0)])
    back = window // 2
    fwd = window - 1 - back
    idx = np.arange(T)
    lo = np.clip(idx - back, 0, T)
    hi = np.clip(idx + fwd + 1, 0, T)
    num = cs_y[hi] - cs_y[lo]
    den = cs_w[hi] - cs_w[lo]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def default_ewma_init(data, mu_est, n_init=10):
    """Sample covariance of the first ``n_init`` residuals (pairwise complete)."""
    r = (data.filled(np.nan) - mu_est)[:n_init]
    p = data.p
    S = np.zeros((p, p))
    for j in range(p):
        for k in range(j, p):
            ok = np.isfinite(r[:, j]) & np.isfinite(r[:, k])
            if ok.sum() >= 2:
                a = r[ok, j] - r[ok, j].mean()
                b = r[ok, k] - r[ok, k].mean()
                S[j, k] = S[k, j] = a @ b / (ok.sum() - 1)
    w, V = np.linalg.eigh(S)
    return (V * np.clip(w, 0.0, None)) @ V.T


def ewma_cov(data, mu_est, lam, init=None):
    """EWMA covariance path.

    ``Sigma(t_1) = init`` and for i > 1

        Sigma(t_i) = (1 - lam) r_{i-1} r_{i-1}^T + lam Sigma(t_{i-1})

    with residuals ``r = y - mu_est``.  If some components of r_{i-1} are
    missing, the observed block is updated as above, the missing block is
    kept, and the cross block is multiplied by lam, which keeps every
    matrix positive semi-definite.  Returns a (T, p, p) array.
    """
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    p, T = data.p, data.T
    if init is None:
        init = default_ewma_init(data, mu_est)
    init = np.asarray(init, dtype=float)
    if init.shape != (p, p) or not np.allclose(init, init.T):
        raise ValueError("init must be a symmetric (p, p) matrix")
    if np.linalg.eigvalsh(init).min() < -1e-10 * max(1.0, np.abs(init).max()):
        raise ValueError("init must be positive semi-definite")
    resid = data.filled(np.nan) - np.asarray(mu_est, dtype=float)
    ok = data.mask & np.isfinite(resid)
    out = np.empty((T, p, p))
    S = init.copy()
    out[0] = S
    for i in range(1, T):
        o = ok[i - 1]
        r = np.where(o, resid[i - 1], 0.0)
        if o.all():
            S = (1.0 - lam) * np.outer(r, r) + lam * S
        elif o.any():
            # lam * S + (1 - lam) * blockdiag(r_o r_o^T, S_mm)
            M = np.zeros((p, p))
            M[np.ix_(o, o)] = np.outer(r[o], r[o])
            m = ~o
            M[np.ix_(m, m)] = S[np.ix_(m, m)]
            S = lam * S + (1.0 - lam) * M
        out[i] = S
    return out


def select_lambda(data, truth_sigma, lambdas, mu_est, init=None):
    """Grid search for the EWMA smoothing parameter.

    Minimizes the mean squared error between EWMA and true covariance
    entries; ties go to the larger lambda.  Returns ``(best, table)`` where
    ``table`` is a list of ``(lambda, mse)`` rows in grid order.
    """
    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("lambda grid is empty")
    if init is None:
        init = default_ewma_init(data, mu_est)
    table = []
    for lam in lambdas:
        est = ewma_cov(data, mu_est, lam, init)
        table.append((float(lam), float(squared_errors(est, truth_sigma).mean())))
    best = min(table, key=lambda row: (row[1], -row[0]))[0]
    return best, table
