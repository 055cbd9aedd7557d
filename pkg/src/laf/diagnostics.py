"""
Chain diagnostics and summaries: split-chain PSRF, hpd intervals,
standardized squared-error tables and posterior path summaries.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "psrf_split",
    "hpd_interval",
    "hpd_bands",
    "lower_triangle",
    "squared_errors",
    "standardized_errors",
    "ErrorTable",
    "PathSummary",
    "summarize_chain",
    "hpd_coverage",
    "QUANTILE_COLUMNS",
]

QUANTILE_COLUMNS = ("Mean", "90th Quantile", "95th Quantile", "Max")


def psrf_split(samples, segments=6):
    """Potential scale reduction factor of one chain cut into equal pieces.

    The pieces are treated as separate chains.  Leading samples that do not
    fill a whole piece are dropped.  Values below one, which only arise from
    sampling noise in the between-piece variance, are reported as one.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if segments < 2:
        raise ValueError("need at least 2 segments")
    n = x.size // segments
    if n < 2:
        raise ValueError(f"need at least {2 * segments} samples, got {x.size}")
    chains = x[x.size - n * segments:].reshape(segments, n)
    W = chains.var(axis=1, ddof=1).mean()
    B_over_n = chains.mean(axis=1).var(ddof=1)
    if W == 0:
        return 1.0
    var_plus = (n - 1) / n * W + B_over_n
    return max(1.0, float(np.sqrt(var_plus / W)))


def hpd_interval(samples, prob=0.95):
    """Shortest interval spanning ceil(prob * n) sorted samples.

    Ties between equally short windows go to the leftmost one.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 20:
        raise ValueError(f"hpd needs at least 20 samples, got {n}")
    k = int(np.ceil(prob * n))
    widths = x[k - 1:] - x[:n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def hpd_bands(draws, prob=0.95):
    """Pointwise hpd bounds along axis 0; returns ``(lo, hi)`` arrays."""
    x = np.sort(np.asarray(draws, dtype=float), axis=0)
    n = x.shape[0]
    if n < 20:
        raise ValueError(f"hpd needs at least 20 samples, got {n}")
    k = int(np.ceil(prob * n))
    widths = x[k - 1:] - x[:n - k + 1]
    i = np.argmin(widths, axis=0)
    lo = np.take_along_axis(x, i[None], axis=0)[0]
    hi = np.take_along_axis(x, (i + k - 1)[None], axis=0)[0]
    return lo, hi


def lower_triangle(sigma):
    """Entries j >= k of a (..., p, p) stack, flattened on the last axis."""
    p = sigma.shape[-1]
    j, k = np.tril_indices(p)
    return sigma[..., j, k]


def squared_errors(est, truth):
    """Squared errors over distinct entries (lower triangle for matrices)."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    if est.ndim == 3:
        est, truth = lower_triangle(est), lower_triangle(truth)
    return (est - truth) ** 2


@dataclass
class ErrorTable:
    """Mean / 90th / 95th / max of standardized squared errors."""

    sigma: tuple
    mu: tuple

    def rows(self, label=""):
        return [
            (f"{label}Sigma",) + tuple(self.sigma),
            (f"{label}mu",) + tuple(self.mu),
        ]

    def format(self, label="estimate"):
        names = [f"Covariance {label}", f"Mean {label}"]
        w = max(len(n) for n in names) + 2
        lines = [" " * w + "".join(f"{c:>15s}" for c in QUANTILE_COLUMNS)]
        for name, vals in zip(names, (self.sigma, self.mu)):
            lines.append(name.ljust(w) + "".join(f"{v:15.4f}" for v in vals))
        return "\n".join(lines)


def _summary(values):
    v = np.asarray(values, dtype=float).ravel()
    return (float(v.mean()), float(np.quantile(v, 0.90)),
            float(np.quantile(v, 0.95)), float(v.max()))


def standardized_errors(est_mu, est_sigma, true_mu, true_sigma):
    """Squared errors divided by the squared range of the true process.

    Returns an :class:`ErrorTable` with (Mean, 90th, 95th, Max) for the
    covariance entries and for the mean entries.  ``est_mu`` may be None,
    in which case the mean row is all NaN.
    """
    r_sigma = float(np.ptp(np.asarray(true_sigma)))
    r_mu = float(np.ptp(np.asarray(true_mu)))
    if r_sigma == 0 or (est_mu is not None and r_mu == 0):
        raise ValueError("true process has zero range")
    s = _summary(squared_errors(est_sigma, true_sigma) / r_sigma ** 2)
    if est_mu is None:
        m = (np.nan,) * 4
    else:
        m = _summary(squared_errors(est_mu, true_mu) / r_mu ** 2)
    return ErrorTable(s, m)


@dataclass
class PathSummary:
    """Posterior mean and pointwise hpd bands of mu (T, p) and Sigma (T, p, p)."""

    mu_mean: np.ndarray
    mu_lo: np.ndarray
    mu_hi: np.ndarray
    sigma_mean: np.ndarray
    sigma_lo: np.ndarray
    sigma_hi: np.ndarray
    n_draws: int


def summarize_chain(chains, prob=0.95):
    """Summarize one chain or a list of chains into a :class:`PathSummary`.

    Means use every retained draw; hpd bands use the draw reservoirs.
    """
    if not isinstance(chains, (list, tuple)):
        chains = [chains]
    acc = None
    for ch in chains:
        g = ch.gamma if hasattr(ch, "gamma") else ch
        if g.count == 0:
            raise ValueError("empty chain")
        acc = g if acc is None else acc.merge(g)
    mean = acc.mean
    mu_d, sig_d = acc.samples()
    if mu_d.shape[0] >= 20:
        mu_lo, mu_hi = hpd_bands(mu_d, prob)
        s_lo, s_hi = hpd_bands(sig_d, prob)
    else:
        mu_lo, mu_hi = mu_d.min(axis=0), mu_d.max(axis=0)
        s_lo, s_hi = sig_d.min(axis=0), sig_d.max(axis=0)
    return PathSummary(mean.mu, mu_lo, mu_hi, mean.sigma, s_lo, s_hi, acc.count)


def hpd_coverage(summary, true_sigma, true_mu=None):
    """Fraction of distinct true Sigma entries (and mu entries) inside the bands."""
    t = lower_triangle(np.asarray(true_sigma))
    inside = (lower_triangle(summary.sigma_lo) <= t) & (t <= lower_triangle(summary.sigma_hi))
    cov_sigma = float(inside.mean())
    if true_mu is None:
        return cov_sigma
    m = np.asarray(true_mu)
    cov_mu = float(((summary.mu_lo <= m) & (m <= summary.mu_hi)).mean())
    return cov_sigma, cov_mu
