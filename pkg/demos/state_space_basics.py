"""Kalman smoothing and simulation smoothing on a local linear trend."""
import numpy as np

from laf.statespace import ObservationSequence, StateSpaceSystem, kalman_smoother, simulation_smoother

rng = np.random.default_rng(0)
n = 60

# level and slope, observed with noise; every fifth point missing
T = np.array([[1.0, 1.0], [0.0, 1.0]])
sys = StateSpaceSystem(n, np.array([[1.0, 0.0]]), np.array([[0.5]]), T, np.eye(2),
                       np.diag([0.01, 0.001]), np.zeros(2), 10.0 * np.eye(2)).validate()
truth = np.cumsum(np.cumsum(rng.normal(0, 0.03, n))) + np.sin(np.arange(n) / 8)
y = (truth + rng.normal(0, 0.7, n))[:, None]
y[::5] = np.nan

out = kalman_smoother(sys, ObservationSequence.from_array(y))
print("log-likelihood of observed points:", round(out.loglik, 3))

# 2000 joint posterior paths in one batched call
paths = simulation_smoother(sys, ObservationSequence.from_array(y), rng, size=2000)
lo, hi = np.quantile(paths[:, :, 0], [0.025, 0.975], axis=0)
print("max gap between draw mean and smoother mean:",
      float(np.abs(paths[:, :, 0].mean(axis=0) - out.smoothed_mean[:, 0]).max()))
print("share of true level inside 95% bands:", float(np.mean((lo <= truth) & (truth <= hi))))

for i in range(3, n, 10):
    print(f"t={i:2d}  y={y[i, 0]:7.3f}  level={out.smoothed_mean[i, 0]:7.3f}  "
          f"band=[{lo[i]:6.3f}, {hi[i]:6.3f}]  truth={truth[i]:6.3f}")
