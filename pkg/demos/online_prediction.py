"""Online updating and one-step-ahead prediction on smooth data.

Usage: python demos/online_prediction.py [n_iter] [burn_in]   (defaults 1000 500)
"""
import sys

import numpy as np

from laf.diagnostics import PathSummary, hpd_coverage, summarize_chain
from laf.model import scenario_b_config
from laf.online import extract_fixed_params, one_step_errors, online_update, predict
from laf.sampler import run_gibbs
from laf.synth import ScenarioSpec, continue_generate, generate

n_iter = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
burn_in = int(sys.argv[2]) if len(sys.argv) > 2 else 500

data, truth = generate(ScenarioSpec.B(seed=0))
cfg = scenario_b_config(n_iter=n_iter, burn_in=burn_in, thin=5, seed=0)
chain = run_gibbs(cfg, data)
fixed = extract_fixed_params(chain)
print("fitted", data.T, "times; loadings, variances and end states now fixed")

# 20 new observations continuing the same generating process
rng = np.random.default_rng(1)
new, full = continue_generate(truth, 20, rng)
res = online_update(fixed, new, data, 8, cfg, rng, n_iter=1000, burn_in=200)
s = summarize_chain(res.chain)
sl = res.new_slice
s_new = PathSummary(s.mu_mean[sl], s.mu_lo[sl], s.mu_hi[sl], s.sigma_mean[sl],
                    s.sigma_lo[sl], s.sigma_hi[sl], s.n_draws)
print("online update: hpd coverage of new Sigma entries",
      round(hpd_coverage(s_new, full.gamma.sigma[data.T:]), 3))

# 3 steps ahead, treating the future as missing
pred = predict(fixed, data, 3, k=8, cfg=cfg, rng=rng, n_iter=1000, burn_in=200)
lo, hi = pred.intervals(0.95)
print("\n3-step predictive intervals for series 1:")
for h in range(3):
    print(f"  t={pred.times[h]:.0f}  [{lo[h, 0]:.3f}, {hi[h, 0]:.3f}]  realized {new.y[h, 0]:.3f}")

# one-step errors: (a) zero, (b) predictive mean, (c) conditional mean
errs = one_step_errors(fixed, data, new.subset(np.arange(8)), 8, cfg, rng, n_iter=600, burn_in=150)
print("\none-step mean squared errors")
for m, label in zip("abc", ("zero", "mean", "conditional")):
    print(f"  ({m}) {label:12s} {np.nanmean(errs[m] ** 2):.4f}")
