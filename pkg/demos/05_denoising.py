"""Proximal denoising with a learned regularizer.

Train a semidefinite-representable norm on clean draws from a planted
model, corrupt held-out draws with Gaussian noise, and denoise by the
proximal step of the learned norm.  The learned model beats generic
Euclidean shrinkage because its unit ball hugs the data manifold; the
representation-complexity score summarizes how compactly it does so.
"""

import numpy as np

from sdreg.ensembles import (HaarLowRankSpec, gen_dataset,
                             gen_gaussian_map, gen_haar_lowrank)
from sdreg.evaluate import (denoise_experiment, representation_complexity,
                            snr)
from sdreg.learning import LearnOptions
from sdreg.scaling import operator_sinkhorn_normalize

q, d, r = 3, 12, 1
n_train, n_test = 120, 30
sigma = 0.2

truth, _ = operator_sinkhorn_normalize(gen_gaussian_map(q, d, seed=2))


def draws(n, seed):
    spec = HaarLowRankSpec(q=q, r=r, s_min=0.8, s_max=1.2, n=n, seed=seed)
    return gen_dataset(truth, gen_haar_lowrank(spec))


train, test = draws(n_train, seed=3), draws(n_test, seed=4)
grid = [0.05, 0.1, 0.2, 0.4, 0.8]
configs = [{"kind": "semidefinite", "q": q, "r": r, "name": "learned",
            "init": truth, "opts": LearnOptions(max_outer_iter=10)}]

table = denoise_experiment(train, test, sigma, grid, configs, seed=5)
print("noise level %g; realized signal-to-noise ratio %.1f"
      % (sigma, table.snr))
print("\n%10s  %8s  %14s" % ("model", "lambda", "normalized MSE"))
for name, lam, nmse in table.rows:
    print("%10s  %8g  %14.4f" % (name, lam, nmse))
print("\nbest per model:")
for name, (lam, nmse) in table.best.items():
    print("  %10s  lambda = %-6g  normalized MSE = %.4f"
          % (name, lam, nmse))

cost = representation_complexity("semidefinite", q, r, d, n_train)
print("\nrepresentation complexity of the learned model: "
      "%.2f parameters per data point" % cost)
print("(a %d-dimensional signal stored raw costs %d)" % (d, d))
