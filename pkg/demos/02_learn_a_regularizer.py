"""Learning a semidefinite-representable regularizer from data.

Data points are images ``y = L*(u v')`` of random rank-one matrices
under an unknown normalized map.  Starting from a noisy copy of the
truth, the learner alternates three steps -- fit low-rank preimages to
every data point, refit the map by least squares, renormalize -- and
the surrogate distance to the truth collapses within a few outer
iterations.
"""

import numpy as np

from sdreg.ensembles import (HaarLowRankSpec, gen_dataset,
                             gen_gaussian_map, gen_haar_lowrank)
from sdreg.evaluate import dist, probe_set, recovery_success
from sdreg.learning import LearnOptions, learn_semidefinite
from sdreg.linalg import LinearMapL
from sdreg.scaling import operator_sinkhorn_normalize

q, d, n, r = 4, 32, 200, 1
sigma = 0.25
seed = 0

truth, _ = operator_sinkhorn_normalize(gen_gaussian_map(q, d, seed))
spec = HaarLowRankSpec(q=q, r=r, s_min=1.0, s_max=1.0, n=n, seed=seed)
Y = gen_dataset(truth, gen_haar_lowrank(spec))
print("planted map: q = %d, d = %d; %d rank-%d data points" % (q, d, n, r))

rng = np.random.default_rng(seed + 1)
start = LinearMapL(truth.components
                   + sigma * rng.standard_normal((d, q, q)) / np.sqrt(d))
probes = probe_set(q, ell=100, seed=2)
print("initial guess: truth + noise (sigma = %g), dist = %.3e\n"
      % (sigma, dist(truth, start, probes)))

print("%5s  %14s  %14s" % ("outer", "fit residual", "dist to truth"))
trace_dist = []


def watch(t, L):
    value = dist(truth, L, probes)
    trace_dist.append(value)
    return recovery_success(value)


model = learn_semidefinite(Y, q, r, start,
                           LearnOptions(max_outer_iter=30), watch)
for t, value in enumerate(trace_dist, 1):
    print("%5d  %14.6e  %14.6e"
          % (t, model.trace.fit_residual[t - 1], value))

print("\nstopped after %d outer iterations (%s)"
      % (model.trace.iterations, model.trace.stop_reason))
print("recovered the planted regularizer: %s"
      % recovery_success(trace_dist[-1]))
