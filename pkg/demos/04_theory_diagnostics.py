"""Convergence diagnostics: when is local recovery provably benign?

The alternating learner converges locally when the factor ensemble is
nearly isotropic (small spread Delta relative to its scale Lambda),
the averaged lifted operator is small off the pinned subspace (Omega),
the map satisfies a restricted isometry on low-rank matrices, and the
map's spectral norm is controlled.  Each quantity is computable; the
thresholds printed here are sufficient conditions, so failing one is
informational, not fatal.
"""

import numpy as np

from sdreg.ensembles import (HaarLowRankSpec, covariance_stats,
                             gen_gaussian_map, gen_haar_lowrank, omega,
                             rip_estimate)
from sdreg.scaling import normalization_residual, \
    operator_sinkhorn_normalize

q, r = 3, 1

print("factor-ensemble statistics (q = %d, rank %d, unit spectrum):" % (q, r))
print("  %7s  %10s  %10s  %10s  %10s" % ("n", "Lambda", "Delta",
                                         "Delta/L", "Omega/L"))
for n in (100, 1000, 5000):
    Xs = gen_haar_lowrank(HaarLowRankSpec(q=q, r=r, s_min=1.0, s_max=1.0,
                                          n=n, seed=0))
    stats = covariance_stats(Xs)
    ratio = omega(Xs) / stats.lam
    print("  %7d  %10.3e  %10.3e  %10.4f  %10.4f"
          % (n, stats.lam, stats.delta, stats.delta / stats.lam, ratio))
print("  (Delta/Lambda falls as n grows; Omega/Lambda approaches r/q"
      " = %.3f)" % (r / q))

d = 2 * q * q
L, _ = operator_sinkhorn_normalize(gen_gaussian_map(q, d, seed=5))
Xs = gen_haar_lowrank(HaarLowRankSpec(q=q, r=r, s_min=1.0, s_max=1.0,
                                      n=4000, seed=0))
stats = covariance_stats(Xs)
k = min(4 * r, q)
checks = [
    ("Omega/Lambda", omega(Xs) / stats.lam, d / (40.0 * q ** 2)),
    ("Delta/Lambda", stats.delta / stats.lam,
     np.sqrt(d) / (150.0 * q ** 3)),
    ("rip_%d" % k, rip_estimate(L, k, trials=200, seed=1), 1.0 / 20.0),
    ("map norm^2", L.norm2() ** 2, 5.0 * q ** 2 / d),
]
print("\nsufficient-condition report for a normalized Gaussian map "
      "(d = %d):" % d)
print("  epsilon(L) = %.3e" % normalization_residual(L))
for name, value, threshold in checks:
    status = "ok" if value <= threshold else "above threshold"
    print("  %-12s  %10.4f  vs  %-8.4f  %s"
          % (name, value, threshold, status))
