"""The low-rank fitting solvers behind the learner.

Two ways to fit a matrix to affine measurements: hard rank projection
(projected gradient onto the rank-r variety) and the nuclear-norm
proximal route (soft singular-value shrinkage).  Both operate through
the same measurement map; the sparse analogue solves the l1 problem
for the dictionary-learning baseline.
"""

import numpy as np

from sdreg.ensembles import gen_gaussian_map
from sdreg.linalg import apply_map
from sdreg.solvers import SolverOptions, lasso_solve, nuclear_prox_solve, svp

rng = np.random.default_rng(3)

# --- exact recovery by hard rank projection --------------------------------
q, r = 6, 2
d = 6 * q * r
L = gen_gaussian_map(q, d, seed=11)
U = rng.standard_normal((q, r))
V = rng.standard_normal((q, r))
X_star = U @ V.T
y = apply_map(L, X_star)

X, trace = svp(L, y, r, SolverOptions(tol=1e-12))
print("rank projection: q = %d, rank = %d, %d measurements" % (q, r, d))
print("  %d iterations, final residual %.3e"
      % (trace.iterations, trace.final_residual))
print("  relative recovery error %.3e"
      % (np.linalg.norm(X - X_star) / np.linalg.norm(X_star)))

# --- noisy measurements: the nuclear-norm proximal route --------------------
noisy = y + 0.01 * rng.standard_normal(d)
print("\nnuclear-norm fit on noisy measurements:")
print("  %8s  %12s  %6s" % ("lambda", "rel. error", "rank"))
for lam in (0.3, 0.1, 0.03, 0.01):
    X, trace = nuclear_prox_solve(L, noisy, lam)
    rel = np.linalg.norm(X - X_star) / np.linalg.norm(X_star)
    rank = int(np.sum(np.linalg.svd(X, compute_uv=False) > 1e-8))
    print("  %8g  %12.3e  %6d" % (lam, rel, rank))

# --- the sparse analogue -----------------------------------------------------
# the l1 fit shrinks every coefficient toward zero and lets a couple of
# correlated atoms soak up the slack; coefficients above the penalty
# level are the real support, and refitting on it removes the bias
p, s, dd = 24, 3, 16
D = rng.standard_normal((dd, p))
D /= np.linalg.norm(D, axis=0)
support_star = np.sort(rng.choice(p, size=s, replace=False))
x_star = np.zeros(p)
x_star[support_star] = rng.uniform(0.5, 1.5, s) * rng.choice([-1, 1], s)
obs = D @ x_star

lam = 0.1 * np.max(np.abs(D.T @ obs))
x, _ = lasso_solve(D, obs, lam, SolverOptions(tol=1e-14, max_iter=20000))
support = np.flatnonzero(np.abs(x) > lam)
refit = np.zeros(p)
refit[support], *_ = np.linalg.lstsq(D[:, support], obs, rcond=None)
print("\nl1 fit of a %d-sparse code over %d atoms:" % (s, p))
print("  atoms above the penalty level: %s (planted: %s)"
      % (support, support_star))
print("  largest residue on the other atoms: %.3e"
      % np.max(np.abs(x[np.setdiff1d(np.arange(p), support)])))
print("  max coefficient error, shrunk/refit: %.3e / %.3e"
      % (np.max(np.abs(x - x_star)), np.max(np.abs(refit - x_star))))
