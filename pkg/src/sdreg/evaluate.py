r"""Evaluation and application of learned regularizers.

Two maps that differ by a rank-preserving change of variables define the
same regularizer, so raw parameter distance is meaningless.  The
``dist`` surrogate compares regularizers instead: it fixes a set of
unit-Frobenius rank-one probe matrices, pushes each through the
reference map, and measures how well the other map can reproduce those
atoms with rank-one preimages,

    dist(Lstar, L) = (1/ell) * sum_k  min_{rank(X)<=1}
                     || Lstar(s_k t_k') - L(X) ||^2.

Each inner minimum is the rank-one projected-gradient problem;
``recovery_success`` declares success when the average drops strictly
below 1e-3.

Denoising applies a learned regularizer proximally:

    minimize_x  1/2 ||y_obs - x||^2 + lambda * ||x||

with the norm given by the learned unit ball.  Both learned-ball norms
admit lifted reformulations -- ``||x|| = inf { ||X||_* : L(X) = x }``
(semidefinite) and ``inf { ||c||_1 : D c = x }`` (polyhedral) -- so the
joint problem over (x, X) collapses to an unconstrained nuclear-norm or
l1 problem in the lifted variable, solved by the first-order routines in
:mod:`sdreg.solvers`.

``representation_complexity`` accounts for the average parameter count
per data point of each description: ``2qr - r^2 + d q^2 / n``
(semidefinite) versus ``2s + d p / n`` (polyhedral).
"""

import numpy as np

from collections import namedtuple

from .exceptions import NumericalError
from . import seeds
from .linalg import LinearMapL, adjoint_map, apply_map, truncate_rank
from .learning import (LearnOptions, RegularizerModel, column_normalize,
                       learn_polyhedral, learn_semidefinite)
from .scaling import operator_sinkhorn_normalize
from .solvers import SolverOptions, lasso_solve, nuclear_prox_solve, svp


__all__ = [
    "DistProbeSet", "DenoiseResult", "probe_set", "dist",
    "recovery_success", "prox_denoise_semidefinite",
    "prox_denoise_polyhedral", "representation_complexity",
    "snr", "denoise_experiment", "DenoiseTable",
]

SUCCESS_THRESHOLD = 1e-3

#: Residual-reduction threshold below which the zero-started rank-one
#: probe solve is considered stalled and restarted from the adjoint.
_STALL_TOL = 1e-12
_STALL_ITERS = 10


class DistProbeSet(object):
    """A fixed set of unit-Frobenius rank-one probe matrices.

    Parameters
    ----------
    probes : ndarray, shape (ell, q, q)
        Each slice must be rank one with unit Frobenius norm (to 1e-12).
    seed : int
        The master seed the probes were drawn from (kept for
        reproducibility audits).
    """

    def __init__(self, probes, seed):
        probes = np.ascontiguousarray(probes, dtype=np.float64)
        if probes.ndim != 3 or probes.shape[1] != probes.shape[2]:
            raise ValueError("probes must be a stack of square matrices")
        if not np.isfinite(probes).all():
            raise ValueError("probes must be finite")
        for k, P in enumerate(probes):
            s = np.linalg.svd(P, compute_uv=False)
            if abs(s[0] - 1.0) > 1e-12 or (s.size > 1 and s[1] > 1e-12):
                raise ValueError("probe %d is not unit-norm rank one" % k)
        self.probes = probes
        self.probes.setflags(write=False)
        self.seed = int(seed)

    @property
    def ell(self):
        return self.probes.shape[0]

    @property
    def q(self):
        return self.probes.shape[1]

    def __repr__(self):
        return "DistProbeSet(ell=%d, q=%d, seed=%d)" % (
            self.ell, self.q, self.seed)


DenoiseResult = namedtuple("DenoiseResult",
                           ["estimate", "lifted", "objective", "lam"])
"""``estimate`` is the denoised signal, ``lifted`` the optimal lifted
variable (matrix X or coefficient vector), ``objective`` the attained
value of the lifted problem at weight ``lam``."""


def probe_set(q, ell, seed):
    """Draw ``ell`` unit-Frobenius rank-one probes of size q x q.

    Probe k is ``outer(u, v) / (||u|| ||v||)`` with u, v standard normal
    from the per-probe substream ``(seed, "probes", k)``, so any prefix
    of a larger probe set is reproducible.
    """
    if q < 1 or ell < 1:
        raise ValueError("q and ell must be positive")
    probes = np.empty((ell, q, q))
    for k in range(ell):
        rng = seeds.substream(seed, "probes", k)
        u = rng.standard_normal(q)
        v = rng.standard_normal(q)
        probes[k] = np.outer(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return DistProbeSet(probes, seed)


def _rank_one_fit(L, y, opts):
    """Best rank-one fit residual ||y - L(X)||, with stall restart.

    Runs the projected-gradient solve from zero; if the first few
    iterations barely reduce the residual, restarts from the truncated
    adjoint image, which points at the dominant atom of y under L.
    """
    burn = SolverOptions(max_iter=min(_STALL_ITERS, opts.max_iter),
                         tol=opts.tol, damping=opts.damping,
                         step_size=opts.step_size)
    X, tr = svp(L, y, 1, burn)
    if np.linalg.norm(y) - tr.final_residual < _STALL_TOL:
        start = truncate_rank(adjoint_map(L, y), 1)
    else:
        start = X
    rest = SolverOptions(max_iter=opts.max_iter, tol=opts.tol,
                         damping=opts.damping, step_size=opts.step_size,
                         initial=start)
    X, tr = svp(L, y, 1, rest)
    return tr.final_residual


def dist(Lstar, L, probes, opts=None):
    """Monte-Carlo surrogate distance from the regularizer of Lstar to L.

    Parameters
    ----------
    Lstar, L : LinearMapL
        Must share (d, q).
    probes : DistProbeSet
    opts : SolverOptions, optional
        Options for the inner rank-one solves (default tol 1e-10, full
        step).

    Returns
    -------
    float
        ``(1/ell) sum_k min_{rank-1 X} ||Lstar(probe_k) - L(X)||^2``;
        nonnegative, zero when L expresses every probe atom exactly.

    Raises
    ------
    NumericalError
        Solver failures, tagged with the probe index.
    """
    if (Lstar.q, Lstar.d) != (L.q, L.d):
        raise ValueError("maps have mismatched shapes: (d=%d, q=%d) vs "
                         "(d=%d, q=%d)" % (Lstar.d, Lstar.q, L.d, L.q))
    if probes.q != L.q:
        raise ValueError("probe size %d does not match q=%d"
                         % (probes.q, L.q))
    opts = opts or SolverOptions(tol=1e-10)
    total = 0.0
    for k in range(probes.ell):
        y = apply_map(Lstar, probes.probes[k])
        try:
            total += _rank_one_fit(L, y, opts) ** 2
        except NumericalError as exc:
            raise type(exc)("probe %d: %s" % (k, exc)) from exc
    return total / probes.ell


def recovery_success(dist_value, threshold=SUCCESS_THRESHOLD):
    """Declare recovery when the surrogate distance is strictly below
    the threshold.

    Raises
    ------
    ValueError
        If ``dist_value`` is negative.
    """
    if dist_value < 0:
        raise ValueError("dist values are nonnegative")
    return bool(dist_value < threshold)


def _model_map(model, kind):
    if isinstance(model, RegularizerModel):
        if model.kind != kind:
            raise ValueError("expected a %s model, got %s"
                             % (kind, model.kind))
        return model.map
    return model


def prox_denoise_semidefinite(model, y_obs, lam, opts=None):
    """Denoise with a learned semidefinite regularizer.

    Solves ``min_X 1/2 ||y_obs - L(X)||^2 + lam ||X||_*`` and returns the
    estimate ``L(X_hat)``.  The lifted problem equals the proximal
    operator of the learned norm because that norm is the infimum of the
    nuclear norm over preimages, so minimizing jointly over the signal
    and its preimage collapses the constraint.

    Parameters
    ----------
    model : RegularizerModel (kind 'semidefinite') or LinearMapL
    y_obs : ndarray, shape (d,)
    lam : float, >= 0
    opts : SolverOptions, optional

    Returns
    -------
    DenoiseResult
    """
    L = _model_map(model, "semidefinite")
    X, _ = nuclear_prox_solve(L, y_obs, lam, opts)
    estimate = apply_map(L, X)
    obj = (0.5 * np.sum((np.asarray(y_obs, dtype=np.float64) - estimate) ** 2)
           + lam * np.sum(np.linalg.svd(X, compute_uv=False)))
    return DenoiseResult(estimate=estimate, lifted=X, objective=float(obj),
                         lam=float(lam))


def prox_denoise_polyhedral(model, y_obs, lam, opts=None):
    """Denoise with a learned polyhedral regularizer.

    Solves ``min_x 1/2 ||y_obs - D x||^2 + lam ||x||_1`` and returns the
    estimate ``D x_hat`` (same lifted-reformulation argument as the
    semidefinite case, with the l1 ball in place of the nuclear ball).
    """
    D = _model_map(model, "polyhedral")
    x, _ = lasso_solve(D, y_obs, lam, opts)
    estimate = D @ x
    obj = (0.5 * np.sum((np.asarray(y_obs, dtype=np.float64) - estimate) ** 2)
           + lam * np.sum(np.abs(x)))
    return DenoiseResult(estimate=estimate, lifted=x, objective=float(obj),
                         lam=float(lam))


def representation_complexity(kind, size, order, d, n):
    """Average number of parameters needed to describe each data point.

    Parameters
    ----------
    kind : {'semidefinite', 'polyhedral'}
    size : int
        q for semidefinite models, p for polyhedral ones.
    order : int
        Rank r, or sparsity s.
    d, n : int
        Ambient dimension and number of data points (the map or
        dictionary cost, d*size^2 or d*size, is amortized over n).

    Returns
    -------
    float
        ``2*q*r - r^2 + d*q^2/n`` or ``2*s + d*p/n``.
    """
    if min(size, order, d, n) < 1:
        raise ValueError("all counts must be positive")
    if kind == "semidefinite":
        return 2.0 * size * order - order ** 2 + d * size ** 2 / n
    if kind == "polyhedral":
        return 2.0 * order + d * size / n
    raise ValueError("kind must be 'semidefinite' or 'polyhedral'")


def snr(Y, sigma):
    """Average signal-to-noise ratio ``(1/n) sum_j ||y_j||^2 / (d sigma^2)``."""
    Y = np.asarray(Y, dtype=np.float64)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d, n = Y.shape
    return float(np.sum(Y ** 2) / (n * d * sigma ** 2))


DenoiseTable = namedtuple("DenoiseTable", ["rows", "best", "snr"])
"""``rows`` is a list of (model, lambda, normalizedMSE) tuples in fixed
(model, lambda) order; ``best`` maps each model name to its
(best lambda, best normalizedMSE); ``snr`` is the realized average
signal-to-noise ratio of the corrupted test set."""


def _init_model(cfg, d, idx, seed):
    kind = cfg["kind"]
    rng = seeds.substream(seed, "init", idx)
    if kind == "semidefinite":
        q = int(cfg["q"])
        L0 = cfg.get("init")
        if L0 is None:
            raw = LinearMapL(rng.standard_normal((d, q, q)) / np.sqrt(d))
            L0, _ = operator_sinkhorn_normalize(raw)
        return L0
    if kind == "polyhedral":
        p = int(cfg["p"])
        D0 = cfg.get("init")
        if D0 is None:
            D0 = column_normalize(rng.standard_normal((d, p)))
        return D0
    raise ValueError("model config %d: unknown kind %r" % (idx, kind))


def denoise_experiment(train_Y, test_Y, noise_sigma, lambda_grid,
                       model_configs, seed):
    """Learn regularizers on training data and score them as denoisers.

    Test columns are corrupted with i.i.d. N(0, sigma^2) noise from the
    substream ``(seed, "noise")``.  Each configured model is learned on
    ``train_Y``, then swept over ``lambda_grid``; performance is the
    normalized mean squared error

        (1/n_test) * sum_j ||y_hat_j - y_j||^2 / (d * sigma^2)

    against the clean test columns (1.0 = no better than keeping the
    noisy observation, in expectation).  A Euclidean shrinkage baseline
    ``y * max(0, 1 - lambda/||y||)`` (the proximal operator of the
    Euclidean norm, i.e. the trivial regularizer) is always included
    under the name 'euclidean'.

    Parameters
    ----------
    train_Y, test_Y : ndarray, shapes (d, n_train), (d, n_test)
    noise_sigma : float
    lambda_grid : sequence of float
    model_configs : sequence of dict
        Each with 'kind' ('semidefinite' | 'polyhedral'), dimensions
        ('q' and 'r', or 'p' and 's'), optional 'name', 'init', and
        'opts' (a LearnOptions).
    seed : int

    Returns
    -------
    DenoiseTable
    """
    train_Y = np.asarray(train_Y, dtype=np.float64)
    test_Y = np.asarray(test_Y, dtype=np.float64)
    if train_Y.shape[0] != test_Y.shape[0]:
        raise ValueError("train and test data have different dimensions")
    if noise_sigma <= 0:
        raise ValueError("noise_sigma must be positive")
    lambda_grid = [float(l) for l in lambda_grid]
    if not lambda_grid:
        raise ValueError("lambda_grid must be nonempty")
    d, n_test = test_Y.shape

    noise = seeds.substream(seed, "noise").standard_normal(test_Y.shape)
    observed = test_Y + noise_sigma * noise

    models = [("euclidean", None)]
    for idx, cfg in enumerate(model_configs):
        name = cfg.get("name", "%s-%d" % (cfg["kind"], idx))
        opts = cfg.get("opts") or LearnOptions()
        init = _init_model(cfg, d, idx, seed)
        if cfg["kind"] == "semidefinite":
            model = learn_semidefinite(train_Y, int(cfg["q"]),
                                       int(cfg["r"]), init, opts)
        else:
            model = learn_polyhedral(train_Y, int(cfg["p"]),
                                     int(cfg["s"]), init, opts)
        models.append((name, model))

    denom = n_test * d * noise_sigma ** 2
    rows = []
    best = {}
    for name, model in models:
        for lam in lambda_grid:
            err = 0.0
            for j in range(n_test):
                y = observed[:, j]
                if model is None:
                    ny = np.linalg.norm(y)
                    scale = max(0.0, 1.0 - lam / ny) if ny > 0 else 0.0
                    est = y * scale
                elif model.kind == "semidefinite":
                    est = prox_denoise_semidefinite(model, y, lam).estimate
                else:
                    est = prox_denoise_polyhedral(model, y, lam).estimate
                err += np.sum((est - test_Y[:, j]) ** 2)
            nmse = err / denom
            rows.append((name, lam, nmse))
            if name not in best or nmse < best[name][1]:
                best[name] = (lam, nmse)
    return DenoiseTable(rows=rows, best=best,
                        snr=snr(observed, noise_sigma))
