r"""Low-rank and sparse inverse-problem solvers.

Two families, mirroring each other:

* rank-constrained / nuclear-norm problems for maps on matrices —
  :func:`svp` (projected gradient onto the rank-r variety) and
  :func:`nuclear_prox_solve` (proximal gradient for
  :math:`\min_X \tfrac12\|y - L(X)\|^2 + \lambda \|X\|_*`);
* sparsity-constrained / :math:`\ell_1` problems for dictionaries —
  :func:`iht_sparse` and :func:`lasso_solve`.

All solvers are pure functions; independent solves (one per data column)
can run in parallel because they share no state.
"""

from collections import namedtuple

import numpy as np

from .exceptions import DivergenceError, StepSizeError
from .linalg import _as_finite_matrix, unvec, vec


__all__ = [
    "SolverOptions", "SolveTrace",
    "svp", "svt", "nuclear_prox_solve",
    "iht_sparse", "lasso_solve", "soft_threshold", "hard_threshold",
]


_DAMPING_FLOOR = 1.0 / 64
_STALL_WINDOW = 50
_TINY = 1e-300


class SolverOptions(object):
    """Options shared by the iterative solvers.

    Parameters
    ----------
    max_iter : int
        Iteration cap.
    tol : float
        Relative iterate-change threshold; the proximal solvers also
        require the relative objective change to drop below it.
    damping : float in (0, 1]
        Gradient damping ``nu`` for :func:`svp` / :func:`iht_sparse`.  On
        divergence the solvers retry with ``nu`` halved, down to 1/64.
    step_size : float or None
        Step for the proximal solvers.  ``None`` selects ``1/||L||_2^2``,
        the largest step with guaranteed descent.
    initial : ndarray or None
        Starting point; the default is zero.
    """

    def __init__(self, max_iter=1000, tol=1e-9, damping=1.0, step_size=None,
                 initial=None):
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if step_size is not None and step_size <= 0:
            raise ValueError("step_size must be positive")
        self.max_iter = int(max_iter)
        self.tol = float(tol)
        self.damping = float(damping)
        self.step_size = None if step_size is None else float(step_size)
        self.initial = None if initial is None else np.asarray(initial,
                                                               dtype=float)


SolveTrace = namedtuple("SolveTrace",
                        ["iterations", "final_residual", "objective_history"])
"""Per-solve diagnostics.  For the proximal solvers ``objective_history``
is nonincreasing after the first iterate; for the projected-gradient
solvers it records the data residual of each iterate."""


def _check_vector(y, d, name="y"):
    y = np.asarray(y, dtype=float)
    if y.shape != (d,):
        raise ValueError("%s has shape %s, expected (%d,)"
                         % (name, y.shape, d))
    if not np.all(np.isfinite(y)):
        raise ValueError("%s contains non-finite entries" % name)
    return y


def hard_threshold(x, s):
    """Keep the s largest-magnitude entries of a vector, zeroing the rest."""
    x = np.asarray(x, dtype=float)
    s = int(s)
    if not 0 <= s <= x.size:
        raise ValueError("sparsity %d out of range for length %d"
                         % (s, x.size))
    if s == x.size:
        return x.copy()
    out = np.zeros_like(x)
    if s > 0:
        keep = np.argpartition(np.abs(x), x.size - s)[x.size - s:]
        out[keep] = x[keep]
    return out


def soft_threshold(x, tau):
    """Entrywise soft threshold ``sign(x) * max(|x| - tau, 0)``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def svt(A, tau):
    """Singular value thresholding, the proximal operator of ``tau*||.||_*``.

    Parameters
    ----------
    A : array_like
    tau : float, nonnegative

    Returns
    -------
    ndarray
        ``U @ diag(max(sigma - tau, 0)) @ V.T``; the unique minimizer of
        ``0.5*||Z - A||_F^2 + tau*||Z||_*``.
    """
    A = _as_finite_matrix(A, "A")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0:
        return A.copy()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (U * s) @ Vt


def _project_rank(Z, r):
    """Best rank-r approximation (inlined hot path of truncate_rank)."""
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def _projected_gradient(apply_op, adjoint_op, project, y, nu, tol, max_iter,
                        x0, rate_check=True):
    """One damped projected-gradient run shared by svp and iht_sparse.

    Returns ``(best_x, best_res, iterations, history, status)`` with
    status one of 'converged' (iterate change below tol), 'budget'
    (max_iter reached), 'diverged' (residual above ten times its running
    minimum — the step is unstable), or 'stalled'.  A run stalls when the
    best residual has not improved at all over a window of iterates (the
    iteration is cycling) or, with ``rate_check``, when it has improved by
    less than a factor of two over the window (the step is oscillating and
    crawling; a smaller one converges orders of magnitude faster).  The
    best iterate (including the starting point) is retained so the result
    is never worse than the initializer.
    """
    x = x0.copy()
    r_vec = y - apply_op(x)
    res = np.linalg.norm(r_vec)
    ynorm = np.linalg.norm(y)
    best_x, best_res = x.copy(), res
    min_res = res
    checkpoint = res
    best_iter = 0
    history = [res]
    iterations = 0
    status = "budget"
    for iterations in range(1, max_iter + 1):
        x_new = project(x + nu * adjoint_op(r_vec))
        r_vec = y - apply_op(x_new)
        res = np.linalg.norm(r_vec)
        history.append(res)
        if res < best_res - 1e-13 * max(ynorm, 1.0):
            best_iter = iterations
        if res < best_res:
            best_res = res
            best_x = x_new.copy()
        if res > 10.0 * min_res + 1e-12 * ynorm:
            status = "diverged"
            break
        min_res = min(min_res, res)
        change = np.linalg.norm(x_new - x)
        x = x_new
        if change <= tol * max(np.linalg.norm(x_new), _TINY):
            status = "converged"
            break
        if iterations - best_iter >= _STALL_WINDOW:
            status = "stalled"
            break
        if rate_check and iterations % _STALL_WINDOW == 0:
            if best_res > 0.5 * checkpoint:
                status = "stalled"
                break
            checkpoint = best_res
    return best_x, best_res, iterations, history, status


def _damped_solve(apply_op, adjoint_op, project, y, opts, x0, what):
    """Projected gradient with automatic damping reduction.

    Runs :func:`_projected_gradient` at the requested damping; on
    divergence or a stall the damping is halved (down to 1/64) and the
    run restarts from the best iterate so far.  At the smallest damping
    the slow-rate detector is switched off (slow progress there is worth
    the full iteration budget) and only a true cycle — no improvement at
    all over a window — ends the run early, returning the best iterate;
    divergence at the smallest damping raises, since the iteration is
    unstable for this operator.
    """
    nu = opts.damping
    start = x0
    total_iterations = 0
    full_history = []
    rate_check = True
    while True:
        x, res, iterations, history, status = _projected_gradient(
            apply_op, adjoint_op, project, y, nu, opts.tol, opts.max_iter,
            start, rate_check=rate_check)
        total_iterations += iterations
        full_history.extend(history if not full_history else history[1:])
        if status in ("converged", "budget"):
            return x, res, total_iterations, full_history
        if status == "stalled" and not rate_check:
            return x, res, total_iterations, full_history
        if nu / 2 < _DAMPING_FLOOR:
            if status == "stalled":
                # one last run at the floor, stopped only by true cycles
                rate_check = False
                start = x
                continue
            raise DivergenceError(
                "%s diverged even at damping %.4g; the gradient step is "
                "too large for this operator" % (what, nu))
        nu = nu / 2
        start = x


def svp(L, y, r, opts=None):
    """Singular Value Projection: find a rank-<=r matrix near an affine set.

    Iterates ``X <- truncate_rank(X + nu * L'(y - L(X)), r)`` from ``X = 0``
    (or ``opts.initial``) until the relative iterate change drops below
    ``opts.tol`` or ``opts.max_iter`` is reached.  When the run diverges
    (residual above ten times its running minimum) or stalls (less than a
    factor-two residual improvement over a 50-iteration window — cycling
    or crawling), it restarts from the best iterate with the damping
    halved, down to 1/64; divergence at the smallest damping raises.

    Parameters
    ----------
    L : LinearMapL
    y : array_like, shape (d,)
    r : int
        Target rank, ``1 <= r < q``.
    opts : SolverOptions, optional

    Returns
    -------
    (ndarray, SolveTrace)
        The best-residual iterate encountered (never worse than the zero
        start) and the trace; ``objective_history`` holds the data residual
        of every iterate.

    Raises
    ------
    DivergenceError
        If the iteration diverges at the smallest damping.
    """
    opts = opts or SolverOptions()
    y = _check_vector(y, L.d)
    r = int(r)
    if not 1 <= r < L.q:
        raise ValueError("rank must satisfy 1 <= r < q, got r=%d, q=%d"
                         % (r, L.q))
    Lmat = L.as_matrix()
    q = L.q
    if opts.initial is not None:
        if opts.initial.shape != (q, q):
            raise ValueError("initial guess must be q x q")
        x0 = vec(opts.initial)
    else:
        x0 = np.zeros(q * q)

    def apply_op(x):
        return Lmat @ x

    def adjoint_op(v):
        return Lmat.T @ v

    def project(x):
        return vec(_project_rank(unvec(x, q), r))

    x, res, iterations, history = _damped_solve(
        apply_op, adjoint_op, project, y, opts, x0, "svp")
    return unvec(x, q), SolveTrace(iterations=iterations,
                                   final_residual=float(res),
                                   objective_history=history)


def iht_sparse(D, y, s, opts=None):
    """Iterative hard thresholding for dictionaries.

    Iterates ``x <- H_s(x + nu * D'(y - D x))`` where ``H_s`` keeps the s
    largest-magnitude entries.  Divergence handling matches :func:`svp`.

    Parameters
    ----------
    D : array_like, shape (d, p)
    y : array_like, shape (d,)
    s : int
        Sparsity level, ``1 <= s <= p``.
    opts : SolverOptions, optional

    Returns
    -------
    (ndarray, SolveTrace)
        A vector with at most s nonzeros.
    """
    D = _as_finite_matrix(D, "D")
    d, p = D.shape
    y = _check_vector(y, d)
    s = int(s)
    if not 1 <= s <= p:
        raise ValueError("sparsity must satisfy 1 <= s <= p, got s=%d, p=%d"
                         % (s, p))
    opts = opts or SolverOptions()
    if opts.initial is not None:
        if opts.initial.shape != (p,):
            raise ValueError("initial guess must have length p")
        x0 = opts.initial.copy()
    else:
        x0 = np.zeros(p)

    x, res, iterations, history = _damped_solve(
        lambda x: D @ x, lambda v: D.T @ v,
        lambda x: hard_threshold(x, s), y, opts, x0, "iht")
    return x, SolveTrace(iterations=iterations,
                         final_residual=float(res),
                         objective_history=history)


def _proximal_gradient(apply_op, adjoint_op, prox, penalty, y, step, lam,
                       tol, max_iter, x0):
    """Proximal gradient descent shared by the nuclear and lasso solvers.

    Stops when both the relative iterate change and the relative objective
    change drop below ``tol``.  An objective increase aborts: for a norm
    penalty with step at most ``1/||operator||_2^2`` descent is guaranteed,
    so an increase means the step is too large.
    """
    x = x0.copy()
    r_vec = apply_op(x) - y
    obj = 0.5 * float(r_vec @ r_vec) + lam * penalty(x)
    history = [obj]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x_new = prox(x - step * adjoint_op(r_vec), step * lam)
        r_vec = apply_op(x_new) - y
        obj_new = 0.5 * float(r_vec @ r_vec) + lam * penalty(x_new)
        history.append(obj_new)
        if obj_new > obj + 1e-12 * max(1.0, abs(obj)):
            raise StepSizeError(
                "objective increased from %.6e to %.6e at iteration %d; "
                "step size %.3e exceeds 1/||operator||^2" %
                (obj, obj_new, iterations, step))
        change = np.linalg.norm(x_new - x)
        rel_obj = abs(obj_new - obj) / max(abs(obj), _TINY)
        x, obj = x_new, obj_new
        if (change <= tol * max(np.linalg.norm(x_new), _TINY)
                and rel_obj <= tol):
            break
    return x, iterations, history


def nuclear_prox_solve(L, y, lam, opts=None):
    r"""Solve :math:`\min_X \tfrac12 \|y - L(X)\|^2 + \lambda \|X\|_*`.

    Proximal gradient with singular value thresholding:
    ``X <- svt(X - eta * L'(L(X) - y), eta * lam)`` with step
    ``eta = opts.step_size`` (default ``1/||L||_2^2``).  At convergence the
    iterate satisfies the first-order condition: the residual gradient's
    tangent-space component vanishes and its orthocomplement has spectral
    norm at most :math:`\lambda`.

    Parameters
    ----------
    L : LinearMapL
    y : array_like, shape (d,)
    lam : float, nonnegative
    opts : SolverOptions, optional

    Returns
    -------
    (ndarray, SolveTrace)
        ``objective_history`` is nonincreasing after the first iterate.

    Raises
    ------
    StepSizeError
        If the objective increases (step size above ``1/||L||_2^2``).
    """
    opts = opts or SolverOptions()
    y = _check_vector(y, L.d)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    q = L.q
    Lmat = L.as_matrix()
    step = opts.step_size if opts.step_size is not None else 1.0 / L.norm2() ** 2
    if opts.initial is not None:
        if opts.initial.shape != (q, q):
            raise ValueError("initial guess must be q x q")
        x0 = vec(opts.initial)
    else:
        x0 = np.zeros(q * q)

    def prox(x, tau):
        return vec(svt(unvec(x, q), tau))

    def penalty(x):
        return float(np.linalg.svd(unvec(x, q), compute_uv=False).sum())

    x, iterations, history = _proximal_gradient(
        lambda x: Lmat @ x, lambda v: Lmat.T @ v, prox, penalty, y, step,
        lam, opts.tol, opts.max_iter, x0)
    final_res = float(np.linalg.norm(y - Lmat @ x))
    return unvec(x, q), SolveTrace(iterations=iterations,
                                   final_residual=final_res,
                                   objective_history=history)


def lasso_solve(D, y, lam, opts=None):
    r"""Solve :math:`\min_x \tfrac12 \|y - D x\|^2 + \lambda \|x\|_1`.

    Proximal gradient with entrywise soft thresholding; otherwise
    identical in contract to :func:`nuclear_prox_solve`.
    """
    D = _as_finite_matrix(D, "D")
    d, p = D.shape
    y = _check_vector(y, d)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    opts = opts or SolverOptions()
    step = (opts.step_size if opts.step_size is not None
            else 1.0 / np.linalg.norm(D, 2) ** 2)
    if opts.initial is not None:
        if opts.initial.shape != (p,):
            raise ValueError("initial guess must have length p")
        x0 = opts.initial.copy()
    else:
        x0 = np.zeros(p)

    x, iterations, history = _proximal_gradient(
        lambda x: D @ x, lambda v: D.T @ v, soft_threshold,
        lambda x: float(np.abs(x).sum()), y, step, lam, opts.tol,
        opts.max_iter, x0)
    final_res = float(np.linalg.norm(y - D @ x))
    return x, SolveTrace(iterations=iterations, final_residual=final_res,
                         objective_history=history)
