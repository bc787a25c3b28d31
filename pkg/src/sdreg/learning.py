r"""Alternating-update learners for data-driven regularizers.

The semidefinite learner alternates three steps until the map stops
moving:

1. factor update — each data column gets a rank-<=r concise
   representation, solved independently (:func:`sdreg.solvers.svp` by
   default, nuclear-norm proximal descent per config);
2. map update — the globally optimal least-squares map for the current
   factors, all d rows sharing one factorization of the stacked factor
   matrix;
3. Operator Sinkhorn normalization — restores the canonical
   representative, removing the scale/conjugation drift the map update
   introduces.

The polyhedral learner is the dictionary-learning analog: iterative hard
thresholding per column, a least-squares dictionary update, and column
rescaling to unit Euclidean norm in place of Operator Sinkhorn.

Stopping uses a Cauchy criterion on successive map change (the iterates
form a Cauchy sequence in the regime where the method converges).
"""

import numpy as np

from collections import namedtuple

from .exceptions import NumericalError, SingularOperatorError
from . import seeds
from .linalg import LinearMapL, _as_finite_matrix, factor_array
from .scaling import operator_sinkhorn_normalize
from .solvers import SolverOptions, iht_sparse, nuclear_prox_solve, svp


__all__ = [
    "LearnOptions", "LearnTrace", "RegularizerModel", "MapUpdateInfo",
    "update_factors", "update_map", "learn_semidefinite",
    "learn_polyhedral", "column_normalize", "preprocess_data",
]


MapUpdateInfo = namedtuple("MapUpdateInfo", ["min_norm", "rank"])
"""``min_norm`` is True when the stacked factor matrix was rank deficient
and the minimum-norm least-squares solution was returned."""


class LearnOptions(object):
    """Options for the alternating-update learners.

    Parameters
    ----------
    max_outer_iter : int
    cauchy_tol : float
        Stop when the map change (max componentwise Frobenius norm for
        maps, max column change for dictionaries) drops below this.
    inner_solver : {'svp', 'nuclearProx'}
        Factor-update solver.  'nuclearProx' requires ``lam``.
    lam : float or None
        Regularization weight for the nuclear-norm route (no default is
        claimed to be optimal).
    solver_opts : SolverOptions, optional
    normalize_tol : float
        Target nearly-normalized parameter for the map after each outer
        iteration.
    normalize_max_iter : int
    warm_start : bool
        Start each factor solve from the previous outer iteration's factor
        instead of zero.
    seed : int
        Drives the dead-atom re-randomization stream of the polyhedral
        learner (substream ``(seed, "dead-atom")``).
    """

    def __init__(self, max_outer_iter=150, cauchy_tol=1e-7,
                 inner_solver="svp", lam=None, solver_opts=None,
                 normalize_tol=1e-9, normalize_max_iter=2000,
                 warm_start=False, seed=0):
        if max_outer_iter < 1:
            raise ValueError("max_outer_iter must be at least 1")
        if cauchy_tol <= 0 or normalize_tol <= 0:
            raise ValueError("tolerances must be positive")
        if inner_solver not in ("svp", "nuclearProx"):
            raise ValueError("inner_solver must be 'svp' or 'nuclearProx'")
        if inner_solver == "nuclearProx" and (lam is None or lam <= 0):
            raise ValueError("the nuclearProx inner solver needs lam > 0")
        self.max_outer_iter = int(max_outer_iter)
        self.cauchy_tol = float(cauchy_tol)
        self.inner_solver = inner_solver
        self.lam = None if lam is None else float(lam)
        self.solver_opts = solver_opts or SolverOptions()
        self.normalize_tol = float(normalize_tol)
        self.normalize_max_iter = int(normalize_max_iter)
        self.warm_start = bool(warm_start)
        self.seed = int(seed)


class LearnTrace(object):
    """Per-outer-iteration learning history.

    Attributes
    ----------
    fit_residual : list of float
        Sum of squared data residuals after each factor update.
    map_change : list of float
        Max componentwise Frobenius change of the (normalized) map.
    min_norm : list of bool
        Whether the map update fell back to the minimum-norm solution.
    iterations : int
    converged : bool
    stop_reason : str
        'cauchy', 'max_iter', 'callback', or 'degenerate' (the factors
        span too small a subspace to determine a normalizable map —
        typically far too little data).
    """

    def __init__(self):
        self.fit_residual = []
        self.map_change = []
        self.min_norm = []
        self.iterations = 0
        self.converged = False
        self.stop_reason = "max_iter"

    def record(self, fit, change, min_norm):
        self.fit_residual.append(float(fit))
        self.map_change.append(float(change))
        self.min_norm.append(bool(min_norm))
        self.iterations += 1


class RegularizerModel(object):
    """A learned regularizer: the map defining its unit ball plus metadata.

    Parameters
    ----------
    kind : {'semidefinite', 'polyhedral'}
    map_ : LinearMapL (semidefinite) or ndarray of shape (d, p)
        Semidefinite models store a normalized map (unit ball = image of
        the nuclear-norm ball); polyhedral models store a dictionary with
        unit-Euclidean-norm columns (unit ball = image of the l1 ball).
    rank : int, for semidefinite models
    sparsity : int, for polyhedral models
    trace : LearnTrace or None
    """

    def __init__(self, kind, map_, rank=None, sparsity=None, trace=None):
        if kind == "semidefinite":
            if not isinstance(map_, LinearMapL):
                raise TypeError("semidefinite models store a LinearMapL")
            if rank is None or not 1 <= int(rank) <= map_.q:
                raise ValueError("semidefinite models need a rank in "
                                 "[1, q]")
            self.rank = int(rank)
            self.sparsity = None
        elif kind == "polyhedral":
            map_ = _as_finite_matrix(map_, "dictionary")
            if sparsity is None or not 1 <= int(sparsity) <= map_.shape[1]:
                raise ValueError("polyhedral models need a sparsity in "
                                 "[1, p]")
            self.sparsity = int(sparsity)
            self.rank = None
        else:
            raise ValueError("kind must be 'semidefinite' or 'polyhedral'")
        self.kind = kind
        self.map = map_
        self.trace = trace

    def __repr__(self):
        if self.kind == "semidefinite":
            return ("RegularizerModel(semidefinite, d=%d, q=%d, r=%d)"
                    % (self.map.d, self.map.q, self.rank))
        return ("RegularizerModel(polyhedral, d=%d, p=%d, s=%d)"
                % (self.map.shape[0], self.map.shape[1], self.sparsity))


def _check_data(Y, d=None):
    Y = _as_finite_matrix(Y, "Y")
    if d is not None and Y.shape[0] != d:
        raise ValueError("data has %d rows, expected d=%d" % (Y.shape[0], d))
    return Y


def update_factors(L, Y, r, solver_opts=None, method="svp", lam=None,
                   initial=None):
    """Solve every column's rank-<=r representation problem independently.

    Parameters
    ----------
    L : LinearMapL
    Y : ndarray, shape (d, n)
    r : int
    solver_opts : SolverOptions, optional
    method : {'svp', 'nuclearProx'}
    lam : float, required for 'nuclearProx'
    initial : ndarray (n, q, q), optional
        Warm starts, one per column.

    Returns
    -------
    ndarray, shape (n, q, q)
        Factor j solves column j; solver errors are re-raised tagged with
        the column index.
    """
    Y = _check_data(Y, L.d)
    n = Y.shape[1]
    base = solver_opts or SolverOptions()
    Xs = np.empty((n, L.q, L.q))
    for j in range(n):
        opts = base
        if initial is not None:
            opts = SolverOptions(max_iter=base.max_iter, tol=base.tol,
                                 damping=base.damping,
                                 step_size=base.step_size,
                                 initial=initial[j])
        try:
            if method == "svp":
                Xs[j], _ = svp(L, Y[:, j], r, opts)
            elif method == "nuclearProx":
                Xs[j], _ = nuclear_prox_solve(L, Y[:, j], lam, opts)
            else:
                raise ValueError("unknown factor solver %r" % (method,))
        except NumericalError as exc:
            raise type(exc)("column %d: %s" % (j, exc)) from exc
    return Xs


def update_map(Xs, Y):
    """Globally optimal least-squares map for fixed factors.

    Minimizes ``sum_j ||y_j - L(X_j)||^2`` over all linear maps.  With
    ``V`` the n x q^2 matrix of vectorized factors, each of the d rows of
    the solution solves an independent least-squares problem against
    ``V``, all sharing one SVD of ``V`` (pseudoinverse semantics, singular
    values below ``1e-12 * sigma_max`` treated as zero).

    Returns
    -------
    (LinearMapL, MapUpdateInfo)
        ``info.min_norm`` flags a rank-deficient factor matrix, in which
        case the minimum-norm solution is returned.
    """
    arr = factor_array(Xs)
    n, q = arr.shape[0], arr.shape[1]
    Y = _check_data(Y)
    if Y.shape[1] != n:
        raise ValueError("factor count %d does not match data columns %d"
                         % (n, Y.shape[1]))
    V = arr.transpose(0, 2, 1).reshape(n, q * q)
    U, s, Vt = np.linalg.svd(V, full_matrices=False)
    if s.size and s[0] > 0:
        rank = int(np.sum(s > 1e-12 * s[0]))
    else:
        rank = 0
    if rank == 0:
        Lmat = np.zeros((Y.shape[0], q * q))
    else:
        # rows of L solve d independent problems sharing this factorization
        Lmat = ((Y @ U[:, :rank]) / s[:rank]) @ Vt[:rank]
    info = MapUpdateInfo(min_norm=(rank < q * q), rank=rank)
    return LinearMapL.from_matrix(Lmat, q), info


def learn_semidefinite(Y, q, r, L0, opts=None, callback=None):
    """Learn a semidefinite regularizer by alternating updates.

    Parameters
    ----------
    Y : ndarray, shape (d, n)
    q : int
    r : int
        Target rank of the concise representations (assumed known; no
        model selection is attempted).
    L0 : LinearMapL
        Initial guess; it is Operator-Sinkhorn normalized on entry.
    opts : LearnOptions, optional
    callback : callable, optional
        Called as ``callback(t, L)`` with the normalized map after outer
        iteration t; a truthy return stops the loop (used by success-based
        sweep drivers).

    Returns
    -------
    RegularizerModel
        With a normalized map and the full learning trace.

    Raises
    ------
    NumericalError
        If normalization fails to converge mid-run (tagged with the outer
        iteration) or a column solver diverges (tagged with the column).
        A singular map update — too little data for a normalizable map —
        stops the loop gracefully instead (``stop_reason='degenerate'``),
        keeping the last normalized map.
    """
    opts = opts or LearnOptions()
    Y = _check_data(Y)
    if L0.q != q:
        raise ValueError("initial map has q=%d, expected %d" % (L0.q, q))
    if Y.shape[0] != L0.d:
        raise ValueError("data has %d rows but the map outputs %d"
                         % (Y.shape[0], L0.d))
    if not 1 <= r < q:
        raise ValueError("need 1 <= r < q")

    L, report = operator_sinkhorn_normalize(L0, opts.normalize_tol,
                                            opts.normalize_max_iter)
    if not report.converged:
        raise NumericalError("could not normalize the initial map "
                             "(residual %.3e)" % report.residual)
    trace = LearnTrace()
    Xs = None
    for t in range(1, opts.max_outer_iter + 1):
        initial = Xs if (opts.warm_start and Xs is not None) else None
        Xs = update_factors(L, Y, r, solver_opts=opts.solver_opts,
                            method=opts.inner_solver, lam=opts.lam,
                            initial=initial)
        fit = float(np.sum((Y - _apply_stack(L, Xs)) ** 2))
        L_raw, info = update_map(Xs, Y)
        try:
            L_new, report = operator_sinkhorn_normalize(
                L_raw, opts.normalize_tol, opts.normalize_max_iter)
        except SingularOperatorError:
            # too little data to pin down a normalizable map (the factors
            # span a deficient subspace): keep the last normalized map,
            # report the fit, and stop instead of failing
            trace.record(fit, float("nan"), info.min_norm)
            trace.converged = False
            trace.stop_reason = "degenerate"
            break
        except NumericalError as exc:
            raise type(exc)("outer iteration %d: %s" % (t, exc)) from exc
        if not report.converged:
            raise NumericalError("normalization did not converge at outer "
                                 "iteration %d (residual %.3e)"
                                 % (t, report.residual))
        change = float(np.max(np.sqrt(np.sum(
            (L_new.components - L.components) ** 2, axis=(1, 2)))))
        trace.record(fit, change, info.min_norm)
        L = L_new
        if callback is not None and callback(t, L):
            trace.converged = False
            trace.stop_reason = "callback"
            break
        if change <= opts.cauchy_tol:
            trace.converged = True
            trace.stop_reason = "cauchy"
            break
    return RegularizerModel("semidefinite", L, rank=r, trace=trace)


def _apply_stack(L, Xs):
    """Apply a map to a stack of factors, returning the d x n data matrix."""
    n, q = Xs.shape[0], L.q
    V = Xs.transpose(0, 2, 1).reshape(n, q * q)
    return L.as_matrix() @ V.T


def column_normalize(D):
    """Rescale every column to unit Euclidean norm.

    Raises
    ------
    ValueError
        If a column is identically zero.
    """
    D = _as_finite_matrix(D, "D")
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        raise ValueError("dictionary has a zero column")
    return D / norms


def preprocess_data(Y, center=False, scale=False):
    """Optionally center and unit-norm-scale a data matrix.

    Real datasets are often shifted so the sample mean of the columns is
    the origin and then rescaled so every column has unit Euclidean norm,
    producing a centered, suitably isotropic cloud before learning.
    Nothing here is ever applied implicitly: both steps default to off,
    and ``preprocess_data(Y)`` returns an unmodified copy.

    Parameters
    ----------
    Y : ndarray, shape (d, n)
        Data matrix, one point per column.
    center : bool
        Subtract the mean column from every column.
    scale : bool
        Divide each column by its Euclidean norm, after centering when
        both flags are set.

    Returns
    -------
    ndarray, shape (d, n)
        A new array; the input is never modified.

    Raises
    ------
    ValueError
        If scaling meets a zero column.
    """
    Y = np.array(_check_data(Y), dtype=float)
    if center:
        Y -= Y.mean(axis=1, keepdims=True)
    if scale:
        norms = np.linalg.norm(Y, axis=0)
        if np.any(norms == 0):
            raise ValueError("cannot scale a zero data column")
        Y /= norms
    return Y


def learn_polyhedral(Y, p, s, D0, opts=None, callback=None):
    """Learn a polyhedral regularizer (dictionary) by alternating updates.

    Each step parallels the semidefinite learner: iterative hard
    thresholding per column, a least-squares dictionary update, and column
    rescaling to unit Euclidean norm in place of Operator Sinkhorn.  A
    column that dies (numerically zero after the update) is re-randomized
    from the unit sphere using the run's seeded stream and flagged in the
    trace.

    Returns
    -------
    RegularizerModel
    """
    opts = opts or LearnOptions()
    Y = _check_data(Y)
    d, n = Y.shape
    D0 = _as_finite_matrix(D0, "D0")
    if D0.shape != (d, p):
        raise ValueError("D0 has shape %s, expected (%d, %d)"
                         % (D0.shape, d, p))
    if not 1 <= s <= p:
        raise ValueError("need 1 <= s <= p")

    D = column_normalize(D0)
    rng = seeds.substream(opts.seed, "dead-atom")
    trace = LearnTrace()
    trace.dead_atoms = []
    X = None
    for t in range(1, opts.max_outer_iter + 1):
        X_new = np.empty((p, n))
        fit = 0.0
        for j in range(n):
            base = opts.solver_opts
            col_opts = base
            if opts.warm_start and X is not None:
                col_opts = SolverOptions(max_iter=base.max_iter,
                                         tol=base.tol, damping=base.damping,
                                         step_size=base.step_size,
                                         initial=X[:, j])
            try:
                X_new[:, j], tr = iht_sparse(D, Y[:, j], s, col_opts)
            except NumericalError as exc:
                raise type(exc)("column %d: %s" % (j, exc)) from exc
            fit += tr.final_residual ** 2
        X = X_new
        D_raw, _, rank, _ = np.linalg.lstsq(X.T, Y.T, rcond=1e-12)
        D_raw = D_raw.T
        dead = 0
        norms = np.linalg.norm(D_raw, axis=0)
        for k in np.flatnonzero(norms <= 1e-12):
            g = rng.standard_normal(d)
            D_raw[:, k] = g / np.linalg.norm(g)
            dead += 1
        D_new = column_normalize(D_raw)
        change = float(np.max(np.linalg.norm(D_new - D, axis=0)))
        trace.record(fit, change, rank < p)
        trace.dead_atoms.append(dead)
        D = D_new
        if callback is not None and callback(t, D):
            trace.converged = False
            trace.stop_reason = "callback"
            break
        if change <= opts.cauchy_tol:
            trace.converged = True
            trace.stop_reason = "cauchy"
            break
    return RegularizerModel("polyhedral", D, sparsity=s, trace=trace)
