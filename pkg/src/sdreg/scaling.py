r"""Sinkhorn scaling for matrices and the Operator Sinkhorn iteration for
normalizing linear maps.

A map ``L`` with components :math:`L_i` is *normalized* when

.. math::
    \sum_i L_i L_i' = \sum_i L_i' L_i = q I,

equivalently when the completely-positive operator
:math:`\mathfrak{T}_L(Z) = \frac{1}{q}\sum_i L_i Z L_i'` and its adjoint both
fix the identity.  Normalization selects a canonical representative from the
equivalence class of maps describing the same regularizer, removing the
positive-definite part of the rank-preserver ambiguity.  The iteration
alternates symmetric whitening of the row and column Gram operators; each
pass makes the row condition exact by construction, and the pair converges
for rank-indecomposable (generic) maps.
"""

from collections import namedtuple

import numpy as np

from .exceptions import SingularOperatorError
from .linalg import LinearMapL, _as_finite_matrix


__all__ = [
    "ScalingResult", "NormalizationReport", "StabilityResult",
    "matrix_sinkhorn", "t_operator_apply", "t_operator_adjoint_apply",
    "normalization_residual", "operator_sinkhorn_normalize",
    "stability_check",
]


ScalingResult = namedtuple(
    "ScalingResult", ["row_scale", "col_scale", "iterations", "residual",
                      "converged"])
"""Diagonal scalings with ``diag(row_scale) @ M @ diag(col_scale)`` doubly
stochastic to within ``residual`` (the max row/column-sum deviation)."""

NormalizationReport = namedtuple(
    "NormalizationReport", ["iterations", "residual", "converged"])
"""Outcome of an Operator Sinkhorn run; ``residual`` is the final
nearly-normalized parameter."""

StabilityResult = namedtuple("StabilityResult", ["epsilon", "bound", "lhs"])
"""Stability certificate: ``lhs <= bound = 96*sqrt(q)*epsilon``."""


def matrix_sinkhorn(M, tol=1e-9, max_iter=2000):
    """Scale a positive matrix to doubly stochastic form.

    Alternates exact row-sum normalization and exact column-sum
    normalization (row step first) of ``diag(row_scale) @ M @
    diag(col_scale)`` until every row and column sum is within ``tol``
    of 1.

    Parameters
    ----------
    M : array_like, shape (q, q)
        Square matrix with strictly positive entries.
    tol : float
    max_iter : int

    Returns
    -------
    ScalingResult
        Exhausting ``max_iter`` is reported via ``converged=False``, not
        raised.

    Raises
    ------
    ValueError
        If ``M`` is not square or has a nonpositive entry (a scaling may
        not exist).
    """
    M = _as_finite_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise ValueError("M must be square, got shape %s" % (M.shape,))
    if np.any(M <= 0):
        raise ValueError("M has a nonpositive entry; a doubly stochastic "
                         "scaling may not exist")
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = M.shape[0]
    d_row = np.ones(q)
    d_col = np.ones(q)
    iterations = 0
    residual = np.inf
    converged = False
    while iterations < max_iter:
        iterations += 1
        scaled = (d_row[:, None] * M) * d_col[None, :]
        d_row = d_row / scaled.sum(axis=1)
        scaled = (d_row[:, None] * M) * d_col[None, :]
        d_col = d_col / scaled.sum(axis=0)
        scaled = (d_row[:, None] * M) * d_col[None, :]
        residual = max(np.max(np.abs(scaled.sum(axis=1) - 1.0)),
                       np.max(np.abs(scaled.sum(axis=0) - 1.0)))
        if residual <= tol:
            converged = True
            break
    return ScalingResult(row_scale=d_row, col_scale=d_col,
                         iterations=iterations, residual=float(residual),
                         converged=converged)


def t_operator_apply(L, Z):
    r"""Apply :math:`\mathfrak{T}_L(Z) = \frac{1}{q}\sum_i L_i Z L_i'`.

    Maps positive semidefinite ``Z`` to positive semidefinite output.
    """
    Z = _as_finite_matrix(Z, "Z")
    if Z.shape != (L.q, L.q):
        raise ValueError("Z has shape %s, expected (%d, %d)"
                         % (Z.shape, L.q, L.q))
    C = L.components
    return np.einsum("iab,bc,idc->ad", C, Z, C, optimize=True) / L.q


def t_operator_adjoint_apply(L, Z):
    r"""Apply the adjoint :math:`\mathfrak{T}_L'(Z) = \frac{1}{q}\sum_i L_i' Z L_i`."""
    Z = _as_finite_matrix(Z, "Z")
    if Z.shape != (L.q, L.q):
        raise ValueError("Z has shape %s, expected (%d, %d)"
                         % (Z.shape, L.q, L.q))
    C = L.components
    return np.einsum("iba,bc,icd->ad", C, Z, C, optimize=True) / L.q


def _gram_row(components):
    """Row Gram matrix ``sum_i L_i L_i'``."""
    return np.einsum("iab,icb->ac", components, components, optimize=True)


def _gram_col(components):
    """Column Gram matrix ``sum_i L_i' L_i``."""
    return np.einsum("iba,ibc->ac", components, components, optimize=True)


def normalization_residual(L):
    r"""Nearly-normalized parameter of a map.

    Returns ``max(||T_L(I) - I||_2, ||T_L'(I) - I||_2)``, which is zero
    exactly on normalized maps.
    """
    q = L.q
    eye = np.eye(q)
    R = _gram_row(L.components) / q - eye
    C = _gram_col(L.components) / q - eye
    r_dev = np.max(np.abs(np.linalg.eigvalsh((R + R.T) / 2)))
    c_dev = np.max(np.abs(np.linalg.eigvalsh((C + C.T) / 2)))
    return float(max(r_dev, c_dev))


def _inv_sqrt_sym(S, what):
    """Inverse square root of a symmetric PD matrix via eigendecomposition.

    Raises
    ------
    SingularOperatorError
        If the condition number exceeds 1e12 (degenerate, likely
        rank-decomposable map).
    """
    w, V = np.linalg.eigh((S + S.T) / 2)
    if w[0] <= 0 or w[-1] / w[0] > 1e12:
        raise SingularOperatorError(
            "%s Gram operator is numerically singular "
            "(eigenvalue range [%.3e, %.3e]); the map may not be "
            "normalizable" % (what, w[0], w[-1]))
    return (V / np.sqrt(w)) @ V.T


def _row_step(components):
    """One row-whitening step: after it, ``sum_i L_i L_i' = q I`` exactly
    (up to rounding).  Returns the new components and the factor applied
    on the left."""
    q = components.shape[1]
    R = _gram_row(components)
    F = np.sqrt(q) * _inv_sqrt_sym(R, "row")
    return np.einsum("ab,ibc->iac", F, components, optimize=True), F


def _col_step(components):
    """One column-whitening step: enforces ``sum_i L_i' L_i = q I``.
    Returns the new components and the factor applied on the right."""
    q = components.shape[1]
    C = _gram_col(components)
    F = np.sqrt(q) * _inv_sqrt_sym(C, "column")
    return np.einsum("iab,bc->iac", components, F, optimize=True), F


def operator_sinkhorn_normalize(L, tol=1e-9, max_iter=2000,
                                return_scaling=False):
    """Normalize a linear map by the Operator Sinkhorn iteration.

    Each pass whitens the row Gram operator (``L_i <- sqrt(q) R^{-1/2}
    L_i``) and then the column Gram operator (``L_i <- sqrt(q) L_i
    C^{-1/2}``), repeating until the nearly-normalized parameter drops
    below ``tol``.  The output equals ``L`` composed with a
    positive-definite rank-preserver, so it defines the same regularizer.

    Parameters
    ----------
    L : LinearMapL
        Map with ``d >= 2`` components; the row/column Gram operators must
        stay nonsingular along the iteration (generic maps).
    tol : float
    max_iter : int
    return_scaling : bool, optional
        Also return the accumulated left/right scaling factors ``(A, B)``
        with ``output_i = A @ L_i @ B``.

    Returns
    -------
    (LinearMapL, NormalizationReport)
        or ``(LinearMapL, NormalizationReport, (A, B))`` with
        ``return_scaling``.  Exhausting ``max_iter`` is reported via
        ``converged=False``.

    Raises
    ------
    SingularOperatorError
        If a Gram operator has condition number above 1e12.
    """
    if L.d < 2:
        raise ValueError("need at least 2 components to normalize")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    comps = np.array(L.components, copy=True)
    q = L.q
    A = np.eye(q)
    B = np.eye(q)
    iterations = 0
    residual = np.inf
    converged = False
    while iterations < max_iter:
        iterations += 1
        comps, F_row = _row_step(comps)
        A = F_row @ A
        comps, F_col = _col_step(comps)
        B = B @ F_col
        out = LinearMapL(comps)
        residual = normalization_residual(out)
        if residual <= tol:
            converged = True
            break
    report = NormalizationReport(iterations=iterations,
                                 residual=float(residual),
                                 converged=converged)
    if return_scaling:
        return out, report, (A, B)
    return out, report


def stability_check(M):
    r"""Certify the local stability bound for matrix scaling.

    For a matrix satisfying the closeness hypotheses below, the scalings
    ``D_2 M D_1`` (doubly stochastic) obey
    ``||D_2 (x) D_1 - I||_2 <= 96 sqrt(q) eps``, where the left-hand side
    equals ``max_{i,j} |row_scale_i * col_scale_j - 1|``.

    Hypotheses checked (a precondition error names the violated one):

    1. ``|M_ij - 1/q| <= 1/(2q)`` for all entries;
    2. ``eps = max(||M e - e||_inf, ||M' e - e||_inf) <= 1/(48 sqrt(q))``.

    Parameters
    ----------
    M : array_like, shape (q, q)

    Returns
    -------
    StabilityResult
        ``(epsilon, bound, lhs)`` with ``lhs <= bound`` guaranteed by the
        stability property.
    """
    M = _as_finite_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    q = M.shape[0]
    slack = 1e-12
    if np.max(np.abs(M - 1.0 / q)) > 1.0 / (2 * q) + slack:
        raise ValueError("hypothesis 1 violated: an entry of M deviates "
                         "from 1/q by more than 1/(2q)")
    ones = np.ones(q)
    eps = max(np.max(np.abs(M @ ones - ones)),
              np.max(np.abs(M.T @ ones - ones)))
    if eps > 1.0 / (48 * np.sqrt(q)) + slack:
        raise ValueError("hypothesis 2 violated: row/column sum deviation "
                         "%.3e exceeds 1/(48 sqrt(q))" % eps)
    result = matrix_sinkhorn(M, tol=1e-14, max_iter=100000)
    lhs = float(np.max(np.abs(np.outer(result.row_scale,
                                       result.col_scale) - 1.0)))
    bound = float(96 * np.sqrt(q) * eps)
    return StabilityResult(epsilon=float(eps), bound=bound, lhs=lhs)
