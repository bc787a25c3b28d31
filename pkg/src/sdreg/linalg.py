r"""Dense linear-algebra substrate: SVD helpers, rank truncation,
tangent-space projections, box-product covariance, and the linear maps
:math:`\mathcal{L} : \mathbb{R}^{q \times q} \to \mathbb{R}^d` that define
semidefinite-representable regularizers.

Conventions
-----------
The canonical vectorization used everywhere in this package is
*column-stacking*: ``vec(X)[i + q*j] = X[i, j]``.  With this choice the
operator ``Z -> B Z A'`` has matrix ``np.kron(A, B)``, and all dense
operator matrices (covariances, tangent projectors, the big diagnostic
operators) are reproducible bit-for-bit from the same inputs.

Sign conventions of singular vectors are unconstrained; downstream code
compares projectors and residuals, never raw singular vectors.
"""

from collections import namedtuple

import numpy as np


__all__ = [
    "SvdResult", "TangentSpace", "LinearMapL",
    "vec", "unvec", "svd", "truncate_rank",
    "tangent_space_of", "tangent_project",
    "apply_map", "adjoint_map", "covariance",
    "compose_conjugation", "factor_array", "vectorization_map",
]


SvdResult = namedtuple("SvdResult", ["left", "singulars", "right"])
"""Thin SVD ``A = left @ diag(singulars) @ right.T`` with orthonormal
columns in ``left`` and ``right`` and nonincreasing singular values."""

TangentSpace = namedtuple("TangentSpace", ["base_left", "base_right", "rank"])
"""Tangent space ``T(X) = {XA + BX}`` to the rank-r variety at X, stored as
orthonormal bases of the column space (``base_left``) and row space
(``base_right``) of X."""


def _as_finite_matrix(A, name="matrix"):
    """Coerce to a 2-d float array, rejecting NaN/Inf."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("%s must be 2-dimensional, got shape %s"
                         % (name, (A.shape,)))
    if not np.all(np.isfinite(A)):
        raise ValueError("%s contains non-finite entries" % name)
    return A


def vec(X):
    """Column-stack a matrix into a vector (the canonical vectorization)."""
    return np.asarray(X).ravel(order="F")


def unvec(x, rows, cols=None):
    """Invert :func:`vec`: reshape a vector into a ``rows x cols`` matrix."""
    if cols is None:
        cols = rows
    x = np.asarray(x)
    if x.size != rows * cols:
        raise ValueError("cannot reshape length-%d vector to %dx%d"
                         % (x.size, rows, cols))
    return x.reshape(rows, cols, order="F")


def factor_array(Xs, name="factor set"):
    """Coerce a collection of equally-shaped matrices to an (n, q1, q2) array.

    Raises
    ------
    ValueError
        If the collection is empty, shapes are inconsistent, or entries are
        non-finite.
    """
    if isinstance(Xs, np.ndarray) and Xs.ndim == 3:
        arr = np.asarray(Xs, dtype=float)
    else:
        mats = [np.asarray(X, dtype=float) for X in Xs]
        if len(mats) == 0:
            raise ValueError("%s is empty" % name)
        shape = mats[0].shape
        if any(m.shape != shape for m in mats):
            raise ValueError("%s has inconsistent shapes" % name)
        arr = np.stack(mats, axis=0)
    if arr.shape[0] == 0:
        raise ValueError("%s is empty" % name)
    if arr.ndim != 3:
        raise ValueError("%s must stack 2-d matrices" % name)
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite entries" % name)
    return arr


class LinearMapL(object):
    r"""A linear map :math:`\mathbb{R}^{q\times q} \to \mathbb{R}^d` stored
    as ``d`` component matrices, ``apply(X)[i] = <L_i, X>``.

    Parameters
    ----------
    components : array_like, shape (d, q, q)
        The component matrices :math:`L_i`.  Entries must be finite.

    Attributes
    ----------
    components : ndarray, shape (d, q, q)
        Read-only view of the components.
    d : int
        Output dimension.
    q : int
        Side length of the input matrices.
    """

    def __init__(self, components):
        arr = np.array(components, dtype=float, copy=True)
        if arr.ndim != 3:
            raise ValueError("components must have shape (d, q, q), got %s"
                             % (arr.shape,))
        d, q, q2 = arr.shape
        if q != q2:
            raise ValueError("component matrices must be square, got %dx%d"
                             % (q, q2))
        if d < 1 or q < 1:
            raise ValueError("need d >= 1 and q >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("components contain non-finite entries")
        arr.setflags(write=False)
        self.components = arr
        self.d = d
        self.q = q
        self._matrix = None
        self._norm2 = None

    @classmethod
    def from_matrix(cls, M, q):
        """Build a map from its d x q^2 matrix (rows are vec'd components)."""
        M = _as_finite_matrix(M, "map matrix")
        if M.shape[1] != q * q:
            raise ValueError("map matrix has %d columns, expected q^2 = %d"
                             % (M.shape[1], q * q))
        comps = M.reshape(M.shape[0], q, q).transpose(0, 2, 1)
        return cls(comps)

    def as_matrix(self):
        """Return the d x q^2 matrix whose row i is vec(L_i)."""
        if self._matrix is None:
            M = self.components.transpose(0, 2, 1).reshape(self.d, self.q ** 2)
            M.setflags(write=False)
            self._matrix = M
        return self._matrix

    def norm2(self):
        """Spectral norm of the map (largest singular value of as_matrix)."""
        if self._norm2 is None:
            self._norm2 = float(np.linalg.norm(self.as_matrix(), 2))
        return self._norm2

    def __eq__(self, other):
        if not isinstance(other, LinearMapL):
            return NotImplemented
        return (self.d == other.d and self.q == other.q
                and np.array_equal(self.components, other.components))

    def __repr__(self):
        return "LinearMapL(d=%d, q=%d)" % (self.d, self.q)


def svd(A):
    """Full (thin) singular value decomposition.

    Parameters
    ----------
    A : array_like
        Matrix with finite entries.

    Returns
    -------
    SvdResult
        ``left``, ``singulars``, ``right`` with
        ``A = left @ diag(singulars) @ right.T`` and singular values sorted
        in nonincreasing order.
    """
    A = _as_finite_matrix(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return SvdResult(left=U, singulars=s, right=Vt.T)


def truncate_rank(A, r):
    """Best rank-r approximation in Frobenius norm (Eckart-Young).

    Parameters
    ----------
    A : array_like
    r : int
        Target rank, ``1 <= r <= min(A.shape)``.

    Returns
    -------
    ndarray
        ``U_r @ diag(s_r) @ V_r.T`` keeping the ``r`` largest singular
        values.
    """
    A = _as_finite_matrix(A)
    r = int(r)
    if not 1 <= r <= min(A.shape):
        raise ValueError("rank %d out of range for shape %s" % (r, A.shape))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def tangent_space_of(X, r):
    """Tangent space to the variety of rank-<=r matrices at a rank-r point.

    Parameters
    ----------
    X : array_like, shape (q, q)
        Matrix of numerical rank at least ``r``.
    r : int

    Returns
    -------
    TangentSpace
        Top-r left/right singular vectors of X.

    Raises
    ------
    ValueError
        If ``sigma_r(X) <= 1e-10 * sigma_1(X)`` (degenerate tangent space).
    """
    X = _as_finite_matrix(X, "X")
    r = int(r)
    if not 1 <= r <= min(X.shape):
        raise ValueError("rank %d out of range for shape %s" % (r, X.shape))
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s[r - 1] <= 1e-10 * s[0]:
        raise ValueError("X is numerically rank deficient (sigma_%d = %.3e): "
                         "tangent space is degenerate" % (r, s[r - 1]))
    return TangentSpace(base_left=U[:, :r], base_right=Vt[:r].T, rank=r)


def tangent_project(T, Z):
    r"""Project onto the tangent space: ``Z - P_{U_perp} Z P_{V_perp}``.

    The projector is idempotent and self-adjoint, and fixes the base point's
    row/column spaces: every matrix of the form ``XA + BX`` is fixed.

    Parameters
    ----------
    T : TangentSpace
    Z : array_like
        Same shape as the matrix that generated ``T``.

    Returns
    -------
    ndarray
    """
    Z = _as_finite_matrix(Z, "Z")
    U, V = T.base_left, T.base_right
    if Z.shape != (U.shape[0], V.shape[0]):
        raise ValueError("Z has shape %s, expected %s"
                         % (Z.shape, (U.shape[0], V.shape[0])))
    W = Z - U @ (U.T @ Z)          # P_{U_perp} Z
    W = W - (W @ V) @ V.T          # P_{U_perp} Z P_{V_perp}
    return Z - W


def apply_map(L, X):
    """Apply a LinearMapL: component i of the result is <L_i, X>."""
    X = np.asarray(X, dtype=float)
    if X.shape != (L.q, L.q):
        raise ValueError("X has shape %s, expected (%d, %d)"
                         % (X.shape, L.q, L.q))
    return L.as_matrix() @ vec(X)


def adjoint_map(L, v):
    """Adjoint of :func:`apply_map`: returns ``sum_i v_i L_i``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (L.d,):
        raise ValueError("v has length %s, expected %d" % (v.shape, L.d))
    return unvec(L.as_matrix().T @ v, L.q)


def covariance(Xs):
    r"""Covariance of a factor set in the canonical vectorization basis.

    Returns the :math:`q^2 \times q^2` matrix of the operator
    :math:`\frac{1}{n}\sum_j X^{(j)} \boxtimes X^{(j)}`, i.e.
    ``(1/n) sum_j vec(X_j) vec(X_j)'``.  The result is symmetric positive
    semidefinite with trace equal to the mean squared Frobenius norm.

    Parameters
    ----------
    Xs : sequence of (q, q) arrays, or ndarray of shape (n, q, q)

    Returns
    -------
    ndarray, shape (q*q, q*q)
    """
    arr = factor_array(Xs)
    n, q1, q2 = arr.shape
    V = arr.transpose(0, 2, 1).reshape(n, q1 * q2)
    C = V.T @ V / n
    return (C + C.T) / 2.0


def vectorization_map(q):
    """The map whose output is vec(X) itself (an exact isometry).

    Its d = q^2 components are the canonical basis matrices ordered to
    match the canonical vectorization, so ``as_matrix()`` is the identity.
    """
    return LinearMapL.from_matrix(np.eye(q * q), q)


def compose_conjugation(L, A, B):
    """Compose a map with the rank-preserver ``X -> A X B'``.

    Returns the LinearMapL of ``X -> L(A X B')``, whose components are
    ``A' L_i B``.
    """
    A = _as_finite_matrix(A, "A")
    B = _as_finite_matrix(B, "B")
    if A.shape != (L.q, L.q) or B.shape != (L.q, L.q):
        raise ValueError("conjugating matrices must be q x q")
    comps = np.einsum("ab,iac,cd->ibd", A, L.components, B, optimize=True)
    return LinearMapL(comps)
