r"""Random-instance generators and the diagnostics that check the local
convergence theory's hypotheses.

Generators
----------
:func:`gen_gaussian_map` draws maps with i.i.d. ``N(0, 1/d)`` entries —
such maps are nearly normalized and have small restricted-isometry
constants with high probability.  :func:`gen_haar_lowrank` draws factor
sets ``X = U diag(s) V'`` with Haar-distributed singular-vector frames and
singular values uniform on ``[s_min, s_max]`` — the ensemble whose
covariance is isotropic in expectation, ``E[X (box) X] = sbar^2 (r/q^2) I``.

Every sample is drawn from its own substream derived from ``(seed,
index)``, so parallel generation is deterministic and extending a set
never perturbs existing samples.

Diagnostics
-----------
* ``Lambda``/``Delta`` — half-sum and half-difference of the extreme
  eigenvalues of the factor covariance (isotropy measures);
* ``Omega`` — spectral norm of the averaged operator
  ``(X (box) X) (x) P_T(X)`` projected away from the rank-preserver
  tangent space W = span{I (x) W1 + W2 (x) I}; this is the quantity that
  governs the convergence rate of the alternating updates;
* ``rip_estimate`` — a Monte-Carlo *lower bound* on the restricted
  isometry constant delta_k (certifying delta_k exactly is intractable).
"""

from collections import namedtuple

import numpy as np

from .exceptions import NumericalError
from . import seeds
from .linalg import apply_map, covariance, factor_array, vec


__all__ = [
    "HaarLowRankSpec", "CovarianceStats", "EnsembleStats",
    "gen_gaussian_map", "gen_haar_lowrank", "gen_dataset",
    "covariance_stats", "omega", "rip_estimate", "ensemble_stats",
]


CovarianceStats = namedtuple("CovarianceStats", ["lam", "delta"])
"""``lam`` (half-sum) and ``delta`` (half-difference) of the extreme
eigenvalues of the factor covariance."""

EnsembleStats = namedtuple(
    "EnsembleStats", ["lam", "delta", "omega", "delta_ratio", "omega_ratio"])
"""Diagnostics bundle; ``omega``/``omega_ratio`` are None when q exceeds
the dense-materialization gate."""


class HaarLowRankSpec(object):
    """Specification of a Haar low-rank factor ensemble.

    Parameters
    ----------
    q : int
        Matrix side length.
    r : int
        Rank, ``r < q``.
    s_min, s_max : float
        Support of the singular-value distribution, ``0 < s_min <= s_max``
        (the theory uses ``[s/2, s]``); values are drawn uniformly.
    n : int
        Number of samples.
    seed : int
        Master seed; sample j uses the substream ``(seed, "haar", j)``.
    """

    def __init__(self, q, r, s_min, s_max, n, seed):
        q, r, n = int(q), int(r), int(n)
        if q < 1 or r < 1 or n < 1:
            raise ValueError("q, r, n must be positive")
        if r >= q:
            raise ValueError("need r < q")
        if not 0 < s_min <= s_max:
            raise ValueError("need 0 < s_min <= s_max")
        self.q = q
        self.r = r
        self.s_min = float(s_min)
        self.s_max = float(s_max)
        self.n = n
        self.seed = int(seed)


def _haar_frame(rng, q, r):
    """Draw a q x r matrix with orthonormal columns from the Haar measure.

    QR of an i.i.d. Gaussian matrix with the R-diagonal sign correction.
    """
    G = rng.standard_normal((q, r))
    Q, R = np.linalg.qr(G)
    sgn = np.sign(np.diag(R))
    sgn[sgn == 0] = 1.0
    return Q * sgn


def gen_gaussian_map(q, d, seed):
    """Draw a map with i.i.d. ``N(0, 1/d)`` component entries.

    Deterministic given ``seed``: repeat calls return bit-identical maps.
    """
    from .linalg import LinearMapL
    if q < 1 or d < 1:
        raise ValueError("q and d must be positive")
    rng = seeds.substream(seed, "gaussian-map")
    comps = rng.standard_normal((d, q, q)) / np.sqrt(d)
    return LinearMapL(comps)


def gen_haar_lowrank(spec):
    """Draw a factor set ``X_j = U_j diag(s_j) V_j'`` per its spec.

    Every sample has rank exactly ``spec.r`` with singular values in
    ``[s_min, s_max]``.

    Returns
    -------
    ndarray, shape (n, q, q)
    """
    if not isinstance(spec, HaarLowRankSpec):
        raise TypeError("spec must be a HaarLowRankSpec")
    out = np.empty((spec.n, spec.q, spec.q))
    for j in range(spec.n):
        rng = seeds.substream(spec.seed, "haar", index=j)
        U = _haar_frame(rng, spec.q, spec.r)
        V = _haar_frame(rng, spec.q, spec.r)
        s = rng.uniform(spec.s_min, spec.s_max, spec.r)
        out[j] = (U * s) @ V.T
    return out


def gen_dataset(L, Xs):
    """Observe a factor set through a map: column j is ``L(X_j)``.

    Returns
    -------
    ndarray, shape (d, n)
    """
    arr = factor_array(Xs)
    if arr.shape[1:] != (L.q, L.q):
        raise ValueError("factor shape %s does not match map (q=%d)"
                         % (arr.shape[1:], L.q))
    n, q = arr.shape[0], L.q
    V = arr.transpose(0, 2, 1).reshape(n, q * q)
    return L.as_matrix() @ V.T


def covariance_stats(Xs):
    """Half-sum and half-difference of the covariance's extreme eigenvalues.

    Also verifies the bracket ``s_min/q^2 - delta <= lam <= s_max/q^2 +
    delta`` (with ``s_min``/``s_max`` the extreme squared Frobenius norms
    of the set), which holds for every factor set; a violation beyond
    rounding indicates numerical breakdown.

    Returns
    -------
    CovarianceStats
    """
    arr = factor_array(Xs)
    q2 = arr.shape[1] * arr.shape[2]
    w = np.linalg.eigvalsh(covariance(arr))
    lam = float((w[-1] + w[0]) / 2)
    delta = float((w[-1] - w[0]) / 2)
    sq_norms = np.einsum("jab,jab->j", arr, arr)
    slack = 1e-10 * max(1.0, sq_norms.max())
    if not (sq_norms.min() / q2 - delta <= lam + slack
            and lam <= sq_norms.max() / q2 + delta + slack):
        raise NumericalError("covariance eigenvalue bracket violated; "
                             "eigendecomposition failed")
    return CovarianceStats(lam=lam, delta=delta)


def _tangent_projector_matrix(X):
    """Dense q^2 x q^2 matrix of the tangent-space projector at X.

    The rank is X's numerical rank; for full-rank X this is the identity.
    """
    q = X.shape[0]
    U, s, Vt = np.linalg.svd(X)
    r = int(np.sum(s > 1e-10 * s[0])) if s[0] > 0 else 0
    if r == 0:
        return np.zeros((q * q, q * q))
    Pu_perp = np.eye(q) - U[:, :r] @ U[:, :r].T
    Pv_perp = np.eye(q) - Vt[:r].T @ Vt[:r]
    return np.eye(q * q) - np.kron(Pv_perp, Pu_perp)


def _rank_preserver_tangent_basis(q):
    """Orthonormal basis (as columns) of W = span{I (x) W1 + W2 (x) I}.

    The spanning set {I (x) E_ab} U {E_ab (x) I} has dimension 2q^2 - 1
    (the two halves share span(I)); the basis is extracted by SVD with a
    rank cutoff.
    """
    eye = np.eye(q)
    cols = []
    for a in range(q):
        for b in range(q):
            E = np.zeros((q, q))
            E[a, b] = 1.0
            cols.append(vec(np.kron(eye, E)))
            cols.append(vec(np.kron(E, eye)))
    S = np.column_stack(cols)
    U, s, _ = np.linalg.svd(S, full_matrices=False)
    k = int(np.sum(s > 1e-10 * s[0]))
    return U[:, :k]


def omega(Xs, q_max=6):
    r"""Spectral norm of the W-orthogonal part of the averaged operator
    ``(1/n) sum_j (X_j (box) X_j) (x) P_T(X_j)``.

    The operator acts on the q^2-by-q^2 operator space and is materialized
    densely (q^4 x q^4), so the computation is gated to small q.

    Parameters
    ----------
    Xs : factor set
    q_max : int, optional
        Dense-materialization gate (default 6).

    Returns
    -------
    float
    """
    arr = factor_array(Xs)
    n, q = arr.shape[0], arr.shape[1]
    if q > q_max:
        raise ValueError("omega materializes a q^4 x q^4 operator; q=%d "
                         "exceeds the gate q_max=%d" % (q, q_max))
    q2 = q * q
    boxes = np.empty((n, q2 * q2))
    projs = np.empty((n, q2 * q2))
    for j in range(n):
        v = vec(arr[j])
        boxes[j] = np.outer(v, v).ravel()
        projs[j] = _tangent_projector_matrix(arr[j]).ravel()
    # (1/n) sum_j kron(B_j, P_j), accumulated as one Gram product and then
    # reindexed from [(a,b),(c,d)] to the Kronecker order [(a,c),(b,d)]
    K = (boxes.T @ projs) / n
    K = K.reshape(q2, q2, q2, q2).transpose(0, 2, 1, 3).reshape(q2 * q2,
                                                                q2 * q2)
    W = _rank_preserver_tangent_basis(q)
    K -= W @ (W.T @ K)
    return float(np.linalg.norm(K, 2))


def rip_estimate(L, k, trials, seed):
    """Monte-Carlo lower bound on the restricted isometry constant.

    Samples ``trials`` random rank-k unit-Frobenius matrices and returns
    the largest observed ``| ||L(X)||^2 - 1 |``.  This is a lower bound on
    the true constant delta_k, not a certificate.
    """
    k = int(k)
    if not 1 <= k <= L.q:
        raise ValueError("need 1 <= k <= q")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = seeds.substream(seed, "rip")
    worst = 0.0
    for _ in range(trials):
        A = rng.standard_normal((L.q, k))
        B = rng.standard_normal((L.q, k))
        X = A @ B.T
        X /= np.linalg.norm(X)
        worst = max(worst, abs(np.linalg.norm(apply_map(L, X)) ** 2 - 1.0))
    return float(worst)


def ensemble_stats(Xs, q_max=6):
    """Bundle Lambda, Delta, Omega and their ratios for a factor set.

    Omega (and its ratio) is None when q exceeds ``q_max``.
    """
    arr = factor_array(Xs)
    stats = covariance_stats(arr)
    q = arr.shape[1]
    if q <= q_max:
        om = omega(arr, q_max=q_max)
        om_ratio = om / stats.lam if stats.lam > 0 else np.inf
    else:
        om = None
        om_ratio = None
    delta_ratio = stats.delta / stats.lam if stats.lam > 0 else np.inf
    return EnsembleStats(lam=stats.lam, delta=stats.delta, omega=om,
                         delta_ratio=delta_ratio, omega_ratio=om_ratio)
