"""Matrix and operator Sinkhorn scaling, residuals, stability bounds."""

import numpy as np
import pytest

from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.linalg import circulant

from sdreg import evaluate, linalg, scaling
from sdreg.exceptions import SingularOperatorError

from conftest import make_normalized_map


# ---------------------------------------------------------------------------
# matrix_sinkhorn


def test_matrix_sinkhorn_makes_doubly_stochastic(rng):
    M = rng.uniform(0.1, 2.0, size=(5, 5))
    result = scaling.matrix_sinkhorn(M, tol=1e-12)
    assert result.converged
    scaled = result.row_scale[:, None] * M * result.col_scale[None, :]
    assert_allclose(scaled.sum(axis=1), np.ones(5), atol=1e-11)
    assert_allclose(scaled.sum(axis=0), np.ones(5), atol=1e-11)
    assert result.residual <= 1e-12


def test_matrix_sinkhorn_fixed_point():
    # a doubly stochastic matrix needs no scaling at all
    M = circulant([0.5, 0.3, 0.2])
    result = scaling.matrix_sinkhorn(M, tol=1e-12)
    assert result.iterations == 1
    assert_allclose(result.row_scale, np.ones(3), atol=1e-12)
    assert_allclose(result.col_scale, np.ones(3), atol=1e-12)


def test_matrix_sinkhorn_absorbs_scalar():
    # c * (doubly stochastic): every product row_i * col_j must equal 1/c
    c = 2.5
    M = c * circulant([0.6, 0.1, 0.1, 0.2])
    result = scaling.matrix_sinkhorn(M, tol=1e-13)
    products = np.outer(result.row_scale, result.col_scale)
    assert_allclose(products, np.full((4, 4), 1.0 / c), atol=1e-11)


@settings(deadline=None, max_examples=25)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_matrix_sinkhorn_positive_matrices_converge(q, seed):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.2, 3.0, size=(q, q))
    result = scaling.matrix_sinkhorn(M, tol=1e-10)
    scaled = result.row_scale[:, None] * M * result.col_scale[None, :]
    assert result.converged
    assert np.max(np.abs(scaled.sum(axis=0) - 1.0)) <= 1e-10
    assert np.max(np.abs(scaled.sum(axis=1) - 1.0)) <= 1e-10


def test_matrix_sinkhorn_rejects_bad_input():
    with pytest.raises(ValueError, match="square"):
        scaling.matrix_sinkhorn(np.ones((2, 3)))
    with pytest.raises(ValueError, match="nonpositive"):
        scaling.matrix_sinkhorn(np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(ValueError, match="tol"):
        scaling.matrix_sinkhorn(np.ones((2, 2)), tol=0.0)


def test_matrix_sinkhorn_reports_exhaustion():
    rng = np.random.default_rng(3)
    M = rng.uniform(0.1, 5.0, size=(6, 6))
    result = scaling.matrix_sinkhorn(M, tol=1e-15, max_iter=1)
    assert not result.converged
    assert result.iterations == 1


# ---------------------------------------------------------------------------
# the T operator and the normalization residual


def test_t_operator_matches_direct_sum(rng):
    q, d = 4, 7
    L = linalg.LinearMapL(rng.standard_normal((d, q, q)))
    Z = rng.standard_normal((q, q))
    direct = sum(L.components[i] @ Z @ L.components[i].T
                 for i in range(d)) / q
    assert_allclose(scaling.t_operator_apply(L, Z), direct, atol=1e-12)
    direct_adj = sum(L.components[i].T @ Z @ L.components[i]
                     for i in range(d)) / q
    assert_allclose(scaling.t_operator_adjoint_apply(L, Z), direct_adj,
                    atol=1e-12)


def test_t_operator_adjoint_pairing(rng):
    # <T(Z), W> == <Z, T'(W)> in the trace inner product
    q, d = 5, 9
    L = linalg.LinearMapL(rng.standard_normal((d, q, q)))
    Z = rng.standard_normal((q, q))
    W = rng.standard_normal((q, q))
    lhs = np.sum(scaling.t_operator_apply(L, Z) * W)
    rhs = np.sum(Z * scaling.t_operator_adjoint_apply(L, W))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_t_operator_preserves_psd(rng):
    q, d = 4, 6
    L = linalg.LinearMapL(rng.standard_normal((d, q, q)))
    G = rng.standard_normal((q, q))
    Z = G @ G.T
    out = scaling.t_operator_apply(L, Z)
    assert_allclose(out, out.T, atol=1e-12)
    assert np.linalg.eigvalsh((out + out.T) / 2).min() >= -1e-12


def test_t_operator_shape_check(rng):
    L = linalg.LinearMapL(rng.standard_normal((3, 4, 4)))
    with pytest.raises(ValueError, match="shape"):
        scaling.t_operator_apply(L, np.eye(3))


def test_normalized_map_fixes_identity():
    L = make_normalized_map(5, 30, seed=11)
    assert_allclose(scaling.t_operator_apply(L, np.eye(5)), np.eye(5),
                    atol=1e-9)
    assert_allclose(scaling.t_operator_adjoint_apply(L, np.eye(5)), np.eye(5),
                    atol=1e-9)
    assert scaling.normalization_residual(L) <= 1e-9


def test_normalization_residual_of_scaled_map():
    # multiplying every component by (1 + a) scales both Gram operators by
    # (1 + a)^2, so the residual is exactly (1 + a)^2 - 1
    L = make_normalized_map(4, 20, seed=5)
    a = 0.125
    base = scaling.normalization_residual(L)
    scaled = linalg.LinearMapL((1 + a) * np.array(L.components))
    expected = (1 + a) ** 2 - 1
    assert abs(scaling.normalization_residual(scaled) - expected) <= \
        10 * base + 1e-12


def test_normalization_residual_matches_spectral_norms(rng):
    q, d = 4, 9
    L = linalg.LinearMapL(rng.standard_normal((d, q, q)))
    comps = np.array(L.components)
    row = sum(comps[i] @ comps[i].T for i in range(d)) / q - np.eye(q)
    col = sum(comps[i].T @ comps[i] for i in range(d)) / q - np.eye(q)
    expected = max(np.linalg.norm(row, 2), np.linalg.norm(col, 2))
    assert abs(scaling.normalization_residual(L) - expected) <= 1e-10


# ---------------------------------------------------------------------------
# operator Sinkhorn normalization


def test_normalize_gaussian_maps():
    for q in (4, 5):
        d = 2 * q * q
        rng = np.random.default_rng(100 + q)
        L = linalg.LinearMapL(rng.standard_normal((d, q, q)) / np.sqrt(d))
        out, report = scaling.operator_sinkhorn_normalize(L, tol=1e-10)
        assert report.converged
        assert report.residual <= 1e-10
        assert abs(scaling.normalization_residual(out) - report.residual) \
            <= 1e-12


def test_normalize_is_fixed_point_on_normalized_maps():
    L = make_normalized_map(4, 24, seed=2)
    out, report = scaling.operator_sinkhorn_normalize(L, tol=1e-9)
    assert report.iterations == 1
    change = np.max(np.linalg.norm(
        np.array(out.components) - np.array(L.components), axis=(1, 2)))
    assert change <= 1e-10


def test_row_step_is_exact():
    # after the first half-pass the row Gram operator equals q I exactly
    rng = np.random.default_rng(7)
    comps = rng.standard_normal((12, 4, 4))
    stepped, _ = scaling._row_step(comps)
    gram = np.einsum("iab,icb->ac", stepped, stepped)
    assert_allclose(gram, 4 * np.eye(4), atol=1e-10)


def test_normalize_returns_accumulated_scaling(rng):
    q, d = 4, 20
    L = linalg.LinearMapL(rng.standard_normal((d, q, q)) / np.sqrt(d))
    out, report, (A, B) = scaling.operator_sinkhorn_normalize(
        L, tol=1e-10, return_scaling=True)
    assert report.converged
    rebuilt = np.einsum("ab,ibc,cd->iad", A, np.array(L.components), B)
    assert_allclose(rebuilt, np.array(out.components), atol=1e-9)


def test_normalize_preserves_regularizer():
    # composing with a positive-definite rank-preserver and renormalizing
    # keeps the unit ball: the surrogate distance stays at solver precision
    q, d = 4, 32
    L = make_normalized_map(q, d, seed=9)
    rng = np.random.default_rng(21)
    S1 = rng.standard_normal((q, q))
    S2 = rng.standard_normal((q, q))
    P1 = np.eye(q) + 0.2 * (S1 + S1.T) / np.linalg.norm(S1 + S1.T, 2)
    P2 = np.eye(q) + 0.2 * (S2 + S2.T) / np.linalg.norm(S2 + S2.T, 2)
    composed = linalg.compose_conjugation(L, P1, P2)
    renorm, report = scaling.operator_sinkhorn_normalize(composed, tol=1e-12)
    assert report.converged
    probes = evaluate.probe_set(q, 40, seed=17)
    assert evaluate.dist(L, renorm, probes) <= 1e-6


def test_normalize_rejects_degenerate_maps():
    with pytest.raises(ValueError, match="at least 2"):
        scaling.operator_sinkhorn_normalize(
            linalg.LinearMapL(np.ones((1, 3, 3))))
    # identical rank-one components make the row Gram operator singular
    comp = np.outer(np.ones(3), np.eye(3)[0]).reshape(1, 3, 3)
    L = linalg.LinearMapL(np.repeat(comp, 5, axis=0))
    with pytest.raises(SingularOperatorError, match="singular"):
        scaling.operator_sinkhorn_normalize(L)


def test_normalize_reports_exhaustion(rng):
    L = linalg.LinearMapL(rng.standard_normal((18, 3, 3)))
    out, report = scaling.operator_sinkhorn_normalize(L, tol=1e-15,
                                                      max_iter=1)
    assert not report.converged
    assert report.iterations == 1
    assert scaling.normalization_residual(out) == pytest.approx(
        report.residual)


# ---------------------------------------------------------------------------
# scaling stability


def _near_uniform_matrix(q, seed, magnitude):
    rng = np.random.default_rng(seed)
    Z = rng.uniform(-1.0, 1.0, size=(q, q))
    return 1.0 / q + magnitude * Z


def test_stability_check_certifies_bound():
    M = _near_uniform_matrix(4, seed=0, magnitude=1e-3)
    result = scaling.stability_check(M)
    ones = np.ones(4)
    eps = max(np.max(np.abs(M @ ones - ones)),
              np.max(np.abs(M.T @ ones - ones)))
    assert result.epsilon == pytest.approx(eps)
    assert result.bound == pytest.approx(96 * 2.0 * eps)
    assert result.lhs <= result.bound


def test_stability_bound_holds_on_random_instances():
    failures = 0
    for trial in range(10):
        q = 3 + trial % 6
        M = _near_uniform_matrix(q, seed=40 + trial,
                                 magnitude=1.0 / (50 * q * np.sqrt(q)))
        result = scaling.stability_check(M)
        if result.lhs > result.bound:
            failures += 1
    assert failures == 0


def test_stability_check_names_violated_hypothesis():
    q = 4
    M1 = np.full((q, q), 1.0 / q)
    M1[0, 0] += 1.0 / (2 * q) + 0.01
    with pytest.raises(ValueError, match="hypothesis 1"):
        scaling.stability_check(M1)
    M2 = np.full((q, q), 1.0 / q + 0.05 / q)
    with pytest.raises(ValueError, match="hypothesis 2"):
        scaling.stability_check(M2)


def test_operator_scaling_stays_near_identity():
    # perturbing a normalized map by a small positive-definite conjugation
    # forces the accumulated Sinkhorn scalings back toward the identity,
    # within the same 96 sqrt(q) * eps stability envelope
    q, d = 4, 32
    L = make_normalized_map(q, d, seed=31)
    rng = np.random.default_rng(8)
    S1 = rng.standard_normal((q, q))
    S2 = rng.standard_normal((q, q))
    delta = 1e-3
    P1 = np.eye(q) + delta * (S1 + S1.T) / np.linalg.norm(S1 + S1.T, 2)
    P2 = np.eye(q) + delta * (S2 + S2.T) / np.linalg.norm(S2 + S2.T, 2)
    perturbed = linalg.compose_conjugation(L, P1, P2)
    eps = scaling.normalization_residual(perturbed)
    assert eps <= 1.0 / (48 * np.sqrt(q))  # inside the stability regime
    _, report, (A, B) = scaling.operator_sinkhorn_normalize(
        perturbed, tol=1e-12, return_scaling=True)
    assert report.converged
    # positive-definite polar factors, with the free scalar optimized out
    UA, sA, VAt = np.linalg.svd(A)
    UB, sB, VBt = np.linalg.svd(B)
    NA = (UA * sA) @ UA.T
    NB = (VBt.T * sB) @ VBt
    K = np.kron(NB, NA)
    w = np.linalg.eigvalsh((K + K.T) / 2)
    lhs = (w[-1] - w[0]) / (w[-1] + w[0])  # min_alpha ||alpha K - I||_2
    assert lhs <= 96 * np.sqrt(q) * eps + 1e-12
