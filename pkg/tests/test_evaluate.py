"""Surrogate distance, recovery calls, denoising, complexity accounting."""

import numpy as np
import pytest

from numpy.testing import assert_allclose

from sdreg import ensembles, evaluate, linalg, scaling, seeds
from sdreg.evaluate import DistProbeSet
from sdreg.learning import LearnOptions
from sdreg.solvers import SolverOptions

# learning inside the denoising experiment starts from the data-generating
# map, so a handful of outer iterations is all the polishing it needs
_FEW_OUTERS = LearnOptions(max_outer_iter=6)

from conftest import make_normalized_map, planted_rank_one, random_rank


# ---------------------------------------------------------------------------
# probe sets


def test_probes_are_unit_rank_one():
    probes = evaluate.probe_set(5, 25, seed=3)
    assert probes.ell == 25
    assert probes.q == 5
    for P in probes.probes:
        s = np.linalg.svd(P, compute_uv=False)
        assert abs(s[0] - 1.0) <= 1e-12
        assert np.all(s[1:] <= 1e-12)


def test_probe_stream_is_prefix_stable():
    short = evaluate.probe_set(4, 10, seed=9)
    long = evaluate.probe_set(4, 50, seed=9)
    assert_allclose(short.probes, long.probes[:10], atol=0)
    again = evaluate.probe_set(4, 10, seed=9)
    assert_allclose(short.probes, again.probes, atol=0)


def test_probe_set_validation(rng):
    good = evaluate.probe_set(3, 4, seed=0).probes.copy()
    bad = good.copy()
    bad[1] += 0.5 * np.eye(3)  # no longer rank one
    with pytest.raises(ValueError, match="probe 1"):
        DistProbeSet(bad, seed=0)
    with pytest.raises(ValueError, match="square"):
        DistProbeSet(rng.standard_normal((2, 3, 4)), seed=0)
    probes = DistProbeSet(good, seed=7)
    assert probes.seed == 7
    with pytest.raises(ValueError):
        probes.probes[0, 0, 0] = 2.0  # read-only


# ---------------------------------------------------------------------------
# the surrogate distance


def test_dist_of_map_to_itself_is_tiny():
    L = make_normalized_map(4, 24, seed=1)
    probes = evaluate.probe_set(4, 30, seed=2)
    assert evaluate.dist(L, L, probes) <= 1e-10


def test_dist_invariant_under_orthogonal_conjugation(rng):
    L = make_normalized_map(4, 24, seed=4)
    Q1 = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    Q2 = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    composed = linalg.compose_conjugation(L, Q1, Q2)
    probes = evaluate.probe_set(4, 30, seed=5)
    assert evaluate.dist(L, composed, probes) <= 1e-6


def test_dist_separates_and_tolerates_probe_seed():
    # a visibly different map must register as far; swapping the probe
    # seed moves the Monte-Carlo estimate by at most ~20 percent
    q, d, ell = 7, 30, 100
    Lstar = make_normalized_map(q, d, seed=6)
    noise = ensembles.gen_gaussian_map(q, d, seed=77)
    bent = linalg.LinearMapL(
        np.array(Lstar.components) + 0.5 * np.array(noise.components))
    far, report = scaling.operator_sinkhorn_normalize(bent)
    assert report.converged
    a = evaluate.dist(Lstar, far, evaluate.probe_set(q, ell, seed=8))
    b = evaluate.dist(Lstar, far, evaluate.probe_set(q, ell, seed=9))
    assert a > 1e-3
    assert b > 1e-3
    assert abs(a - b) <= 0.2 * max(a, b)


def test_dist_validates_shapes():
    L = make_normalized_map(4, 24, seed=10)
    other = make_normalized_map(5, 24, seed=11)
    probes = evaluate.probe_set(4, 5, seed=0)
    with pytest.raises(ValueError, match="mismatched"):
        evaluate.dist(L, other, probes)
    with pytest.raises(ValueError, match="probe size"):
        evaluate.dist(other, other, probes)


# ---------------------------------------------------------------------------
# success declaration


def test_recovery_success_threshold_is_strict():
    assert evaluate.recovery_success(0.0)
    assert evaluate.recovery_success(5e-4)
    assert not evaluate.recovery_success(1e-3)
    assert not evaluate.recovery_success(0.5)
    assert evaluate.recovery_success(0.4, threshold=0.5)
    with pytest.raises(ValueError, match="nonnegative"):
        evaluate.recovery_success(-1e-9)


# ---------------------------------------------------------------------------
# proximal denoising


def test_semidefinite_denoise_zero_penalty(rng):
    # surjective map (d < q^2): with no regularization the fit is exact
    L = make_normalized_map(4, 10, seed=12)
    y = rng.standard_normal(10)
    out = evaluate.prox_denoise_semidefinite(
        L, y, 0.0, SolverOptions(tol=1e-13, max_iter=20000))
    assert np.linalg.norm(out.estimate - y) <= 1e-6
    assert_allclose(out.estimate, linalg.apply_map(L, out.lifted),
                    atol=1e-12)


def test_semidefinite_denoise_large_penalty(rng):
    L = make_normalized_map(4, 20, seed=13)
    y = rng.standard_normal(20)
    lam = np.linalg.norm(linalg.adjoint_map(L, y), 2) * 1.05
    out = evaluate.prox_denoise_semidefinite(L, y, lam)
    assert np.all(out.lifted == 0.0)
    assert np.all(out.estimate == 0.0)
    # objective then equals the pure data term
    assert out.objective == pytest.approx(0.5 * float(y @ y))


def test_denoise_objective_identity(rng):
    L = make_normalized_map(4, 20, seed=14)
    y = rng.standard_normal(20)
    lam = 0.3
    out = evaluate.prox_denoise_semidefinite(L, y, lam)
    nuc = np.linalg.svd(out.lifted, compute_uv=False).sum()
    expected = 0.5 * np.sum((y - out.estimate) ** 2) + lam * nuc
    assert out.objective == pytest.approx(expected)
    assert out.lam == lam


def test_semidefinite_denoise_sweep_beats_endpoints():
    q, d = 4, 12
    L = make_normalized_map(q, d, seed=15)
    rng = np.random.default_rng(16)
    X_star = random_rank(rng, q, 1)
    y_clean = linalg.apply_map(L, X_star)
    y = y_clean + 0.15 * rng.standard_normal(d)

    def mse(lam):
        est = evaluate.prox_denoise_semidefinite(
            L, y, lam, SolverOptions(tol=1e-12, max_iter=20000)).estimate
        return float(np.sum((est - y_clean) ** 2))

    lo = mse(0.0)
    hi = mse(np.linalg.norm(linalg.adjoint_map(L, y), 2))
    mid = min(mse(l) for l in (0.05, 0.1, 0.2, 0.4))
    assert mid < lo
    assert mid < hi


def test_polyhedral_denoise_endpoints(rng):
    D = np.linalg.qr(rng.standard_normal((10, 10)))[0][:, :6]
    D = D / np.linalg.norm(D, axis=0)
    y_in_range = D @ rng.standard_normal(6)
    out = evaluate.prox_denoise_polyhedral(
        D, y_in_range, 0.0, SolverOptions(tol=1e-13, max_iter=20000))
    assert np.linalg.norm(out.estimate - y_in_range) <= 1e-6
    y = rng.standard_normal(10)
    lam = np.max(np.abs(D.T @ y)) * 1.05
    out = evaluate.prox_denoise_polyhedral(D, y, lam)
    assert np.all(out.lifted == 0.0)
    ell1 = np.abs(out.lifted).sum()
    assert out.objective == pytest.approx(
        0.5 * np.sum((y - out.estimate) ** 2) + lam * ell1)


def test_denoise_rejects_mismatched_model_kind(rng):
    from sdreg.learning import RegularizerModel
    model = RegularizerModel("polyhedral", rng.standard_normal((6, 4)),
                             sparsity=1)
    with pytest.raises(ValueError, match="expected a semidefinite"):
        evaluate.prox_denoise_semidefinite(model, np.zeros(6), 0.1)


# ---------------------------------------------------------------------------
# complexity accounting and snr


def test_representation_complexity_hand_arithmetic():
    # 2qr - r^2 + d q^2 / n and 2s + d p / n on integer inputs
    assert evaluate.representation_complexity(
        "semidefinite", 9, 1, 64, 6480) == pytest.approx(17.8)
    assert evaluate.representation_complexity(
        "polyhedral", 100, 8, 64, 6480) == pytest.approx(16.0 + 6400 / 6480)
    # the map cost is amortized away by large n
    limit = evaluate.representation_complexity(
        "semidefinite", 9, 2, 64, 10 ** 12)
    assert limit == pytest.approx(2 * 9 * 2 - 4)
    with pytest.raises(ValueError, match="positive"):
        evaluate.representation_complexity("semidefinite", 9, 0, 64, 100)
    with pytest.raises(ValueError, match="kind"):
        evaluate.representation_complexity("conic", 9, 1, 64, 100)


def test_snr_formula(rng):
    Y = rng.standard_normal((6, 9))
    expected = np.mean([np.sum(Y[:, j] ** 2) for j in range(9)]) / (6 * 0.25)
    assert evaluate.snr(Y, 0.5) == pytest.approx(expected)
    with pytest.raises(ValueError, match="sigma"):
        evaluate.snr(Y, 0.0)


# ---------------------------------------------------------------------------
# the denoising experiment


def test_denoise_experiment_table_and_baseline():
    q, d = 3, 8
    L, _, train = planted_rank_one(q, d, n=50, seed=17)
    _, _, test = planted_rank_one(q, d, n=12, seed=17)
    test = test[:, -12:]
    grid = [0.05, 0.1, 0.2, 0.4]
    configs = [{"kind": "semidefinite", "q": q, "r": 1, "name": "learned",
                "init": L, "opts": _FEW_OUTERS}]
    table = evaluate.denoise_experiment(train, test, 0.2, grid, configs,
                                        seed=18)
    names = [row[0] for row in table.rows]
    assert names == ["euclidean"] * 4 + ["learned"] * 4
    assert [row[1] for row in table.rows] == grid * 2
    for name in ("euclidean", "learned"):
        rows = [r for r in table.rows if r[0] == name]
        best_lam, best_nmse = table.best[name]
        assert best_nmse == pytest.approx(min(r[2] for r in rows))
        assert (best_lam, best_nmse) in [(r[1], r[2]) for r in rows]
    # the learned regularizer must beat generic shrinkage on planted data
    assert table.best["learned"][1] <= table.best["euclidean"][1]
    # the reported snr is the realized one of the corrupted test set
    noise = seeds.substream(18, "noise").standard_normal(test.shape)
    assert table.snr == pytest.approx(evaluate.snr(test + 0.2 * noise, 0.2))


def test_denoise_experiment_is_deterministic():
    q, d = 3, 8
    L, _, train = planted_rank_one(q, d, n=30, seed=19)
    _, _, test = planted_rank_one(q, d, n=6, seed=19)
    configs = [{"kind": "semidefinite", "q": q, "r": 1, "init": L,
                "opts": _FEW_OUTERS}]
    t1 = evaluate.denoise_experiment(train, test, 0.1, [0.1, 0.3], configs,
                                     seed=20)
    t2 = evaluate.denoise_experiment(train, test, 0.1, [0.1, 0.3], configs,
                                     seed=20)
    assert t1.rows == t2.rows
    assert t1.best == t2.best


def test_denoise_experiment_near_clean_data_interpolates():
    # vanishing corruption plus a vanishing penalty: the model interpolates
    # the corrupted observations exactly, so the estimation error is the
    # injected noise itself and the sigma-normalized error equals the noise
    # energy ||g||^2/(n d) -- the raw error vanishes with the noise level
    q, d = 3, 8
    L, _, train = planted_rank_one(q, d, n=40, seed=21)
    _, _, test = planted_rank_one(q, d, n=8, seed=21)
    configs = [{"kind": "semidefinite", "q": q, "r": 1, "init": L,
                "name": "learned", "opts": _FEW_OUTERS}]
    sigma = 1e-3
    table = evaluate.denoise_experiment(train, test, sigma, [0.0, 0.5],
                                        configs, seed=22)
    assert table.best["learned"][0] == 0.0
    noise = seeds.substream(22, "noise").standard_normal(test.shape)
    energy = np.sum(noise ** 2) / noise.size
    assert table.best["learned"][1] == pytest.approx(energy, rel=1e-3)
    # the un-normalized mean squared error is sigma^2 * energy: tiny
    assert table.best["learned"][1] * d * sigma ** 2 <= 10 * sigma ** 2


def test_denoise_experiment_validation(rng):
    with pytest.raises(ValueError, match="different dimensions"):
        evaluate.denoise_experiment(rng.standard_normal((4, 5)),
                                    rng.standard_normal((5, 5)),
                                    0.1, [0.1], [], seed=0)
    Y = rng.standard_normal((4, 5))
    with pytest.raises(ValueError, match="noise_sigma"):
        evaluate.denoise_experiment(Y, Y, 0.0, [0.1], [], seed=0)
    with pytest.raises(ValueError, match="lambda_grid"):
        evaluate.denoise_experiment(Y, Y, 0.1, [], [], seed=0)
