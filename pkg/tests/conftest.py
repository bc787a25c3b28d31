"""Shared helpers for the test suite."""

import numpy as np
import pytest

import sdreg


def make_normalized_map(q, d, seed):
    """A Gaussian map pushed to normalized form."""
    L, report = sdreg.operator_sinkhorn_normalize(
        sdreg.gen_gaussian_map(q, d, seed))
    assert report.converged
    return L


def planted_rank_one(q, d, n, seed, s_min=1.0, s_max=1.0):
    """A normalized truth map, unit rank-one factors, and exact data."""
    L = make_normalized_map(q, d, seed)
    spec = sdreg.HaarLowRankSpec(q=q, r=1, s_min=s_min, s_max=s_max, n=n,
                                 seed=seed)
    Xs = sdreg.gen_haar_lowrank(spec)
    return L, Xs, sdreg.gen_dataset(L, Xs)


def random_rank(rng, q, r, scale=1.0):
    """A random rank-r q x q matrix with unit Frobenius norm times scale."""
    A = rng.standard_normal((q, r))
    B = rng.standard_normal((q, r))
    X = A @ B.T
    return scale * X / np.linalg.norm(X)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
