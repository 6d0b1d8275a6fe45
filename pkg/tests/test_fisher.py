import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajset.errors import BadFile, DegenerateData, DimensionMismatch, EmptyInput, NoFeatures, TooFewSamples, ZeroVector
from trajset.fisher import (
    VARIANCE_FLOOR,
    FisherVector,
    GmmModel,
    encode_fisher,
    fit_gmm,
    fit_pca,
    mean_log_likelihood,
    normalize,
    read_gmm,
    responsibilities,
    subsample,
    write_gmm,
)


def sample_from(gmm, n, rng):
    comp = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    return gmm.means[comp] + rng.standard_normal((n, gmm.dim)) * np.sqrt(gmm.variances[comp])


def assert_valid(gmm):
    assert abs(gmm.weights.sum() - 1.0) < 1e-9
    assert np.all(gmm.weights > 0)
    assert np.all(gmm.variances >= VARIANCE_FLOOR)


# --- subsample -----------------------------------------------------------------

def test_subsample_one_percent():
    x = np.arange(3000.0).reshape(1000, 3)
    s = subsample(x, 0.01, seed=1)
    assert s.shape == (10, 3)
    assert len({tuple(r) for r in s}) == 10


def test_subsample_full_permutes():
    x = np.arange(50.0)[:, None]
    s = subsample(x, 1.0, seed=4)
    assert sorted(s[:, 0]) == list(range(50))
    assert not np.array_equal(s, x)
    assert np.array_equal(s, subsample(x, 1.0, seed=4))


@pytest.mark.parametrize("n,ratio,k", [(100, 0.07, 7), (101, 0.01, 2), (5, 0.01, 1)])
def test_subsample_ceil(n, ratio, k):
    assert len(subsample(np.zeros((n, 2)), ratio)) == k


def test_subsample_errors():
    with pytest.raises(EmptyInput):
        subsample(np.zeros((0, 3)), 0.5)
    with pytest.raises(ValueError):
        subsample(np.zeros((4, 3)), 0.0)


# --- EM ---------------------------------------------------------------------------

def test_single_gaussian_moments(rng):
    x = rng.normal(loc=[2.0, -1.0, 0.5], scale=[1.0, 3.0, 0.2], size=(4000, 3))
    gmm = fit_gmm(x, 1, seed=0)
    se = x.std(axis=0) / math.sqrt(len(x))
    assert np.all(np.abs(gmm.means[0] - x.mean(axis=0)) < 3 * se)
    assert np.all(np.abs(gmm.variances[0] / x.var(axis=0) - 1) < 0.1)
    assert_valid(gmm)


def test_two_clusters_recovered(rng):
    a = rng.normal(-5.0, 1.0, size=(500, 2))
    b = rng.normal(5.0, 1.0, size=(500, 2))
    x = np.vstack([a, b])
    gmm = fit_gmm(x, 2, seed=3)
    gamma = responsibilities(x, gmm)
    nearer = np.argmin(np.abs(gmm.means[:, 0][None, :] - x[:, :1]), axis=1)
    assert np.mean(np.argmax(gamma, axis=1) == nearer) >= 0.99
    assert sorted(np.round(gmm.means[:, 0])) == [-5.0, 5.0]


def test_infinite_tol_stops_after_first_step(rng):
    x = rng.normal(size=(300, 3))
    gmm = fit_gmm(x, 4, seed=0, tol=math.inf)
    assert len(gmm.log_likelihood) == 2
    assert_valid(gmm)


@pytest.mark.parametrize("seed", range(20))
def test_em_monotone(seed):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=4.0, size=(4, 5))
    x = centers[rng.integers(4, size=800)] + rng.normal(size=(800, 5)) * rng.uniform(0.3, 2.0, size=5)
    gmm = fit_gmm(x, 6, seed=seed, max_iters=60, tol=0.0)
    h = np.array(gmm.log_likelihood)
    assert len(h) > 2
    assert np.all(np.diff(h) >= -1e-8 * np.abs(h[:-1]))
    assert_valid(gmm)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_responsibilities_sum_to_one(seed, k):
    rng = np.random.default_rng(seed)
    gmm = GmmModel(rng.dirichlet(np.ones(k)), rng.normal(scale=5, size=(k, 3)), rng.uniform(1e-6, 4, size=(k, 3)))
    x = rng.normal(scale=20, size=(200, 3))
    g = responsibilities(x, gmm)
    assert np.all(np.abs(g.sum(axis=1) - 1.0) < 1e-9)


def test_fit_deterministic(rng):
    x = rng.normal(size=(600, 4))
    a, b = fit_gmm(x, 5, seed=11), fit_gmm(x, 5, seed=11)
    for f in ("weights", "means", "variances"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert a.log_likelihood == b.log_likelihood


def test_fit_errors_and_warning(rng):
    with pytest.raises(DegenerateData):
        fit_gmm(np.ones((100, 2)), 2)
    with pytest.raises(TooFewSamples):
        fit_gmm(rng.normal(size=(3, 2)), 4)
    with pytest.warns(UserWarning):
        fit_gmm(rng.normal(size=(30, 2)), 4)


def test_variance_floor_applied():
    x = np.zeros((200, 2))
    x[:100, 0] = 1.0
    gmm = fit_gmm(x, 2, seed=0)
    assert np.all(gmm.variances >= VARIANCE_FLOOR)
    assert np.isfinite(mean_log_likelihood(x, gmm))


# --- Fisher vectors -------------------------------------------------------------

def test_fv_at_mean():
    gmm = GmmModel(np.ones(1), np.array([[1.0, -2.0, 3.0]]), np.array([[0.5, 2.0, 1.0]]))
    fv = encode_fisher(gmm.means, gmm)
    assert not fv.normalized
    np.testing.assert_array_equal(fv.values[:3], 0.0)
    np.testing.assert_allclose(fv.values[3:], -1 / math.sqrt(2), rtol=1e-15)


def test_fv_length_96000(rng):
    gmm = GmmModel(np.full(64, 1 / 64), rng.normal(size=(64, 750)), np.ones((64, 750)))
    assert len(encode_fisher(rng.normal(size=(5, 750)), gmm)) == 96000


def test_fv_duplicate_invariant(rng):
    gmm = GmmModel(np.array([0.3, 0.7]), rng.normal(size=(2, 4)), rng.uniform(0.5, 2, size=(2, 4)))
    x = rng.normal(size=(9, 4))
    a = encode_fisher(x, gmm).values
    b = encode_fisher(np.repeat(x, 2, axis=0), gmm).values
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-15)


def test_fv_matches_formula(rng):
    # independent per-sample loop over the gradient formulas
    gmm = GmmModel(np.array([0.2, 0.5, 0.3]), rng.normal(size=(3, 2)), rng.uniform(0.5, 2, size=(3, 2)))
    x = rng.normal(size=(6, 2))
    gamma = responsibilities(x, gmm)
    gm = np.zeros((3, 2))
    gv = np.zeros((3, 2))
    for n in range(6):
        for k in range(3):
            z = (x[n] - gmm.means[k]) / np.sqrt(gmm.variances[k])
            gm[k] += gamma[n, k] * z / (6 * math.sqrt(gmm.weights[k]))
            gv[k] += gamma[n, k] * (z**2 - 1) / (6 * math.sqrt(2 * gmm.weights[k]))
    np.testing.assert_allclose(encode_fisher(x, gmm).values, np.concatenate([gm.ravel(), gv.ravel()]), atol=1e-13)


def test_fv_errors(rng):
    gmm = GmmModel(np.ones(1), np.zeros((1, 3)), np.ones((1, 3)))
    with pytest.raises(NoFeatures):
        encode_fisher(np.empty((0, 3)), gmm)
    with pytest.raises(DimensionMismatch):
        encode_fisher(np.zeros((2, 4)), gmm)


def test_normalize_examples():
    np.testing.assert_allclose(normalize(FisherVector(np.array([3.0, 4.0])), alpha=1.0).values, [0.6, 0.8])
    out = normalize(FisherVector(np.array([4.0, 0.0])), alpha=0.5)
    assert out.normalized and np.array_equal(out.values, [1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 500))
def test_normalize_unit_norm(seed, n):
    v = np.random.default_rng(seed).normal(scale=10, size=n)
    assert abs(np.linalg.norm(normalize(FisherVector(v)).values) - 1.0) <= 1e-6


def test_normalize_zero_and_twice():
    with pytest.raises(ZeroVector):
        normalize(FisherVector(np.zeros(6)))
    with pytest.raises(ValueError):
        normalize(FisherVector(np.ones(2), True))


def test_fv_of_own_samples_is_small(rng):
    x = np.vstack([rng.normal(-3, 1, size=(2000, 4)), rng.normal(3, 0.5, size=(2000, 4))])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gmm = fit_gmm(x, 3, seed=0)
    fv = encode_fisher(sample_from(gmm, 50_000, np.random.default_rng(9)), gmm)
    assert np.sqrt(np.mean(fv.values**2)) < 0.05


# --- PCA and files -------------------------------------------------------------------

def test_pca_reproducible_and_orthonormal(rng):
    x = rng.normal(size=(200, 6)) @ rng.normal(size=(6, 6))
    p, q = fit_pca(x, 3), fit_pca(x, 3)
    assert np.array_equal(p.components, q.components)
    np.testing.assert_allclose(p.components @ p.components.T, np.eye(3), atol=1e-12)
    assert p.transform(x).shape == (200, 3)


def test_gmm_file_roundtrip(tmp_path, rng):
    gmm = GmmModel(rng.dirichlet(np.ones(4)), rng.normal(size=(4, 7)), rng.uniform(0.1, 3, size=(4, 7)))
    p = tmp_path / "c.gmm"
    write_gmm(p, gmm)
    back = read_gmm(p)
    for f in ("weights", "means", "variances"):
        assert np.array_equal(getattr(back, f), getattr(gmm, f))
    assert p.stat().st_size == 12 + 8 * (4 + 2 * 28)
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(BadFile):
        read_gmm(p)
