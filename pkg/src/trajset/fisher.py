"""Diagonal-covariance GMM codebook and Fisher-vector encoding."""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadFile,
    DegenerateData,
    DimensionMismatch,
    EmptyInput,
    NoFeatures,
    TooFewSamples,
    ZeroVector,
)

VARIANCE_FLOOR = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)
# Keeps a starved component's weight strictly positive.
_COUNT_EPS = 1e-10


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: tuple = field(default=(), compare=False)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class FisherVector:
    values: np.ndarray
    normalized: bool = False

    def __len__(self):
        return len(self.values)


def subsample(features, ratio, seed=0) -> np.ndarray:
    """Uniform sample of ceil(ratio * N) rows without replacement."""
    x = np.asarray(features, dtype=np.float64)
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must lie in (0, 1]")
    n = len(x)
    if n == 0:
        raise EmptyInput("no features to sample from")
    # tolerate float noise such as 0.07 * 100 = 7.000000000000001
    k = min(n, max(1, math.ceil(round(ratio * n, 9))))
    idx = np.random.default_rng(seed).permutation(n)[:k]
    return x[idx]


# ---------------------------------------------------------------------------
# EM


def _log_gaussians(x, means, variances):
    """(N, K) log N(x_n | mu_k, diag(var_k))."""
    # direct differences: the expanded quadratic loses precision at floored variances
    quad = np.empty((len(x), len(means)))
    for k in range(len(means)):
        quad[:, k] = np.sum((x - means[k]) ** 2 / variances[k], axis=1)
    logdet = np.sum(np.log(variances), axis=1)
    return -0.5 * (quad + logdet + x.shape[1] * _LOG_2PI)


def log_responsibilities(x, gmm: GmmModel):
    """Returns (log gamma (N, K), per-sample log-likelihood (N,))."""
    lj = _log_gaussians(x, gmm.means, gmm.variances) + np.log(gmm.weights)
    top = lj.max(axis=1, keepdims=True)
    ll = top[:, 0] + np.log(np.exp(lj - top).sum(axis=1))
    return lj - ll[:, None], ll


def responsibilities(x, gmm: GmmModel) -> np.ndarray:
    return np.exp(log_responsibilities(np.asarray(x, dtype=np.float64), gmm)[0])


def mean_log_likelihood(x, gmm: GmmModel) -> float:
    return float(log_responsibilities(np.asarray(x, dtype=np.float64), gmm)[1].mean())


def kmeans_pp(x, k, rng) -> np.ndarray:
    """k-means++ seeding; returns k rows of ``x``."""
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            i = rng.integers(n)
        else:
            i = int(np.searchsorted(np.cumsum(d2), rng.uniform(0.0, total)))
            i = min(i, n - 1)
        centers.append(x[i])
        d2 = np.minimum(d2, np.sum((x - x[i]) ** 2, axis=1))
    return np.array(centers)


def _m_step(x, gamma, variance_floor):
    nk = gamma.sum(axis=0) + _COUNT_EPS
    weights = nk / nk.sum()
    means = (gamma.T @ x) / nk[:, None]
    variances = np.empty_like(means)
    for k in range(len(nk)):
        variances[k] = gamma[:, k] @ (x - means[k]) ** 2 / nk[k]
    return weights, means, np.maximum(variances, variance_floor)


def fit_gmm(samples, n_components=64, seed=0, max_iters=100, tol=1e-6, variance_floor=VARIANCE_FLOOR):
    """Fit a diagonal GMM: k-means++ hard-assignment start, then EM.

    Stops when the mean log-likelihood gains less than ``tol`` or after
    ``max_iters`` EM iterations. The per-iteration mean log-likelihood history
    (starting with the initial model) is kept on the returned model.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise EmptyInput("samples must be a non-empty 2-D matrix")
    n = len(x)
    if n < n_components:
        raise TooFewSamples(f"{n} samples cannot support {n_components} components")
    if np.all(x == x[0]):
        raise DegenerateData("all samples are identical")
    if n < 10 * n_components:
        warnings.warn(f"only {n} samples for {n_components} components (< 10 per component)", stacklevel=2)
    rng = np.random.default_rng(seed)
    centers = kmeans_pp(x, n_components, rng)
    d2 = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    hard = np.zeros((n, n_components))
    hard[np.arange(n), np.argmin(d2, axis=1)] = 1.0
    weights, means, variances = _m_step(x, hard, variance_floor)
    empty = hard.sum(axis=0) == 0
    if np.any(empty):
        means[empty] = centers[empty]
        variances[empty] = np.maximum(x.var(axis=0), variance_floor)
    gmm = GmmModel(weights, means, variances)
    log_gamma, ll = log_responsibilities(x, gmm)
    history = [float(ll.mean())]
    for _ in range(max_iters):
        weights, means, variances = _m_step(x, np.exp(log_gamma), variance_floor)
        gmm = GmmModel(weights, means, variances)
        log_gamma, ll = log_responsibilities(x, gmm)
        history.append(float(ll.mean()))
        if history[-1] - history[-2] < tol:
            break
    return GmmModel(weights, means, variances, tuple(history))


# ---------------------------------------------------------------------------
# Fisher vectors


def encode_fisher(features, gmm: GmmModel) -> FisherVector:
    """Mean- and variance-gradient Fisher vector, length 2 * dim * n_components.

    Layout: all mean gradients (component-major), then all variance gradients.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise NoFeatures("a video needs at least one feature to encode")
    if x.shape[1] != gmm.dim:
        raise DimensionMismatch(f"feature dim {x.shape[1]} != codebook dim {gmm.dim}")
    n = len(x)
    gamma = np.exp(log_responsibilities(x, gmm)[0])
    sigma = np.sqrt(gmm.variances)
    g_mu = np.empty_like(gmm.means)
    g_var = np.empty_like(gmm.means)
    for k in range(gmm.n_components):
        z = (x - gmm.means[k]) / sigma[k]
        g_mu[k] = gamma[:, k] @ z
        g_var[k] = gamma[:, k] @ (z * z - 1.0)
    w = gmm.weights[:, None]
    g_mu /= n * np.sqrt(w)
    g_var /= n * np.sqrt(2.0 * w)
    return FisherVector(np.concatenate([g_mu.ravel(), g_var.ravel()]), False)


def normalize(fv: FisherVector, alpha=0.5) -> FisherVector:
    """Signed power normalisation followed by L2 normalisation."""
    if fv.normalized:
        raise ValueError("Fisher vector is already normalized")
    z = np.sign(fv.values) * np.abs(fv.values) ** alpha
    norm = np.linalg.norm(z)
    if norm == 0.0 or not np.isfinite(norm):
        raise ZeroVector("cannot L2-normalize an all-zero Fisher vector")
    return FisherVector(z / norm, True)


# ---------------------------------------------------------------------------
# optional PCA stage


@dataclass(frozen=True)
class Pca:
    mean: np.ndarray
    components: np.ndarray  # (n_out, dim)

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components.T


def fit_pca(samples, n_out) -> Pca:
    x = np.asarray(samples, dtype=np.float64)
    if not 1 <= n_out <= min(x.shape):
        raise ValueError(f"pca dim must lie in [1, {min(x.shape)}]")
    mean = x.mean(axis=0)
    _, _, vt = np.linalg.svd(x - mean, full_matrices=False)
    # fix the sign of each axis so fits are reproducible
    signs = np.sign(vt[np.arange(len(vt)), np.argmax(np.abs(vt), axis=1)])
    return Pca(mean, vt[:n_out] * signs[:n_out, None])


# ---------------------------------------------------------------------------
# GMM1 files

_GMM_MAGIC = b"GMM1"


def write_gmm(path, gmm: GmmModel):
    """magic, u32 n_components, u32 dim, then weights, means, variances as f64 LE."""
    with open(path, "wb") as fh:
        fh.write(_GMM_MAGIC + struct.pack("<II", gmm.n_components, gmm.dim))
        for arr in (gmm.weights, gmm.means, gmm.variances):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_gmm(path) -> GmmModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _GMM_MAGIC or len(raw) < 12:
        raise BadFile(f"{path}: not a GMM1 file")
    k, d = struct.unpack_from("<II", raw, 4)
    if len(raw) != 12 + 8 * (k + 2 * k * d):
        raise BadFile(f"{path}: GMM1 payload size does not match header")
    data = np.frombuffer(raw, dtype="<f8", offset=12).astype(np.float64)
    return GmmModel(data[:k].copy(), data[k : k + k * d].reshape(k, d), data[k + k * d :].reshape(k, d))
