"""Diagonal-covariance Gaussian mixture fitted by EM, used as the fuzzer's freshness model."""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from errors import ParameterError

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-6
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood_history: List[float] = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _log_component_densities(X: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """(n, K) matrix of log N(x_i; mu_k, diag(var_k))."""
    d = X.shape[1]
    log_det = np.sum(np.log(variances), axis=1)
    mahalanobis = np.sum((X[:, None, :] - means[None, :, :]) ** 2 / variances[None, :, :], axis=2)
    return -0.5 * (d * LOG_2PI + log_det[None, :] + mahalanobis)


def gmm_score_samples(model: GmmModel, X: np.ndarray) -> np.ndarray:
    """Per-sample mixture log-likelihood."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dim:
        raise ParameterError(f"Feature dimension {X.shape[1]} does not match model dimension {model.dim}")
    weighted = _log_component_densities(X, model.means, model.variances) + np.log(model.weights)[None, :]
    return logsumexp(weighted, axis=1)


def gmm_loglik(model: GmmModel, x: np.ndarray) -> float:
    """log sum_k w_k N(x; mu_k, Sigma_k), stabilised with log-sum-exp."""
    x = np.asarray(x, dtype=float).ravel()
    return float(gmm_score_samples(model, x[None, :])[0])


def _m_step(X: np.ndarray, resp: np.ndarray, variance_floor: float):
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = (resp.T @ X) / nk[:, None]
    variances = np.empty_like(means)
    for k in range(len(nk)):
        diff = X - means[k]
        variances[k] = (resp[:, k] @ (diff ** 2)) / nk[k]
    return weights, means, np.maximum(variances, variance_floor)


def gmm_fit(X: np.ndarray, n_components: int, iterations: int, rng: np.random.Generator,
            variance_floor: float = VARIANCE_FLOOR) -> GmmModel:
    """
    Fit a diagonal GMM with EM.

    Components are seeded with k-means++ and a hard assignment to the nearest
    seed. The total log-likelihood is recorded before every E-step and once
    more after the last M-step, so the history has ``iterations + 1`` entries
    and is non-decreasing.

    Args:
        X: (n, d) feature vectors
        n_components: K; reduced to n when fewer vectors are given
        iterations: Number of EM iterations
        rng: Generator providing the k-means++ seed

    Raises:
        ParameterError: no data, non-finite data or non-positive K / iterations
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if n == 0:
        raise ParameterError("Cannot fit a mixture to zero feature vectors")
    if not np.all(np.isfinite(X)):
        raise ParameterError("Feature vectors must be finite")
    if n_components <= 0 or iterations <= 0:
        raise ParameterError("n_components and iterations must be positive")
    if n < n_components:
        logger.warning(f"Only {n} feature vectors for {n_components} components; using K={n}")
        n_components = n

    centers, _ = kmeans_plusplus(X, n_clusters=n_components, random_state=int(rng.integers(2 ** 31 - 1)))
    distances = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    resp = np.zeros((n, n_components))
    resp[np.arange(n), np.argmin(distances, axis=1)] = 1.0
    weights, means, variances = _m_step(X, resp, variance_floor)

    history = []
    for _ in range(iterations):
        weighted = _log_component_densities(X, means, variances) + np.log(weights)[None, :]
        log_norm = logsumexp(weighted, axis=1)
        history.append(float(np.sum(log_norm)))
        resp = np.exp(weighted - log_norm[:, None])
        weights, means, variances = _m_step(X, resp, variance_floor)

    model = GmmModel(weights=weights, means=means, variances=variances)
    history.append(float(np.sum(gmm_score_samples(model, X))))
    model.log_likelihood_history = history
    logger.debug(f"Fitted {n_components}-component GMM on {n} vectors, log-likelihood {history[-1]:.3f}")
    return model
