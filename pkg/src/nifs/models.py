"""Speaker-model back-ends: VQ codebooks and diagonal-covariance GMMs.

Both estimators follow the scikit-learn API (``fit``/``score``/
``get_params``) and operate on plain (n_frames, n_dims) arrays, so they
compose with the rest of the ecosystem. Scores are oriented so that higher
means a better match to the model.

The GMM side implements the classic universal-background-model recipe:
train one big mixture on pooled background data, then derive each speaker's
model by means-only maximum-a-posteriori adaptation with a relevance
factor, and score test utterances by the average per-frame log-likelihood
ratio between speaker model and background model.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DegenerateDataError,
    InsufficientDataError,
    InvalidInputError,
)
from .validation import check_features

_LOG_2PI = np.log(2.0 * np.pi)


def _kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seed k centers by D^2 sampling."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum(np.square(X - centers[0]), axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum(np.square(X - centers[j]), axis=1))
    return centers


class VQCodebook(BaseEstimator):
    """Vector-quantization codebook trained with Lloyd's algorithm.

    Initialization is k-means++ (seeded); empty clusters are re-seeded to
    the point currently farthest from its assigned centroid. Training stops
    when the relative distortion improvement falls below ``tol``.

    Parameters
    ----------
    n_clusters : int, default=128
    max_iter : int, default=100
    tol : float, default=1e-6
        Relative distortion-improvement stopping threshold.
    random_state : int, default=0

    Attributes
    ----------
    centroids_ : ndarray of shape (n_clusters, n_dims)
    distortion_ : float
        Mean squared quantization error on the training data.
    distortion_history_ : list of float
        Distortion before each centroid update; non-increasing.
    n_iter_ : int
        Number of centroid updates performed.
    """

    def __init__(self, n_clusters=128, max_iter=100, tol=1e-6, random_state=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_features(X)
        k = int(self.n_clusters)
        if k < 1:
            raise InvalidInputError("n_clusters must be >= 1")
        if X.shape[0] < k:
            raise InsufficientDataError(
                f"{X.shape[0]} frames cannot fill {k} clusters"
            )
        rng = np.random.default_rng(self.random_state)
        centers = _kmeans_plusplus(X, k, rng)
        history = []
        prev = None
        n_updates = 0
        for _ in range(int(self.max_iter)):
            d2 = cdist(X, centers, "sqeuclidean")
            assign = np.argmin(d2, axis=1)
            min_d2 = d2[np.arange(X.shape[0]), assign]
            distortion = float(np.mean(min_d2))
            history.append(distortion)
            if prev is not None and prev - distortion <= self.tol * abs(prev):
                break
            prev = distortion
            counts = np.bincount(assign, minlength=k)
            sums = np.zeros_like(centers)
            np.add.at(sums, assign, X)
            nonempty = counts > 0
            centers[nonempty] = sums[nonempty] / counts[nonempty, None]
            # re-seed empty clusters to the worst-quantized point
            farthest = np.argsort(min_d2)[::-1]
            spill = iter(farthest)
            for j in np.flatnonzero(~nonempty):
                centers[j] = X[next(spill)]
            n_updates += 1
        else:
            # ran out of iterations: sync reported distortion to final centers
            d2 = cdist(X, centers, "sqeuclidean")
            history.append(float(np.mean(np.min(d2, axis=1))))
        self.centroids_ = centers
        self.distortion_history_ = history
        self.distortion_ = history[-1]
        self.n_iter_ = n_updates
        return self

    def _check_input(self, X):
        check_is_fitted(self, "centroids_")
        return check_features(X, dim=self.centroids_.shape[1])

    def predict(self, X):
        """Index of the nearest centroid for each frame."""
        X = self._check_input(X)
        return np.argmin(cdist(X, self.centroids_, "sqeuclidean"), axis=1)

    def transform(self, X):
        """Euclidean distances to every centroid."""
        X = self._check_input(X)
        return cdist(X, self.centroids_, "euclidean")

    def score(self, X, y=None):
        """Negative mean squared distance to the nearest centroid."""
        X = self._check_input(X)
        d2 = cdist(X, self.centroids_, "sqeuclidean")
        return -float(np.mean(np.min(d2, axis=1)))


class DiagGaussianMixture(BaseEstimator):
    """Diagonal-covariance Gaussian mixture trained by EM.

    Initialization comes from a k-means run with ``n_components`` clusters.
    Every M-step floors each dimension's variance at ``var_floor_factor``
    times that dimension's global training variance. Per-iteration total
    log-likelihood is recorded and is non-decreasing.

    Parameters
    ----------
    n_components : int, default=128
    max_iter : int, default=50
    tol : float, default=1e-6
        Relative log-likelihood-improvement stopping threshold.
    var_floor_factor : float, default=0.01
    random_state : int, default=0

    Attributes
    ----------
    weights_ : ndarray of shape (n_components,)
    means_ : ndarray of shape (n_components, n_dims)
    variances_ : ndarray of shape (n_components, n_dims)
    var_floor_ : ndarray of shape (n_dims,)
    log_likelihood_history_ : list of float
        Total training log-likelihood at the start of each EM iteration.
    n_iter_ : int
    """

    def __init__(self, n_components=128, max_iter=50, tol=1e-6,
                 var_floor_factor=0.01, random_state=0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.var_floor_factor = var_floor_factor
        self.random_state = random_state

    # ---- parameter-space helpers -------------------------------------

    def _set_params_direct(self, weights, means, variances, var_floor):
        self.weights_ = weights
        self.means_ = means
        self.variances_ = variances
        self.var_floor_ = var_floor
        return self

    def _log_weighted_prob(self, X):
        """log(w_m * N(x_n | mu_m, var_m)) for every frame/component pair."""
        check_is_fitted(self, "means_")
        X = check_features(X, min_rows=0, dim=self.means_.shape[1])
        inv_var = 1.0 / self.variances_
        # ||x - mu||^2_var expanded into three matmul-friendly terms
        quad = (
            np.square(X) @ inv_var.T
            - 2.0 * (X @ (self.means_ * inv_var).T)
            + np.sum(np.square(self.means_) * inv_var, axis=1)
        )
        log_det = np.sum(np.log(self.variances_), axis=1)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights_)
        return log_w - 0.5 * (self.means_.shape[1] * _LOG_2PI + log_det + quad)

    def log_prob(self, X):
        """Per-frame log density under the mixture (log-sum-exp over components)."""
        return logsumexp(self._log_weighted_prob(X), axis=1)

    def score(self, X, y=None):
        """Mean per-frame log-likelihood."""
        X = check_features(X)
        return float(np.mean(self.log_prob(X)))

    # ---- training -----------------------------------------------------

    def _init_from_kmeans(self, X, var_floor):
        m = int(self.n_components)
        km = VQCodebook(
            n_clusters=m, max_iter=50, random_state=self.random_state
        ).fit(X)
        assign = km.predict(X)
        counts = np.bincount(assign, minlength=m).astype(np.float64)
        means = km.centroids_.copy()
        variances = np.tile(X.var(axis=0), (m, 1))
        for j in range(m):
            members = X[assign == j]
            if members.shape[0] > 0:
                means[j] = members.mean(axis=0)
                variances[j] = members.var(axis=0)
        variances = np.maximum(variances, var_floor)
        weights = np.maximum(counts, 1.0)
        weights /= weights.sum()
        return weights, means, variances

    def fit(self, X, y=None):
        X = check_features(X)
        m = int(self.n_components)
        if m < 1:
            raise InvalidInputError("n_components must be >= 1")
        n = X.shape[0]
        if n < m:
            raise InsufficientDataError(f"{n} frames cannot support {m} components")
        global_var = X.var(axis=0)
        if np.any(global_var <= 0.0):
            dead = np.flatnonzero(global_var <= 0.0)
            raise DegenerateDataError(f"zero-variance dimensions: {dead.tolist()}")
        var_floor = self.var_floor_factor * global_var
        weights, means, variances = self._init_from_kmeans(X, var_floor)
        self._set_params_direct(weights, means, variances, var_floor)

        history = []
        prev = None
        for _ in range(int(self.max_iter)):
            log_wp = self._log_weighted_prob(X)
            ll_frames = logsumexp(log_wp, axis=1)
            total_ll = float(np.sum(ll_frames))
            history.append(total_ll)
            if prev is not None and total_ll - prev <= self.tol * abs(prev):
                break
            prev = total_ll
            resp = np.exp(log_wp - ll_frames[:, None])
            occupancy = resp.sum(axis=0)
            alive = occupancy > 1e-10
            new_means = self.means_.copy()
            new_vars = self.variances_.copy()
            new_means[alive] = (resp.T[alive] @ X) / occupancy[alive, None]
            second = (resp.T[alive] @ np.square(X)) / occupancy[alive, None]
            new_vars[alive] = np.maximum(
                second - np.square(new_means[alive]), var_floor
            )
            new_weights = occupancy / n
            new_weights /= new_weights.sum()
            self._set_params_direct(new_weights, new_means, new_vars, var_floor)
        self.log_likelihood_history_ = history
        self.n_iter_ = len(history)
        return self

    # ---- adaptation ----------------------------------------------------

    def adapt_means(self, X, relevance: float = 16.0) -> "DiagGaussianMixture":
        """Means-only MAP adaptation toward ``X``; weights/variances kept.

        Each component's mean moves toward the data's posterior-weighted
        average by ``alpha_m = n_m / (n_m + relevance)``; components that
        see no data keep the background mean. Adapting on zero frames
        returns an exact copy.
        """
        check_is_fitted(self, "means_")
        if relevance <= 0:
            raise InvalidInputError("relevance must be positive")
        X = check_features(X, min_rows=0, dim=self.means_.shape[1])
        adapted = DiagGaussianMixture(**self.get_params())
        if X.shape[0] == 0:
            return adapted._set_params_direct(
                self.weights_.copy(), self.means_.copy(),
                self.variances_.copy(), self.var_floor_.copy(),
            )
        log_wp = self._log_weighted_prob(X)
        resp = np.exp(log_wp - logsumexp(log_wp, axis=1)[:, None])
        occupancy = resp.sum(axis=0)
        posterior_mean = self.means_.copy()
        alive = occupancy > 0.0
        posterior_mean[alive] = (resp.T[alive] @ X) / occupancy[alive, None]
        alpha = occupancy / (occupancy + relevance)
        means = alpha[:, None] * posterior_mean + (1.0 - alpha[:, None]) * self.means_
        return adapted._set_params_direct(
            self.weights_.copy(), means, self.variances_.copy(), self.var_floor_.copy()
        )


def llr_score(speaker: DiagGaussianMixture, background: DiagGaussianMixture, X) -> float:
    """Average per-frame log-likelihood ratio of speaker over background."""
    check_is_fitted(speaker, "means_")
    check_is_fitted(background, "means_")
    if speaker.means_.shape != background.means_.shape:
        raise InvalidInputError(
            f"speaker/background size mismatch: {speaker.means_.shape} "
            f"vs {background.means_.shape}"
        )
    X = check_features(X, dim=speaker.means_.shape[1])
    return float(np.mean(speaker.log_prob(X) - background.log_prob(X)))


# ---- serialization ------------------------------------------------------


def _encode_matrix(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype("<f8").tobytes(order="C")).decode("ascii"),
    }


def _decode_matrix(obj: dict) -> np.ndarray:
    shape = tuple(int(s) for s in obj["shape"])
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


@dataclass
class SpeakerModel:
    """An enrolled speaker: a VQ codebook or a MAP-adapted mixture."""

    id: str
    kind: str  # "vq" or "gmm_map"
    model: VQCodebook | DiagGaussianMixture
    ubm_ref: str | None = None


def save_model(model, path, *, kind=None, speaker_id=None, ubm_ref=None, extra=None) -> None:
    """Write a model as a JSON envelope with base64-embedded matrices."""
    if isinstance(model, VQCodebook):
        check_is_fitted(model, "centroids_")
        envelope = {
            "kind": kind or "vq",
            "dim": int(model.centroids_.shape[1]),
            "n_clusters": int(model.centroids_.shape[0]),
            "centroids": _encode_matrix(model.centroids_),
            "train_meta": {
                "n_iter": int(model.n_iter_),
                "distortion": float(model.distortion_),
            },
        }
    elif isinstance(model, DiagGaussianMixture):
        check_is_fitted(model, "means_")
        envelope = {
            "kind": kind or "gmm",
            "dim": int(model.means_.shape[1]),
            "n_components": int(model.means_.shape[0]),
            "weights": _encode_matrix(model.weights_),
            "means": _encode_matrix(model.means_),
            "variances": _encode_matrix(model.variances_),
            "var_floor": _encode_matrix(model.var_floor_),
        }
    else:
        raise InvalidInputError(f"cannot serialize model of type {type(model).__name__}")
    if speaker_id is not None:
        envelope["id"] = speaker_id
    if ubm_ref is not None:
        envelope["ubm_ref"] = ubm_ref
    if extra:
        envelope.update(extra)
    Path(path).write_text(json.dumps(envelope, sort_keys=True) + "\n")


def load_model(path):
    """Read a model envelope; returns (estimator, envelope dict)."""
    envelope = json.loads(Path(path).read_text())
    kind = envelope.get("kind")
    if kind == "vq":
        model = VQCodebook(n_clusters=envelope["n_clusters"])
        model.centroids_ = _decode_matrix(envelope["centroids"])
        meta = envelope.get("train_meta", {})
        model.n_iter_ = int(meta.get("n_iter", 0))
        model.distortion_ = float(meta.get("distortion", float("nan")))
        model.distortion_history_ = []
    elif kind in ("gmm", "gmm_map"):
        model = DiagGaussianMixture(n_components=envelope["n_components"])
        model._set_params_direct(
            _decode_matrix(envelope["weights"]),
            _decode_matrix(envelope["means"]),
            _decode_matrix(envelope["variances"]),
            _decode_matrix(envelope["var_floor"]),
        )
    else:
        raise InvalidInputError(f"{path}: unknown model kind '{kind}'")
    return model, envelope
