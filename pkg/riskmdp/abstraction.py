#  Licensed to the riskmdp authors under one or more contributor
#  license agreements. The riskmdp authors license this file to you
#  under the Apache License, Version 2.0 (the "License"); you may
#  not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
# 	http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing,
#  software distributed under the License is distributed on an
#  "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
#  KIND, either express or implied.  See the License for the
#  specific language governing permissions and limitations
#  under the License.

"""
Clustering based state abstraction: maps every original state to one of K
abstract states with k-means (Euclidean or Mahalanobis distance) or a
Gaussian mixture model.
"""

import collections.abc
import dataclasses
import logging
from typing import (
    Any,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import scipy.linalg
from scipy.special import logsumexp
from typing_extensions import Literal

from .exceptions import BoundsError, ConfigurationError, NumericError
from .serializer import PathType, serializer
from .utils import Component

logger = logging.getLogger(__name__)

Algorithm = Literal["kme", "kmm", "gmm"]

DEFAULT_MAX_ITER = 300
GMM_MAX_ITER = 100
GMM_TOLERANCE = 1e-6
VARIANCE_FLOOR = 1e-6
RIDGE = 1e-6
CHUNK_SIZE = 4096


@dataclasses.dataclass(frozen=True, eq=False)
class ClusterModel:
    """
    Result of an abstraction fit. ``assignment[i]`` is the abstract state of
    original state ``i``; clusters that ended up empty keep their id.

    ``history`` holds the objective after every iteration: total within
    cluster squared distance (in the metric of the algorithm) for k-means,
    mean per-point log-likelihood for the mixture model.
    """

    algorithm: str
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    inverse_covariance: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    covariances: Optional[np.ndarray] = None
    covariance_type: Optional[str] = None
    history: Tuple[float, ...] = ()
    iterations: int = 0
    converged: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.centroids.shape[0] != self.k:
            raise ConfigurationError(
                f"{self.k} clusters but {self.centroids.shape[0]} centroids."
            )
        if self.assignment.size and (
            self.assignment.min() < 0 or self.assignment.max() >= self.k
        ):
            raise ConfigurationError("Assignment refers to unknown clusters.")

    @property
    def n_states(self) -> int:
        return int(self.assignment.shape[0])

    @property
    def population(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    @property
    def empty_clusters(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.population == 0)]

    def members(self, abstract_id: int) -> np.ndarray:
        if not 0 <= abstract_id < self.k:
            raise BoundsError(f"Abstract state {abstract_id} outside of [0, {self.k}).")
        return np.flatnonzero(self.assignment == abstract_id)

    def mse(self, points: np.ndarray) -> float:
        """Mean squared Euclidean distance of every point to its centroid."""
        diff = np.asarray(points, dtype=float) - self.centroids[self.assignment]
        return float(np.mean(np.sum(diff * diff, axis=1)))

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {
            "algorithm": self.algorithm,
            "k": self.k,
            "centroids": self.centroids,
            "assignment": self.assignment,
            "history": list(self.history),
            "iterations": self.iterations,
            "converged": self.converged,
            "seed": self.seed,
        }
        if self.inverse_covariance is not None:
            d["inverse_covariance"] = self.inverse_covariance
        if self.weights is not None:
            d["weights"] = self.weights
            d["covariances"] = self.covariances
            d["covariance_type"] = self.covariance_type
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ClusterModel":
        def _array(key: str) -> Optional[np.ndarray]:
            return None if d.get(key) is None else np.asarray(d[key], dtype=float)

        k = int(d["k"])
        centroids = np.asarray(d["centroids"], dtype=float).reshape(k, -1)
        return cls(
            algorithm=d["algorithm"],
            k=k,
            centroids=centroids,
            assignment=np.asarray(d["assignment"], dtype=np.int64),
            inverse_covariance=_array("inverse_covariance"),
            weights=_array("weights"),
            covariances=_array("covariances"),
            covariance_type=d.get("covariance_type"),
            history=tuple(d.get("history", ())),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d.get("converged", True)),
            seed=int(d.get("seed", 0)),
        )


@dataclasses.dataclass(frozen=True)
class ElbowData:
    points: Tuple[Tuple[int, float], ...]

    def __iter__(self) -> Iterator[Tuple[int, float]]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def to_rows(self) -> List[Dict[str, Any]]:
        return [{"k": k, "mse": mse} for k, mse in self.points]


def _as_points(points: Any) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigurationError("Expected a non-empty (n_points, n_features) array.")
    return x


def check_cluster_count(x: np.ndarray, k: int) -> None:
    """Raise :class:`ConfigurationError` unless ``1 <= k <=`` distinct points."""
    if k < 1:
        raise ConfigurationError(f"Cluster count must be >= 1, got {k}.")
    distinct = np.unique(x, axis=0).shape[0]
    if k > distinct:
        raise ConfigurationError(
            f"Cannot form {k} clusters from {distinct} distinct points."
        )


def _chunks(n: int, size: int = CHUNK_SIZE) -> Iterator[slice]:
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def _sq_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ centroids.T)
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def nearest_centroid(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid per point, lowest id on ties."""
    labels = np.empty(x.shape[0], dtype=np.int64)
    for s in _chunks(x.shape[0]):
        labels[s] = np.argmin(_sq_distances(x[s], centroids), axis=1)
    return labels


def _objective(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    diff = x - centroids[labels]
    return float(np.sum(diff * diff))


def kmeans_plusplus(
    x: np.ndarray,
    k: int,
    rng: np.random.Generator,
    init: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    k-means++ seeding. When ``init`` is given its rows are kept as the first
    centres and only the remaining ``k - len(init)`` are drawn.
    """
    centers: List[np.ndarray] = [] if init is None else list(np.asarray(init, float))
    if len(centers) > k:
        raise ConfigurationError(f"{len(centers)} initial centroids for k={k}.")
    if not centers:
        centers.append(x[rng.integers(x.shape[0])])
        d2 = np.sum((x - centers[0]) ** 2, axis=1)
    else:
        d2 = np.full(x.shape[0], np.inf)
        for s in _chunks(x.shape[0]):
            d2[s] = _sq_distances(x[s], np.asarray(centers)).min(axis=1)

    while len(centers) < k:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(x.shape[0], p=d2 / total))
        else:
            idx = int(rng.integers(x.shape[0]))
        center = x[idx]
        centers.append(center)
        d2 = np.minimum(d2, np.sum((x - center) ** 2, axis=1))
    return np.array(centers, dtype=float)


def _lloyd(
    x: np.ndarray, centroids: np.ndarray, max_iter: int
) -> Tuple[np.ndarray, np.ndarray, List[float], int, bool]:
    k = centroids.shape[0]
    labels = nearest_centroid(x, centroids)
    history = [_objective(x, centroids, labels)]
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=k)
        sums = np.stack(
            [
                np.bincount(labels, weights=x[:, d], minlength=k)
                for d in range(x.shape[1])
            ],
            axis=1,
        )
        occupied = counts > 0
        # empty clusters keep their previous centroid
        centroids = centroids.copy()
        centroids[occupied] = sums[occupied] / counts[occupied, None]

        new_labels = nearest_centroid(x, centroids)
        history.append(_objective(x, centroids, new_labels))
        logger.debug("lloyd iteration %d objective %.6f", iteration, history[-1])
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels

    if not converged:
        logger.warning(
            "k-means stopped after %d iterations without converging", max_iter
        )
    return centroids, labels, history, iteration, converged


def fit_kme(
    points: Any,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    init: Optional[np.ndarray] = None,
) -> ClusterModel:
    """k-means with squared Euclidean distance, k-means++ seeding."""
    x = _as_points(points)
    check_cluster_count(x, k)
    rng = np.random.default_rng(seed)
    start = kmeans_plusplus(x, k, rng, init=init)
    centroids, labels, history, iterations, converged = _lloyd(x, start, max_iter)
    model = ClusterModel(
        algorithm="kme",
        k=k,
        centroids=centroids,
        assignment=labels,
        history=tuple(history),
        iterations=iterations,
        converged=converged,
        seed=seed,
    )
    _log_fit(model)
    return model


def _whitening(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cholesky factor ``L`` of the ridge-regularised covariance and its inverse."""
    if x.shape[0] < 2:
        raise NumericError("At least two points are needed to estimate a covariance.")
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    eps = RIDGE * float(np.mean(np.diag(cov)))
    cov = cov + eps * np.eye(cov.shape[0])
    try:
        lower = scipy.linalg.cholesky(cov, lower=True)
    except scipy.linalg.LinAlgError as e:
        raise NumericError(f"Covariance is singular after regularisation: {e}") from e
    return lower, scipy.linalg.cho_solve((lower, True), np.eye(cov.shape[0]))


def fit_kmm(
    points: Any,
    k: int,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ClusterModel:
    """
    k-means with the Mahalanobis distance of the sample covariance of all
    points. Runs Lloyd's algorithm on whitened coordinates, where squared
    Euclidean distance equals the Mahalanobis distance.
    """
    x = _as_points(points)
    check_cluster_count(x, k)
    lower, inverse = _whitening(x)
    y = scipy.linalg.solve_triangular(lower, x.T, lower=True).T
    rng = np.random.default_rng(seed)
    start = kmeans_plusplus(y, k, rng)
    centroids, labels, history, iterations, converged = _lloyd(y, start, max_iter)
    model = ClusterModel(
        algorithm="kmm",
        k=k,
        centroids=centroids @ lower.T,
        assignment=labels,
        inverse_covariance=inverse,
        history=tuple(history),
        iterations=iterations,
        converged=converged,
        seed=seed,
    )
    _log_fit(model)
    return model


class _Mixture:
    def __init__(
        self,
        means: np.ndarray,
        covariances: np.ndarray,
        weights: np.ndarray,
        covariance_type: str,
    ):
        self.means = means
        self.covariances = covariances
        self.weights = weights
        self.covariance_type = covariance_type

    def log_prob(self, x: np.ndarray) -> np.ndarray:
        """Weighted log density ``log w_k + log N(x | mu_k, Sigma_k)``."""
        n, dim = x.shape
        const = dim * np.log(2 * np.pi)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        if self.covariance_type == "diag":
            precision = 1.0 / self.covariances
            maha = (
                (x * x) @ precision.T
                - 2.0 * x @ (self.means * precision).T
                + np.sum(self.means**2 * precision, axis=1)[None, :]
            )
            log_det = np.sum(np.log(self.covariances), axis=1)
            return log_w - 0.5 * (const + log_det[None, :] + np.maximum(maha, 0.0))

        out = np.empty((n, self.means.shape[0]))
        for j, (mu, cov) in enumerate(zip(self.means, self.covariances)):
            lower = scipy.linalg.cholesky(cov, lower=True)
            sol = scipy.linalg.solve_triangular(lower, (x - mu).T, lower=True)
            log_det = 2.0 * np.sum(np.log(np.diag(lower)))
            out[:, j] = log_w[j] - 0.5 * (const + log_det + np.sum(sol * sol, axis=0))
        return out


def _floor_covariance(cov: np.ndarray, floor: float) -> np.ndarray:
    # nearest matrix with all eigenvalues >= floor
    values, vectors = np.linalg.eigh((cov + cov.T) / 2)
    return (vectors * np.maximum(values, floor)) @ vectors.T


def fit_gmm(
    points: Any,
    k: int,
    seed: int = 0,
    covariance_type: str = "diag",
    max_iter: int = GMM_MAX_ITER,
    tol: float = GMM_TOLERANCE,
    reg_covar: float = VARIANCE_FLOOR,
) -> ClusterModel:
    """
    Gaussian mixture fitted by expectation maximisation from k-means++ means.
    Stops once the mean per-point log-likelihood improves by less than
    ``tol``. Components that lose all responsibility are re-seeded on a random
    point.
    """
    if covariance_type not in ("diag", "full"):
        raise ConfigurationError(
            f"covariance_type must be 'diag' or 'full', got {covariance_type!r}."
        )
    x = _as_points(points)
    check_cluster_count(x, k)
    n, dim = x.shape
    rng = np.random.default_rng(seed)

    global_var = np.maximum(x.var(axis=0), reg_covar)
    global_cov = _floor_covariance(
        np.atleast_2d(np.cov(x, rowvar=False, bias=True)), reg_covar
    )
    means = kmeans_plusplus(x, k, rng)
    if covariance_type == "diag":
        covariances = np.tile(global_var, (k, 1))
    else:
        covariances = np.tile(global_cov, (k, 1, 1))
    mixture = _Mixture(means, covariances, np.full(k, 1.0 / k), covariance_type)

    history: List[float] = []
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        # E-step, accumulated chunk by chunk
        mass = np.zeros(k)
        first = np.zeros((k, dim))
        second = (
            np.zeros((k, dim)) if covariance_type == "diag" else np.zeros((k, dim, dim))
        )
        total_ll = 0.0
        for s in _chunks(n):
            xs = x[s]
            log_prob = mixture.log_prob(xs)
            norm = logsumexp(log_prob, axis=1)
            total_ll += float(norm.sum())
            resp = np.exp(log_prob - norm[:, None])
            mass += resp.sum(axis=0)
            first += resp.T @ xs
            if covariance_type == "diag":
                second += resp.T @ (xs * xs)
            else:
                second += np.einsum("nk,ni,nj->kij", resp, xs, xs)
        history.append(total_ll / n)
        logger.debug("EM iteration %d log-likelihood %.9f", iteration, history[-1])
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break

        # M-step
        degenerate = mass <= 10 * np.finfo(float).tiny
        safe = np.where(degenerate, 1.0, mass)
        means = first / safe[:, None]
        if covariance_type == "diag":
            covariances = np.maximum(second / safe[:, None] - means**2, reg_covar)
        else:
            raw = second / safe[:, None, None] - np.einsum("ki,kj->kij", means, means)
            covariances = np.stack([_floor_covariance(c, reg_covar) for c in raw])
        weights = mass / n
        for j in np.flatnonzero(degenerate):
            logger.warning(
                "mixture component %d lost all responsibility, re-seeding it", j
            )
            means[j] = x[rng.integers(n)]
            covariances[j] = global_var if covariance_type == "diag" else global_cov
            weights[j] = 1.0 / n
        mixture = _Mixture(means, covariances, weights / weights.sum(), covariance_type)

    if not converged:
        logger.warning("EM stopped after %d iterations without converging", max_iter)

    labels = np.empty(n, dtype=np.int64)
    for s in _chunks(n):
        labels[s] = np.argmax(mixture.log_prob(x[s]), axis=1)

    model = ClusterModel(
        algorithm="gmm",
        k=k,
        centroids=mixture.means,
        assignment=labels,
        weights=mixture.weights,
        covariances=mixture.covariances,
        covariance_type=covariance_type,
        history=tuple(history),
        iterations=iteration,
        converged=converged,
        seed=seed,
    )
    _log_fit(model)
    return model


def _log_fit(model: ClusterModel) -> None:
    empty = model.empty_clusters
    logger.info(
        "%s: %d clusters over %d states in %d iterations (converged=%s)",
        model.algorithm,
        model.k,
        model.n_states,
        model.iterations,
        model.converged,
    )
    if empty:
        logger.warning("%s: %d empty clusters kept", model.algorithm, len(empty))


def elbow(
    points: Any,
    k_list: Sequence[int],
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ElbowData:
    """
    Mean squared error of k-means for every K in ``k_list``.

    The distinct K values are fitted in ascending order and every fit starts
    from the previous fit's centroids plus k-means++ additions, so the MSE
    never increases with K. Results are returned in the order of ``k_list``.
    """
    x = _as_points(points)
    for k in k_list:
        check_cluster_count(x, k)
    results: Dict[int, float] = {}
    previous: Optional[np.ndarray] = None
    for k in sorted(set(k_list)):
        model = fit_kme(x, k, seed=seed, max_iter=max_iter, init=previous)
        results[k] = model.mse(x)
        previous = model.centroids
        logger.info("elbow: k=%d mse=%.6f", k, results[k])
    return ElbowData(tuple((k, results[k]) for k in k_list))


def map_state(model: ClusterModel, state_index: int) -> int:
    if not 0 <= state_index < model.n_states:
        raise BoundsError(
            f"State index {state_index} outside of [0, {model.n_states})."
        )
    return int(model.assignment[state_index])


def clusterer(
    name_or_clusterer: Union[str, "Clusterer", Mapping[str, Any]], **params: Any
) -> "Clusterer":
    # {"kmm": {"max_iter": 100}}
    if isinstance(name_or_clusterer, collections.abc.Mapping):
        if params or len(name_or_clusterer) != 1:
            raise ValueError("clusterer() expects a dict with exactly one algorithm.")
        name, params = next(iter(name_or_clusterer.items()))
        return Clusterer.get_component_class(name)(**params)

    # KMeansEuclidean()
    if isinstance(name_or_clusterer, Clusterer):
        if params:
            raise ValueError(
                "clusterer() cannot accept parameters when passing in a Clusterer."
            )
        return name_or_clusterer

    # "gmm", covariance_type="full"
    return Clusterer.get_component_class(name_or_clusterer)(**params)


class Clusterer(Component):
    _type_name = "clusterer"
    _type_shortcut = staticmethod(clusterer)

    def fit(self, points: Any, k: int, seed: int = 0) -> ClusterModel:
        raise NotImplementedError()


class KMeansEuclidean(Clusterer):
    name = "kme"
    _defaults = {"max_iter": DEFAULT_MAX_ITER}

    def fit(self, points: Any, k: int, seed: int = 0) -> ClusterModel:
        return fit_kme(points, k, seed=seed, **self._params)


class KMeansMahalanobis(Clusterer):
    name = "kmm"
    _defaults = {"max_iter": DEFAULT_MAX_ITER}

    def fit(self, points: Any, k: int, seed: int = 0) -> ClusterModel:
        return fit_kmm(points, k, seed=seed, **self._params)


class GaussianMixture(Clusterer):
    name = "gmm"
    _defaults = {
        "covariance_type": "diag",
        "max_iter": GMM_MAX_ITER,
        "tol": GMM_TOLERANCE,
        "reg_covar": VARIANCE_FLOOR,
    }

    def fit(self, points: Any, k: int, seed: int = 0) -> ClusterModel:
        return fit_gmm(points, k, seed=seed, **self._params)


def fit(
    algorithm: Union[str, Clusterer], points: Any, k: int, seed: int = 0, **params: Any
) -> ClusterModel:
    return clusterer(algorithm, **params).fit(points, k, seed=seed)


def write_cluster_model(model: ClusterModel, path: PathType) -> None:
    serializer.dump(model, path)


def load_cluster_model(path: PathType) -> ClusterModel:
    return ClusterModel.from_dict(serializer.load(path))
