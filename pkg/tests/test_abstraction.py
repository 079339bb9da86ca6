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

from pathlib import Path
from typing import FrozenSet, Set

import numpy as np
import pytest

from riskmdp import BoundsError, ConfigurationError, NumericError, UnknownComponent
from riskmdp.abstraction import (
    ClusterModel,
    GaussianMixture,
    _whitening,
    clusterer,
    elbow,
    fit,
    fit_gmm,
    fit_kme,
    fit_kmm,
    load_cluster_model,
    map_state,
    nearest_centroid,
    write_cluster_model,
)
from riskmdp.discretizer import BinningScheme, enumerate_states


def blobs(
    centers: list, size: int = 40, spread: float = 0.5, seed: int = 0
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.concatenate(
        [rng.normal(c, spread, size=(size, len(c))) for c in centers]
    )


def partition(labels: np.ndarray) -> Set[FrozenSet[int]]:
    return {frozenset(np.flatnonzero(labels == c).tolist()) for c in np.unique(labels)}


@pytest.fixture(scope="module")
def grid(reduced_scheme: BinningScheme) -> np.ndarray:
    return enumerate_states(reduced_scheme).astype(float)


def test_singleton_clustering_has_zero_mse(grid: np.ndarray) -> None:
    points = grid[:40]
    model = fit_kme(points, 40, seed=1)

    assert model.mse(points) == 0
    assert len(set(model.assignment.tolist())) == 40
    assert model.empty_clusters == []


def test_more_clusters_than_distinct_points() -> None:
    points = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])

    fit_kme(points, 2)
    with pytest.raises(ConfigurationError):
        fit_kme(points, 3)
    with pytest.raises(ConfigurationError):
        fit_kme(points, 0)
    with pytest.raises(ConfigurationError):
        fit_kmm(points, 3)
    with pytest.raises(ConfigurationError):
        fit_gmm(points, 3)
    with pytest.raises(ConfigurationError):
        fit_gmm(points, 0)


def test_kme_splits_separated_groups() -> None:
    points = blobs([(0, 0), (100, 100)])
    model = fit_kme(points, 2, seed=4)

    assert partition(model.assignment) == {
        frozenset(range(40)),
        frozenset(range(40, 80)),
    }
    assert np.array_equal(model.assignment, nearest_centroid(points, model.centroids))


@pytest.mark.parametrize("algorithm", ["kme", "kmm"])
def test_kmeans_objective_never_increases(grid: np.ndarray, algorithm: str) -> None:
    model = fit(algorithm, grid, 20, seed=2)

    assert len(model.history) == model.iterations + 1
    assert np.all(np.diff(model.history) <= 1e-9 * max(model.history))
    assert model.converged


def test_fits_are_reproducible(grid: np.ndarray) -> None:
    first, second = fit_kme(grid, 30, seed=8), fit_kme(grid, 30, seed=8)

    assert np.array_equal(first.assignment, second.assignment)
    assert np.array_equal(first.centroids, second.centroids)


def test_kmm_is_kme_on_whitened_points() -> None:
    points = blobs([(0, 0, 0), (5, 0, 1), (0, 4, 3)], spread=1.0)
    lower, inverse = _whitening(points)
    whitened = np.linalg.solve(lower, points.T).T

    kmm = fit_kmm(points, 3, seed=6)
    kme = fit_kme(whitened, 3, seed=6)

    assert partition(kmm.assignment) == partition(kme.assignment)
    assert np.allclose(inverse @ (lower @ lower.T), np.eye(3))


def test_kmm_ignores_feature_scaling() -> None:
    points = blobs([(0, 0), (6, 1), (2, 8)], spread=0.8, seed=3)
    scaled = points * np.array([10.0, 1.0])

    assert partition(fit_kmm(points, 3, seed=5).assignment) == partition(
        fit_kmm(scaled, 3, seed=5).assignment
    )


def test_kmm_centroids_are_cluster_means() -> None:
    points = blobs([(0, 0), (30, 5)])
    model = fit_kmm(points, 2, seed=0)

    for c in range(2):
        assert np.allclose(model.centroids[c], points[model.members(c)].mean(axis=0))
    assert model.inverse_covariance is not None


def test_kmm_singular_covariance() -> None:
    with pytest.raises(NumericError):
        fit_kmm(np.ones((5, 3)), 1)
    with pytest.raises(NumericError):
        fit_kmm(np.ones((1, 3)), 1)


def test_gmm_single_component_is_the_data_mean(grid: np.ndarray) -> None:
    model = fit_gmm(grid, 1, seed=0)

    assert np.allclose(model.centroids[0], grid.mean(axis=0))
    assert np.allclose(model.covariances[0], grid.var(axis=0))
    assert model.weights.tolist() == [1.0]
    assert np.all(model.assignment == 0)


@pytest.mark.parametrize("covariance_type", ["diag", "full"])
def test_gmm_recovers_blob_means(covariance_type: str) -> None:
    points = blobs([(0, 0), (20, 20)], size=100)
    model = fit_gmm(points, 2, seed=1, covariance_type=covariance_type)

    order = np.argsort(model.centroids[:, 0])
    assert np.allclose(
        model.centroids[order],
        [points[:100].mean(0), points[100:].mean(0)],
        atol=1e-3,
    )
    assert abs(model.weights.sum() - 1) < 1e-9
    assert partition(model.assignment) == {
        frozenset(range(100)),
        frozenset(range(100, 200)),
    }


def test_gmm_log_likelihood_never_decreases() -> None:
    points = blobs([(0, 0), (3, 1), (1, 4)], size=60, spread=1.5, seed=7)
    model = fit_gmm(points, 3, seed=3, tol=-np.inf, max_iter=25)

    assert len(model.history) == 25
    assert np.all(np.diff(model.history) >= -1e-9)
    assert not model.converged


def test_gmm_full_covariances_are_positive_definite(grid: np.ndarray) -> None:
    model = fit_gmm(grid, 4, seed=2, covariance_type="full", max_iter=10)

    for cov in model.covariances:
        assert np.allclose(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() > 0


def test_gmm_rejects_unknown_covariance_type(grid: np.ndarray) -> None:
    with pytest.raises(ConfigurationError):
        fit_gmm(grid, 2, covariance_type="spherical")


def test_elbow_mse_never_increases(grid: np.ndarray) -> None:
    data = elbow(grid, [64, 16, 32, 128], seed=0)

    assert [k for k, _ in data] == [64, 16, 32, 128]
    by_k = dict(data.points)
    assert by_k[16] >= by_k[32] >= by_k[64] >= by_k[128] >= 0
    assert data.to_rows()[0] == {"k": 64, "mse": by_k[64]}


def test_elbow_duplicates_and_full_k(grid: np.ndarray) -> None:
    points = grid[:50]
    (k1, a), (k2, b) = elbow(points, [10, 10], seed=1)

    assert (k1, k2) == (10, 10)
    assert a == b
    assert elbow(points, [50]).points == ((50, 0.0),)
    with pytest.raises(ConfigurationError):
        elbow(points, [10, 51])


def test_map_state(grid: np.ndarray) -> None:
    model = fit_kme(grid, 16, seed=0)

    ids = [map_state(model, i) for i in range(len(grid))]
    assert all(0 <= i < 16 for i in ids)
    for c in range(16):
        if c not in model.empty_clusters:
            centroid = model.centroids[c]
            nearest = nearest_centroid(centroid[None, :], model.centroids)[0]
            assert nearest == c
    with pytest.raises(BoundsError):
        map_state(model, len(grid))
    with pytest.raises(BoundsError):
        map_state(model, -1)
    with pytest.raises(BoundsError):
        model.members(16)


def test_singleton_map_state_is_injective(grid: np.ndarray) -> None:
    points = grid[:25]
    model = fit_kme(points, 25)

    assert len({map_state(model, i) for i in range(25)}) == 25


def test_cluster_model_json_round_trip(tmp_path: Path, grid: np.ndarray) -> None:
    for model in (
        fit_kmm(grid, 8),
        fit_gmm(grid, 3, covariance_type="full", max_iter=5),
    ):
        write_cluster_model(model, tmp_path / "model.json")
        loaded = load_cluster_model(tmp_path / "model.json")

        assert loaded.algorithm == model.algorithm
        assert np.array_equal(loaded.assignment, model.assignment)
        assert np.array_equal(loaded.centroids, model.centroids)
        assert loaded.history == model.history
        for name in ("inverse_covariance", "weights", "covariances"):
            expected = getattr(model, name)
            if expected is None:
                assert getattr(loaded, name) is None
            else:
                assert np.array_equal(getattr(loaded, name), expected)


def test_cluster_model_rejects_foreign_assignment() -> None:
    with pytest.raises(ConfigurationError):
        ClusterModel("kme", 2, np.zeros((2, 3)), np.array([0, 2]))


def test_clusterer_registry(grid: np.ndarray) -> None:
    gmm = clusterer("gmm", covariance_type="full")

    assert isinstance(gmm, GaussianMixture)
    assert gmm.covariance_type == "full"
    assert clusterer({"kmm": {"max_iter": 5}}).max_iter == 5
    assert clusterer(gmm) is gmm
    assert fit("kme", grid, 4, seed=1).algorithm == "kme"
    with pytest.raises(UnknownComponent):
        clusterer("dbscan")
    with pytest.raises(UnknownComponent):
        clusterer("kme", covariance_type="diag")


@pytest.mark.slow
def test_default_state_space_with_a_thousand_clusters() -> None:
    points = enumerate_states().astype(float)
    model = fit_kme(points, 1000, seed=0, max_iter=20)

    assert model.n_states == 51200
    assert model.population.sum() == 51200
    assert model.centroids.shape == (1000, 7)
    assert model.assignment.max() < 1000
