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

import numpy as np
import pytest

from riskmdp import ConfigurationError, PreconditionError
from riskmdp.abstraction import ClusterModel, fit_kme, map_state
from riskmdp.discretizer import BinningScheme, enumerate_states
from riskmdp.mdpbuild import (
    RiskLabeling,
    RiskParams,
    build_mdp,
    label_states,
    risk_metric,
)
from riskmdp.policyeval import (
    AccuracyCounts,
    AccuracyReport,
    accuracy,
    evaluate,
    lift_policy,
    load_accuracy_report,
    write_accuracy_report,
)
from riskmdp.solvers import solve

params = RiskParams()


@pytest.fixture(scope="module")
def states(reduced_scheme: BinningScheme) -> np.ndarray:
    return enumerate_states(reduced_scheme)


@pytest.fixture(scope="module")
def labeling(states: np.ndarray, reduced_scheme: BinningScheme) -> RiskLabeling:
    return label_states(states, params, reduced_scheme)


@pytest.fixture(scope="module")
def singleton(states: np.ndarray) -> ClusterModel:
    return ClusterModel(
        "kme", len(states), states.astype(float), np.arange(len(states))
    )


def test_singleton_abstraction_is_fully_accurate(
    states: np.ndarray,
    labeling: RiskLabeling,
    singleton: ClusterModel,
) -> None:
    trajectory = np.random.default_rng(2).integers(0, len(states), size=1500)
    mdp = build_mdp(singleton, trajectory, params, 0.1, labeling=labeling)
    policy = solve("pi", mdp)

    report = evaluate(policy, singleton, labeling, params)

    assert report.original_accuracy == 1.0
    assert report.abstract_accuracy == 1.0
    assert report.original.total == len(states) == 512
    assert report.original.risky_remain == labeling.n_risky


def test_inverted_policy_scores_zero(labeling: RiskLabeling) -> None:
    favourable = np.where(labeling.risky, 0, 1)

    assert accuracy(favourable, labeling).accuracy == 1.0
    assert accuracy(1 - favourable, labeling).accuracy == 0.0
    assert accuracy(1 - favourable, labeling.risky).favourable == 0


def test_counts_partition_the_states(labeling: RiskLabeling) -> None:
    actions = np.random.default_rng(0).integers(0, 2, size=len(labeling))
    counts = accuracy(actions, labeling)

    assert counts.total == len(labeling)
    assert counts.risky_remain + counts.risky_jump == labeling.n_risky
    assert counts.safe_jump + counts.risky_jump == actions.sum()
    assert 0 <= counts.accuracy <= 1


def test_independent_labels_give_identical_counts(
    states: np.ndarray, labeling: RiskLabeling, reduced_scheme: BinningScheme
) -> None:
    risky = np.array(
        [risk_metric(tuple(s), params, reduced_scheme) > 5500 for s in states]
    )
    actions = np.random.default_rng(4).integers(0, 2, size=len(states))

    assert accuracy(actions, risky) == accuracy(actions, labeling)


def test_accuracy_length_mismatch(labeling: RiskLabeling) -> None:
    with pytest.raises(PreconditionError):
        accuracy(np.zeros(3, dtype=np.int64), labeling)


def test_lift_policy(states: np.ndarray, singleton: ClusterModel) -> None:
    actions = np.random.default_rng(1).integers(0, 2, size=len(states))
    assert np.array_equal(lift_policy(actions, singleton), actions)

    one = ClusterModel(
        "kme", 1, np.zeros((1, 7)), np.zeros(len(states), dtype=np.int64)
    )
    assert set(lift_policy(np.array([1]), one).tolist()) == {1}

    model = fit_kme(states, 12, seed=3)
    abstract = np.random.default_rng(5).integers(0, 2, size=12)
    lifted = lift_policy(abstract, model)
    for s in np.random.default_rng(6).integers(0, len(states), size=100):
        assert lifted[s] == abstract[map_state(model, int(s))]

    with pytest.raises(ConfigurationError):
        lift_policy(abstract, one)


def report() -> AccuracyReport:
    return AccuracyReport(
        abstract=AccuracyCounts(
            risky_remain=3, risky_jump=1, safe_remain=0, safe_jump=6
        ),
        original=AccuracyCounts(
            risky_remain=50, risky_jump=10, safe_remain=20, safe_jump=120
        ),
    )


def test_accuracy_report_fields() -> None:
    r = report()

    assert r.abstract_accuracy == 0.9
    assert r.original_accuracy == 0.85
    row = r.to_csv_row()
    assert tuple(row) == AccuracyReport.CSV_HEADER
    assert row["original_states"] == 200
    assert row["abstract_empty"] == 0
    assert r.to_dict()["original"]["accuracy"] == 0.85
    assert AccuracyCounts(0, 0, 0, 0).accuracy == 0.0


def test_empty_clusters_are_reported(
    states: np.ndarray, labeling: RiskLabeling
) -> None:
    # cluster 1 has no members
    model = ClusterModel(
        "kme", 2, np.zeros((2, 7)), np.zeros(len(states), dtype=np.int64)
    )

    result = evaluate(np.array([1, 0]), model, labeling, params)

    assert result.empty_clusters == 1
    assert result.abstract.total == 2
    assert result.original.total == len(states)
    assert result.to_csv_row()["abstract_empty"] == 1


def test_accuracy_report_round_trip(tmp_path: Path) -> None:
    write_accuracy_report(report(), tmp_path / "accuracy.json")

    assert load_accuracy_report(tmp_path / "accuracy.json") == report()
