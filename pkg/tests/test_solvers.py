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

import itertools
from pathlib import Path

import numpy as np
import pytest

from riskmdp import ConfigurationError, PreconditionError, UnknownComponent
from riskmdp.abstraction import ClusterModel
from riskmdp.discretizer import BinningScheme, enumerate_states
from riskmdp.mdpbuild import MdpModel, RiskParams, build_mdp
from riskmdp.solvers import (
    RVI_STALL_WINDOW,
    SOLVER_NAMES,
    GaussSeidelValueIteration,
    Policy,
    bellman_residual,
    evaluate_policy,
    gauss_seidel_vi,
    greedy,
    load_policy,
    modified_policy_iteration,
    policy_iteration,
    policy_value_gap,
    relative_value_iteration,
    solve,
    solve_all,
    solver,
    value_iteration,
    write_policy,
)

from .conftest import make_mdp, random_mdp

DISCOUNTED = ("vi", "pi", "mpi", "gs-vi")


def best_values(mdp: MdpModel) -> np.ndarray:
    values = [
        evaluate_policy(mdp, actions)
        for actions in itertools.product((0, 1), repeat=mdp.k)
    ]
    return np.max(values, axis=0)


def single_state(r0: float, r1: float, gamma: float = 0.1) -> MdpModel:
    return make_mdp([[r0, r1]], [[[1.0]], [[1.0]]], gamma=gamma)


@pytest.mark.parametrize("seed", range(200))
def test_discounted_solvers_match_brute_force(seed: int) -> None:
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 7))
    mdp = random_mdp(rng, k, gamma=(0.1, 0.5, 0.9)[seed % 3], sparse=seed % 2 == 1)
    optimum = best_values(mdp)

    for name in DISCOUNTED:
        policy = solve(name, mdp)
        exact = evaluate_policy(mdp, policy.actions)
        assert np.allclose(exact, optimum, rtol=0, atol=1e-9)
        assert bellman_residual(mdp, policy) <= policy.tolerance
        assert policy.converged


def test_single_state_value() -> None:
    mdp = single_state(1, -1)

    for name in DISCOUNTED:
        policy = solve(name, mdp)
        assert policy.actions.tolist() == [0]
        assert policy.values[0] == pytest.approx(1 / 0.9, abs=1e-7)


def test_ties_go_to_remain() -> None:
    mdp = single_state(1, 1)

    for name in SOLVER_NAMES:
        assert solve(name, mdp).actions.tolist() == [0]
    assert greedy(np.array([[0.0, 0.0], [0.0, 1e-12]])).tolist() == [0, 1]


def test_two_state_hand_model() -> None:
    mdp = make_mdp(
        [[0, 0], [2, 0]],
        [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]],
        gamma=0.5,
    )

    policy = policy_iteration(mdp)

    assert policy.actions.tolist() == [1, 0]
    assert policy.values.tolist() == pytest.approx([2.0, 4.0])
    assert policy.iterations <= 2**2


@pytest.mark.parametrize("seed", range(20))
def test_policy_iteration_stays_within_policy_count(seed: int) -> None:
    rng = np.random.default_rng(1000 + seed)
    mdp = random_mdp(rng, 5, gamma=0.9)

    assert policy_iteration(mdp).iterations <= 2**5


@pytest.mark.parametrize("seed", range(20))
def test_mpi_with_many_sweeps_matches_pi(seed: int) -> None:
    mdp = random_mdp(np.random.default_rng(seed), 8, gamma=0.7)

    assert modified_policy_iteration(mdp, m=200).agrees(policy_iteration(mdp))


def test_gauss_seidel_uses_updated_values() -> None:
    k = 10
    transitions = np.zeros((2, k, k))
    transitions[:, 0, 0] = 1.0
    transitions[:, np.arange(1, k), np.arange(k - 1)] = 1.0
    reward = np.ones((k, 2))
    reward[0] = 0
    mdp = make_mdp(reward, transitions, gamma=0.5)

    vi, gs = value_iteration(mdp), gauss_seidel_vi(mdp)

    assert gs.iterations == 2
    assert vi.iterations == k
    assert np.array_equal(gs.values, vi.values)
    assert gs.agrees(vi)


def test_relative_value_iteration_single_state() -> None:
    assert relative_value_iteration(single_state(1, -1)).actions.tolist() == [0]
    policy = relative_value_iteration(single_state(-1, 1))

    assert policy.actions.tolist() == [1]
    assert policy.gain == pytest.approx(1.0)
    assert policy.gamma is None


def test_relative_value_iteration_on_a_periodic_chain() -> None:
    swap = [[0.0, 1.0], [1.0, 0.0]]
    mdp = make_mdp([[1, 0], [0, 0]], [swap, swap])

    policy = relative_value_iteration(mdp)

    assert policy.converged
    assert policy.values[0] == 0
    assert np.all(np.abs(policy.values) < 10)
    assert policy.gain == pytest.approx(0.5, abs=1e-6)
    assert bellman_residual(mdp, policy) <= policy.tolerance


def test_relative_value_iteration_reports_missed_span() -> None:
    # two absorbing states with different gains never meet the span criterion
    stay = [[1.0, 0.0], [0.0, 1.0]]
    mdp = make_mdp([[1, 1], [0, 0]], [stay, stay])

    policy = relative_value_iteration(mdp, max_iter=50)

    assert not policy.converged
    assert policy.tolerance == pytest.approx(1.0)
    assert policy.iterations == 50


def test_relative_value_iteration_stops_once_the_span_stalls() -> None:
    stay = [[1.0, 0.0], [0.0, 1.0]]
    mdp = make_mdp([[1, 1], [0, 0]], [stay, stay])

    policy = relative_value_iteration(mdp)

    assert not policy.converged
    assert policy.iterations == RVI_STALL_WINDOW + 1
    assert relative_value_iteration(mdp, stall_window=5).iterations == 6


def test_relative_value_iteration_arguments() -> None:
    mdp = single_state(1, 0)
    with pytest.raises(ConfigurationError):
        relative_value_iteration(mdp, tau=1)
    with pytest.raises(ConfigurationError):
        relative_value_iteration(mdp, reference=1)
    with pytest.raises(ConfigurationError):
        relative_value_iteration(mdp, stall_window=0)


@pytest.fixture(scope="module")
def risk_mdp(reduced_scheme: BinningScheme) -> MdpModel:
    # one abstract state per original state
    points = enumerate_states(reduced_scheme)
    model = ClusterModel(
        "kme", len(points), points.astype(float), np.arange(len(points))
    )
    trajectory = np.random.default_rng(0).integers(0, len(points), size=2000)
    return build_mdp(model, trajectory, RiskParams(), 0.1, scheme=reduced_scheme)


def test_small_discount_acts_on_immediate_reward(risk_mdp: MdpModel) -> None:
    reward = risk_mdp.reward
    bound = 0.1 * (reward.max() - reward.min()) / (1 - 0.1)
    assert np.all(np.abs(reward[:, 0] - reward[:, 1]) > bound)

    for name in DISCOUNTED:
        policy = solve(name, risk_mdp)
        assert policy.actions.tolist() == greedy(reward).tolist()
        assert np.array_equal(policy.actions == 0, risk_mdp.risky)


def test_solve_all(risk_mdp: MdpModel) -> None:
    report = solve_all(risk_mdp)

    assert report.names == list(SOLVER_NAMES)
    assert all(seconds > 0 for seconds in report.timings.values())
    agreement = report.agreement()
    discounted = [report.names.index(n) for n in DISCOUNTED]
    assert agreement.shape == (5, 5)
    assert agreement[np.ix_(discounted, discounted)].all()
    assert policy_value_gap(risk_mdp, [report.policies[n] for n in DISCOUNTED]) < 1e-6
    rows = report.to_rows()
    assert all(r["agrees_with_mpi"] for r in rows if r["solver"] in DISCOUNTED)

    again = solve_all(risk_mdp)
    for name in SOLVER_NAMES:
        assert again.policies[name].agrees(report.policies[name])


def test_discounted_solvers_need_gamma_below_one() -> None:
    mdp = single_state(1, 0, gamma=1.0)

    for name in DISCOUNTED:
        with pytest.raises(ConfigurationError):
            solve(name, mdp)
    assert solve("rvi", mdp).actions.tolist() == [0]
    assert solve("vi", mdp, gamma=0.5).gamma == 0.5


def test_solver_registry() -> None:
    assert isinstance(solver("gauss-seidel"), GaussSeidelValueIteration)
    assert solver("gsvi") == solver("gs-vi")
    assert solver({"mpi": {"m": 3}}).m == 3
    assert solver("RVI").name == "rvi"
    with pytest.raises(UnknownComponent):
        solver("q-learning")
    with pytest.raises(UnknownComponent):
        solver("pi", m=3)
    with pytest.raises(ConfigurationError):
        solve("mpi", single_state(1, 0), m=0)


def test_policy_checks_and_round_trip(tmp_path: Path) -> None:
    policy = solve("rvi", single_state(-1, 1))
    write_policy(policy, tmp_path / "policy.json")
    loaded = load_policy(tmp_path / "policy.json")

    assert loaded.agrees(policy)
    assert loaded.gain == policy.gain
    assert loaded.seconds == policy.seconds
    assert loaded.solver == "rvi"
    with pytest.raises(PreconditionError):
        Policy(np.zeros(2, dtype=np.int64), np.zeros(3), "vi", 1, 0.0, 0.5)
    with pytest.raises(PreconditionError):
        evaluate_policy(single_state(1, 0), [0, 1])
