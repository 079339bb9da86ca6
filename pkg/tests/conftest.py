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
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pytest import fixture

from riskmdp.discretizer import DOS_FEATURE, BinningScheme, FeatureBins
from riskmdp.featurestream import FeatureRecord, SimulationConfig, simulate
from riskmdp.mdpbuild import MdpModel
from riskmdp.pipeline import PipelineConfig

MdpFactory = Callable[..., MdpModel]


def binary_scheme(dos_codes: int = 8) -> BinningScheme:
    """Two bins per continuous feature."""
    return BinningScheme(
        [
            FeatureBins("http_requests", 2, lower=0, upper=50, width=25),
            FeatureBins("unique_users", 2, lower=0, upper=50, width=25),
            FeatureBins("req_user_ratio", 2, lower=1, upper=4, width=1.5),
            FeatureBins("avg_bytes_sent", 2, lower=800, upper=1300, width=250),
            FeatureBins("avg_latency", 2, lower=100, upper=3500, width=1700),
            FeatureBins("avg_response_time", 2, lower=0, upper=8000, width=4000),
            FeatureBins(DOS_FEATURE, dos_codes, categorical=True),
        ]
    )


@fixture(scope="session")
def reduced_scheme() -> BinningScheme:
    # 2 * 2 * 2 * 2 * 2 * 2 * 8 = 512 states
    return binary_scheme()


@fixture(scope="session")
def all_binary_scheme() -> BinningScheme:
    return binary_scheme(dos_codes=2)


@fixture(scope="session")
def attack_config() -> SimulationConfig:
    return (
        SimulationConfig(duration_steps=120, seed=3)
        .attack(20, 50, "syn")
        .attack(60, 90, "udp")
        .attack(80, 100, "icmp")
    )


@fixture(scope="session")
def records(attack_config: SimulationConfig) -> List[FeatureRecord]:
    return simulate(attack_config)


@fixture
def record() -> FeatureRecord:
    return FeatureRecord(
        t=0,
        http_requests=20,
        unique_users=10,
        req_user_ratio=2.0,
        avg_bytes_sent=1000.0,
        avg_latency=600.0,
        avg_response_time=1500.0,
        dos_flags=(False, False, False),
    )


def make_mdp(
    reward: Any, transitions: Any, gamma: float = 0.5, risky: Optional[Any] = None
) -> MdpModel:
    reward = np.asarray(reward, dtype=float)
    transitions = np.asarray(transitions, dtype=float)
    return MdpModel(
        reward=reward,
        transitions=transitions,
        gamma=gamma,
        risky=None if risky is None else np.asarray(risky, dtype=bool),
    ).validate()


def random_mdp(
    rng: np.random.Generator, k: int, gamma: float = 0.5, sparse: bool = False
) -> MdpModel:
    transitions = rng.dirichlet(np.ones(k), size=(2, k))
    if sparse:
        transitions *= rng.random((2, k, k)) < 0.5
        transitions[:, np.arange(k), np.arange(k)] += 1e-3
        transitions /= transitions.sum(axis=2, keepdims=True)
    return make_mdp(rng.normal(size=(k, 2)), transitions, gamma)


@fixture
def mdp_factory() -> MdpFactory:
    return make_mdp


@fixture
def small_config(tmp_path: Path, reduced_scheme: BinningScheme) -> PipelineConfig:
    overrides: Dict[str, Any] = {
        "seed": 5,
        "paths": {"out_dir": str(tmp_path / "out")},
        "simulation": {
            "duration_steps": 120,
            "attack_schedule": [[20, 50, "syn"], [60, 90, "udp"], [80, 100, "icmp"]],
        },
        "binning": reduced_scheme.to_dict(),
        "abstraction": {"algorithm": "kme", "k": 64},
        "prediction": {"horizon": 3},
        "sweep": {
            "algorithms": ["kme", "kmm", "gmm"],
            "k_list": [16, 32],
            "gammas": [0.1, 0.5, 0.9],
        },
    }
    return PipelineConfig(overrides)
