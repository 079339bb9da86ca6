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

import dataclasses
from pathlib import Path
from typing import List

import pytest

from riskmdp import ConfigurationError, ParseError, ValidationException
from riskmdp.featurestream import (
    FEATURE_RANGES,
    FeatureRecord,
    SimulationConfig,
    feature_matrix,
    load_records,
    simulate,
    write_records,
)

HEADER = (
    "t,http_requests,unique_users,req_user_ratio,"
    "avg_bytes_sent,avg_latency,avg_response_time,syn,udp,icmp\n"
)


def test_simulate_returns_one_record_per_step() -> None:
    records = simulate(SimulationConfig(duration_steps=300, seed=1))

    assert len(records) == 300
    assert [r.t for r in records] == list(range(300))


def test_no_attack_schedule_means_no_flags() -> None:
    records = simulate(SimulationConfig(duration_steps=50, seed=2))

    assert all(r.dos_flags == (False, False, False) for r in records)


def test_simulate_is_deterministic_for_a_seed(attack_config: SimulationConfig) -> None:
    assert simulate(attack_config) == simulate(attack_config)
    other = dataclasses.replace(attack_config, seed=4)
    assert simulate(attack_config) != simulate(other)


def test_simulated_records_are_valid_and_in_range(records: List[FeatureRecord]) -> None:
    for r in records:
        r.validate()
        assert 1 <= r.req_user_ratio <= 4
    features = feature_matrix(records)
    for column, name in enumerate(
        [
            "http_requests",
            "unique_users",
            "req_user_ratio",
            "avg_bytes_sent",
            "avg_latency",
            "avg_response_time",
        ]
    ):
        assert features[:, column] in FEATURE_RANGES[name]


@pytest.mark.parametrize("seed", range(10))
def test_random_configs_keep_the_record_invariants(seed: int) -> None:
    config = SimulationConfig(
        duration_steps=40, seed=seed, idle_probability=0.2, mean_users=5.0
    ).attack(seed, seed + 10, "udp")

    for r in simulate(config):
        r.validate()
        if r.unique_users == 0:
            assert r.req_user_ratio == 0


def test_attack_flags_match_the_schedule_exactly(
    attack_config: SimulationConfig, records: List[FeatureRecord]
) -> None:
    for r in records:
        assert r.syn == (20 <= r.t < 50)
        assert r.udp == (60 <= r.t < 90)
        assert r.icmp == (80 <= r.t < 100)
    assert (attack_config.attack_mask().any(axis=1)).sum() == 70


def test_attacks_inflate_latency_and_response_time() -> None:
    base = SimulationConfig(duration_steps=60, seed=9)
    attacked = base.attack(10, 30, "syn")

    for quiet, loud in zip(simulate(base), simulate(attacked)):
        assert quiet.http_requests == loud.http_requests
        if 10 <= quiet.t < 30:
            assert loud.avg_latency == min(3500.0, quiet.avg_latency * 3.0)
            assert loud.avg_response_time == min(8000.0, quiet.avg_response_time * 2.5)
        else:
            assert loud == quiet


@pytest.mark.parametrize(
    "schedule",
    [
        [(0, 301, "syn")],
        [(-1, 10, "syn")],
        [(10, 10, "udp")],
        [(0, 10, "http")],
        [(0, 20, "icmp"), (10, 30, "icmp")],
    ],
)
def test_invalid_intervals_are_rejected(schedule: list) -> None:
    with pytest.raises(ConfigurationError):
        SimulationConfig(duration_steps=300, attack_schedule=tuple(schedule))


def test_different_attack_types_may_overlap() -> None:
    config = (
        SimulationConfig(duration_steps=100)
        .attack(0, 50, "syn")
        .attack(10, 60, "udp")
    )

    assert len(config.attack_schedule) == 2


def test_simulation_config_dict_round_trip(attack_config: SimulationConfig) -> None:
    assert SimulationConfig.from_dict(attack_config.to_dict()) == attack_config
    with pytest.raises(ConfigurationError):
        SimulationConfig.from_dict({"duration": 10})


def test_write_then_load_gives_equal_records(
    tmp_path: Path, records: List[FeatureRecord]
) -> None:
    path = tmp_path / "records.csv"
    write_records(records, path)

    assert path.read_text().startswith(HEADER)
    assert load_records(path) == records


def test_load_row_without_time_column(tmp_path: Path) -> None:
    path = tmp_path / "records.csv"
    path.write_text(
        HEADER.split(",", 1)[1]
        + "5,2,2.5,900,150,300,1,0,0\n"
        + "0,0,0,900,150,300,0,0,0\n"
    )

    first, idle = load_records(path)

    assert first == FeatureRecord(
        t=0,
        http_requests=5,
        unique_users=2,
        req_user_ratio=2.5,
        avg_bytes_sent=900.0,
        avg_latency=150.0,
        avg_response_time=300.0,
        dos_flags=(True, False, False),
    )
    assert idle.t == 1
    assert idle.req_user_ratio == 0


def test_ratio_mismatch_is_a_validation_error(tmp_path: Path) -> None:
    path = tmp_path / "records.csv"
    path.write_text(
        HEADER + "0,5,2,2.5,900,150,300,0,0,0\n" + "1,6,2,2.5,900,150,300,0,0,0\n"
    )

    with pytest.raises(ValidationException, match="row 3"):
        load_records(path)


def test_malformed_row_names_the_row(tmp_path: Path) -> None:
    path = tmp_path / "records.csv"
    path.write_text(
        HEADER + "0,5,2,2.5,900,150,300,0,0,0\n" + "1,5,2,2.5,900,slow,300,0,0,0\n"
    )

    with pytest.raises(ParseError) as e:
        load_records(path)

    assert e.value.row == 3


def test_negative_values_are_rejected(tmp_path: Path) -> None:
    path = tmp_path / "records.csv"
    path.write_text(HEADER + "0,5,2,2.5,900,-150,300,0,0,0\n")

    with pytest.raises(ParseError):
        load_records(path)


def test_record_validation(record: FeatureRecord) -> None:
    record.validate()
    with pytest.raises(ValidationException):
        dataclasses.replace(record, req_user_ratio=2.5).validate()
    with pytest.raises(ValidationException):
        dataclasses.replace(record, avg_latency=-1.0).validate()
