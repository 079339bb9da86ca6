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

import pickle
from typing import Any, Dict, Tuple

import numpy as np
from pytest import raises

from riskmdp import UnknownComponent, serializer, utils
from riskmdp.solvers import ModifiedPolicyIteration, Solver, solver


def test_attrdict_pickle() -> None:
    ad: utils.AttrDict[str] = utils.AttrDict({})

    pickled_ad = pickle.dumps(ad)
    assert ad == pickle.loads(pickled_ad)


def test_attrdict_keys_items() -> None:
    a = utils.AttrDict({"a": {"b": 42, "c": 47}, "d": "e"})
    assert list(a.keys()) == ["a", "d"]
    assert list(a.items()) == [("a", {"b": 42, "c": 47}), ("d", "e")]


def test_attrdict_wraps_nested_sections() -> None:
    a = utils.AttrDict({"abstraction": {"k": 250}})

    assert isinstance(a.abstraction, utils.AttrDict)
    assert a.abstraction.k == a["abstraction"]["k"] == 250
    with raises(AttributeError):
        a.missing


def test_merge() -> None:
    a: utils.AttrDict[Any] = utils.AttrDict({"a": {"b": 42, "c": 47}})
    b = {"a": {"b": 123, "d": -12}, "e": [1, 2, 3]}

    utils.merge(a, b)

    assert a == {"a": {"b": 123, "c": 47, "d": -12}, "e": [1, 2, 3]}


def test_merge_conflict() -> None:
    data: Tuple[Dict[str, Any], ...] = (
        {"a": 42},
        {"a": {"b": 47}},
    )
    for d in data:
        utils.merge({"a": {"b": 42}}, d)
        with raises(ValueError):
            utils.merge({"a": {"b": 42}}, d, True)


def test_attrdict_bool() -> None:
    d: utils.AttrDict[str] = utils.AttrDict({})

    assert not d
    d.title = "Title"
    assert d


def test_serializer_deals_with_attr_versions() -> None:
    d = utils.AttrDict({"key": [1, 2, 3]})

    assert serializer.serializer.dumps(d) == serializer.serializer.dumps(
        {"key": [1, 2, 3]}
    )


def test_serializer_deals_with_objects_with_to_dict() -> None:
    class MyClass:
        def to_dict(self) -> int:
            return 42

    assert serializer.serializer.dumps(MyClass()) == "42"


def test_serializer_deals_with_numpy_values() -> None:
    data = {
        "b": np.array([[1.5, 2.0]]),
        "a": np.int64(3),
        "c": np.bool_(True),
        "d": np.float32(0.5),
    }

    expected = '{"a":3,"b":[[1.5,2.0]],"c":true,"d":0.5}'
    assert serializer.serializer.dumps(data) == expected


def test_serializer_refuses_nan() -> None:
    with raises(serializer.ValidationException):
        serializer.serializer.dumps({"x": float("nan")})


def test_recursive_to_dict() -> None:
    assert utils.recursive_to_dict({"k": [1, (1.0, {"v": solver("mpi", m=3)})]}) == {
        "k": [1, (1.0, {"v": {"mpi": {"m": 3, "epsilon": 1e-8, "max_iter": 100_000}}})]
    }


def test_registry_builds_components_by_name() -> None:
    s = solver("MPI", m=20)

    assert isinstance(s, ModifiedPolicyIteration)
    assert s.m == 20
    assert s == solver({"mpi": {"m": 20}})
    assert s != solver("mpi")


def test_registry_resolves_aliases() -> None:
    assert Solver.get_component_class("gsvi") is Solver.get_component_class("gs-vi")


def test_registry_rejects_unknown_names_and_parameters() -> None:
    with raises(UnknownComponent):
        solver("q-learning")
    with raises(UnknownComponent):
        solver("vi", m=3)


def test_component_clone_leaves_original_untouched() -> None:
    s = solver("mpi")
    c = s._clone(m=2)

    assert s.m == 10
    assert c.m == 2
