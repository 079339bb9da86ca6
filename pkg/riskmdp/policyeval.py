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
import logging
from typing import Any, ClassVar, Dict, Mapping, Tuple, Union

import numpy as np

from .abstraction import ClusterModel
from .exceptions import ConfigurationError, PreconditionError
from .mdpbuild import JUMP, REMAIN, RiskLabeling, RiskParams, abstract_labeling
from .serializer import PathType, serializer
from .solvers import Policy

logger = logging.getLogger(__name__)

ActionsLike = Union[Policy, np.ndarray]


@dataclasses.dataclass(frozen=True)
class AccuracyCounts:
    """
    States of one space split by risk label and chosen action. Remaining at
    risky states and jumping from safe states are the favourable outcomes.
    """

    risky_remain: int
    risky_jump: int
    safe_remain: int
    safe_jump: int

    @property
    def total(self) -> int:
        return self.risky_remain + self.risky_jump + self.safe_remain + self.safe_jump

    @property
    def favourable(self) -> int:
        return self.risky_remain + self.safe_jump

    @property
    def accuracy(self) -> float:
        return self.favourable / self.total if self.total else 0.0

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = dataclasses.asdict(self)
        d["accuracy"] = self.accuracy
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AccuracyCounts":
        return cls(
            risky_remain=int(d["risky_remain"]),
            risky_jump=int(d["risky_jump"]),
            safe_remain=int(d["safe_remain"]),
            safe_jump=int(d["safe_jump"]),
        )


@dataclasses.dataclass(frozen=True)
class AccuracyReport:
    """
    ``empty_clusters`` counts abstract states without members. They are
    labelled safe and their policy action is arbitrary, so they weigh on the
    abstract accuracy only.
    """

    abstract: AccuracyCounts
    original: AccuracyCounts
    empty_clusters: int = 0

    CSV_HEADER: ClassVar[Tuple[str, ...]] = (
        "abstract_acc",
        "original_acc",
        "abstract_states",
        "original_states",
        "abstract_empty",
        "original_risky_remain",
        "original_risky_jump",
        "original_safe_remain",
        "original_safe_jump",
    )

    @property
    def abstract_accuracy(self) -> float:
        return self.abstract.accuracy

    @property
    def original_accuracy(self) -> float:
        return self.original.accuracy

    def to_dict(self) -> Dict[str, Any]:
        return {
            "abstract": self.abstract.to_dict(),
            "original": self.original.to_dict(),
            "empty_clusters": self.empty_clusters,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AccuracyReport":
        return cls(
            abstract=AccuracyCounts.from_dict(d["abstract"]),
            original=AccuracyCounts.from_dict(d["original"]),
            empty_clusters=int(d.get("empty_clusters", 0)),
        )

    def to_csv_row(self) -> Dict[str, Any]:
        return {
            "abstract_acc": self.abstract.accuracy,
            "original_acc": self.original.accuracy,
            "abstract_states": self.abstract.total,
            "original_states": self.original.total,
            "abstract_empty": self.empty_clusters,
            "original_risky_remain": self.original.risky_remain,
            "original_risky_jump": self.original.risky_jump,
            "original_safe_remain": self.original.safe_remain,
            "original_safe_jump": self.original.safe_jump,
        }


def _actions(policy: ActionsLike) -> np.ndarray:
    if isinstance(policy, Policy):
        return policy.actions
    return np.asarray(policy, dtype=np.int64)


def lift_policy(policy: ActionsLike, model: ClusterModel) -> np.ndarray:
    """Give every original state the action of its abstract state."""
    actions = _actions(policy)
    if actions.shape != (model.k,):
        raise ConfigurationError(
            f"Policy has {actions.shape[0]} actions, "
            f"the cluster model {model.k} states."
        )
    return actions[model.assignment]


def accuracy(
    actions: ActionsLike, labeling: Union[RiskLabeling, np.ndarray]
) -> AccuracyCounts:
    actions = _actions(actions)
    risky = labeling.risky if isinstance(labeling, RiskLabeling) else labeling
    risky = np.asarray(risky, dtype=bool)
    if actions.shape != risky.shape:
        raise PreconditionError(
            f"{actions.shape[0]} actions for {risky.shape[0]} labelled states."
        )
    remain = actions == REMAIN
    jump = actions == JUMP
    return AccuracyCounts(
        risky_remain=int(np.count_nonzero(risky & remain)),
        risky_jump=int(np.count_nonzero(risky & jump)),
        safe_remain=int(np.count_nonzero(~risky & remain)),
        safe_jump=int(np.count_nonzero(~risky & jump)),
    )


def evaluate(
    policy: ActionsLike,
    model: ClusterModel,
    labeling: RiskLabeling,
    params: RiskParams,
) -> AccuracyReport:
    """
    Accuracy of an abstract policy on the abstract space, where a state is
    risky when its mean member risk metric is, and on the original space.
    """
    abstract = accuracy(policy, abstract_labeling(model, labeling, params))
    original = accuracy(lift_policy(policy, model), labeling)
    empty = len(model.empty_clusters)
    logger.info(
        "accuracy: abstract %.5f over %d states (%d empty), "
        "original %.5f over %d states",
        abstract.accuracy,
        abstract.total,
        empty,
        original.accuracy,
        original.total,
    )
    return AccuracyReport(abstract=abstract, original=original, empty_clusters=empty)


def write_accuracy_report(report: AccuracyReport, path: PathType) -> None:
    serializer.dump(report, path)


def load_accuracy_report(path: PathType) -> AccuracyReport:
    return AccuracyReport.from_dict(serializer.load(path))
