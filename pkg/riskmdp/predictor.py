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
Forward expansion of the policy-induced chain from a safe abstract state.

Risky states are treated as absorbing: a path ends at the first risky state
it reaches, so every risky leaf carries a first-passage probability.
"""

import collections
import dataclasses
import logging
from typing import Any, Deque, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from typing_extensions import Literal

from .exceptions import BoundsError, ConfigurationError, PreconditionError
from .field import Table
from .mdpbuild import MdpModel
from .serializer import PathType, serializer
from .solvers import Policy

logger = logging.getLogger(__name__)

ABSORPTION_NOTE = "risky states treated as absorbing"

DEFAULT_HORIZON = 5
DEFAULT_MIN_PROBABILITY = 1e-4
DEFAULT_BRANCHING = 16

NodeKind = Literal["internal", "risky", "horizon", "pruned"]

REPORT_TABLE = Table(
    [("depth", "integer"), ("state", "integer"), ("probability", "float")]
)


@dataclasses.dataclass
class TreeNode:
    index: int
    state: int
    depth: int
    probability: float
    parent: Optional[int]
    kind: NodeKind = "internal"
    action: Optional[int] = None
    pruned_mass: float = 0.0
    children: List[int] = dataclasses.field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class RiskEntry:
    depth: int
    state: int
    probability: float

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class PredictionTree:
    root: int
    nodes: List[TreeNode]
    horizon: int
    min_probability: float
    branching: int

    def leaves(self, kind: Optional[NodeKind] = None) -> List[TreeNode]:
        return [
            n
            for n in self.nodes
            if n.kind != "internal" and (kind is None or n.kind == kind)
        ]

    def mass(self, kind: NodeKind) -> float:
        return float(sum(n.probability for n in self.leaves(kind)))

    @property
    def pruned_mass(self) -> float:
        return float(sum(n.pruned_mass for n in self.nodes))

    def conservation(self) -> float:
        """Risky plus horizon plus pruned mass; 1 up to rounding."""
        return self.mass("risky") + self.mass("horizon") + self.pruned_mass

    def render(self) -> str:
        lines = [
            f"prediction from state {self.root} (horizon {self.horizon}, "
            f"min probability {self.min_probability}, branching {self.branching}; "
            f"{ABSORPTION_NOTE})"
        ]

        def _walk(index: int) -> None:
            node = self.nodes[index]
            lines.append(
                f"{'  ' * node.depth}state {node.state} [{node.kind}] "
                f"p={node.probability:.6g}"
                + (f" pruned={node.pruned_mass:.3g}" if node.pruned_mass else "")
            )
            for child in node.children:
                _walk(child)

        _walk(0)
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "root": self.root,
            "horizon": self.horizon,
            "min_probability": self.min_probability,
            "branching": self.branching,
            "note": ABSORPTION_NOTE,
            "nodes": [n.to_dict() for n in self.nodes],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PredictionTree":
        return cls(
            root=int(d["root"]),
            nodes=[TreeNode(**n) for n in d["nodes"]],
            horizon=int(d["horizon"]),
            min_probability=float(d["min_probability"]),
            branching=int(d["branching"]),
        )


def _actions(policy: Union[Policy, Sequence[int], np.ndarray]) -> np.ndarray:
    if isinstance(policy, Policy):
        return policy.actions
    return np.asarray(policy, dtype=np.int64)


def _check(mdp: MdpModel, actions: np.ndarray, risky: np.ndarray, root: int) -> None:
    if actions.shape != (mdp.k,) or risky.shape != (mdp.k,):
        raise ConfigurationError(
            f"Policy and labels must cover the {mdp.k} states of the model."
        )
    if not 0 <= root < mdp.k:
        raise BoundsError(f"Root state {root} outside of [0, {mdp.k}).")
    if risky[root]:
        raise PreconditionError(f"Root state {root} is risky.")


def predict(
    mdp: MdpModel,
    policy: Union[Policy, Sequence[int], np.ndarray],
    root: int,
    risky: Optional[Any] = None,
    horizon: int = DEFAULT_HORIZON,
    min_probability: float = DEFAULT_MIN_PROBABILITY,
    branching: int = DEFAULT_BRANCHING,
) -> PredictionTree:
    """
    Breadth-first expansion of the transition tree from ``root``.

    A safe node takes its policy action and branches to the successors whose
    transition probability exceeds ``min_probability``, keeping the
    ``branching`` most likely (ties by state id). The probability of the
    dropped successors is kept on the node as ``pruned_mass``.
    """
    if horizon < 1:
        raise ConfigurationError(f"horizon must be >= 1, got {horizon}.")
    if branching < 1:
        raise ConfigurationError(f"branching must be >= 1, got {branching}.")
    actions = _actions(policy)
    risky = np.asarray(mdp.risky if risky is None else risky, dtype=bool)
    _check(mdp, actions, risky, root)

    nodes = [TreeNode(index=0, state=root, depth=0, probability=1.0, parent=None)]
    queue: Deque[int] = collections.deque([0])
    while queue:
        node = nodes[queue.popleft()]
        if node.depth > 0 and risky[node.state]:
            node.kind = "risky"
            continue
        if node.depth == horizon:
            node.kind = "horizon"
            continue

        node.action = int(actions[node.state])
        row = mdp.transitions[node.action, node.state]
        successors = np.flatnonzero(row > min_probability)
        # most likely first, lowest state id on ties
        order = np.lexsort((successors, -row[successors]))
        kept = successors[order][:branching]
        kept_mass = float(row[kept].sum())
        node.pruned_mass = node.probability * max(0.0, 1.0 - kept_mass)
        if not kept.size:
            node.kind = "pruned"
            continue
        for state in kept:
            child = TreeNode(
                index=len(nodes),
                state=int(state),
                depth=node.depth + 1,
                probability=node.probability * float(row[state]),
                parent=node.index,
            )
            node.children.append(child.index)
            nodes.append(child)
            queue.append(child.index)

    tree = PredictionTree(
        root=root,
        nodes=nodes,
        horizon=horizon,
        min_probability=min_probability,
        branching=branching,
    )
    logger.info(
        "prediction tree from state %d: %d nodes, risky mass %.6f",
        root,
        len(nodes),
        tree.mass("risky"),
    )
    return tree


def risk_report(tree: PredictionTree) -> List[RiskEntry]:
    """
    Risky leaf probabilities summed per (depth, state), most likely first.
    """
    totals: Dict[Any, float] = collections.defaultdict(float)
    for node in tree.leaves("risky"):
        totals[(node.depth, node.state)] += node.probability
    entries = [RiskEntry(d, s, p) for (d, s), p in totals.items()]
    return sorted(entries, key=lambda e: (-e.probability, e.depth, e.state))


def first_passage(
    mdp: MdpModel,
    policy: Union[Policy, Sequence[int], np.ndarray],
    root: int,
    risky: Optional[Any] = None,
    horizon: int = DEFAULT_HORIZON,
) -> np.ndarray:
    """
    ``f[d, s]``: probability that the chain started at ``root`` under the
    policy first enters a risky state at step ``d`` and that state is ``s``.
    """
    actions = _actions(policy)
    risky = np.asarray(mdp.risky if risky is None else risky, dtype=bool)
    _check(mdp, actions, risky, root)
    chain = mdp.transitions[actions, np.arange(mdp.k), :]
    passage = np.zeros((horizon + 1, mdp.k))
    alive = np.zeros(mdp.k)
    alive[root] = 1.0
    for depth in range(1, horizon + 1):
        step = alive @ chain
        passage[depth] = np.where(risky, step, 0.0)
        alive = np.where(risky, 0.0, step)
    return passage


def select_root(
    trajectory: Any, assignment: np.ndarray, risky: np.ndarray
) -> int:
    """Abstract state of the last trajectory step that is not risky."""
    abstract = np.asarray(assignment)[np.asarray(trajectory, dtype=np.int64)]
    safe = abstract[~np.asarray(risky, dtype=bool)[abstract]]
    if not safe.size:
        raise PreconditionError("The trajectory never visits a safe abstract state.")
    return int(safe[-1])


def write_report_csv(entries: Sequence[RiskEntry], path: PathType) -> None:
    REPORT_TABLE.write((e.to_dict() for e in entries), path)


def load_report_csv(path: PathType) -> List[RiskEntry]:
    return [RiskEntry(**row) for _, row in REPORT_TABLE.read(path)]


def write_prediction_tree(tree: PredictionTree, path: PathType) -> None:
    serializer.dump(tree, path)


def load_prediction_tree(path: PathType) -> PredictionTree:
    return PredictionTree.from_dict(serializer.load(path))
