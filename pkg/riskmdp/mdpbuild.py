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
Risk labelling of states and construction of the two action MDP over the
abstract state space.

Action 0 ("remain") keeps the subsystem in its current state with
probability ``t_s``; action 1 ("jump") follows the transition frequencies
observed on the trajectory.
"""

import dataclasses
import logging
import os
import struct
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Literal

from .abstraction import ClusterModel
from .discretizer import (
    DEFAULT_SCHEME,
    DOS_FEATURE,
    BinningScheme,
    DiscreteState,
    Trajectory,
    enumerate_states,
    state_space_size,
)
from .exceptions import (
    BoundsError,
    ConfigurationError,
    ModelError,
    PreconditionError,
    ValidationException,
)
from .serializer import PathType, serializer

logger = logging.getLogger(__name__)

REMAIN = 0
JUMP = 1
ACTIONS = (REMAIN, JUMP)

DEFAULT_WEIGHTS = (1000.0, 1000.0, 1000.0, 1000.0, 2000.0, 2000.0, 3000.0)
LITERAL_ACTION_WEIGHT = 1500.0
STOCHASTIC_TOLERANCE = 1e-9

SELF_TRANSITION_MIN = 0.51
SELF_TRANSITION_SPAN = 0.49

DosRule = Literal["attack", "first-half"]
RangeRule = Literal["states", "abstract"]


@dataclasses.dataclass(frozen=True)
class RiskParams:
    """
    Weights of the risk metric, the threshold factor ``alpha`` and the weight
    of the action term in the reward.

    ``action_weight`` defaults to the mean feature weight, or to 1500 when
    ``literal_action_weight`` is set. ``dos_rule="attack"`` flags the DoS
    feature whenever any attack is present, ``"first-half"`` applies the
    same first-half rule as every other feature.
    """

    weights: Tuple[float, ...] = DEFAULT_WEIGHTS
    alpha: float = 0.5
    action_weight: Optional[float] = None
    literal_action_weight: bool = False
    dos_rule: DosRule = "attack"
    self_transition_range: RangeRule = "states"

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.weights or any(w <= 0 for w in self.weights):
            raise ConfigurationError(
                f"Weights must all be positive, got {self.weights}."
            )
        if not 0 < self.alpha <= 1:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}.")
        if self.action_weight is not None and self.action_weight <= 0:
            raise ConfigurationError("action_weight must be positive.")
        if self.dos_rule not in ("attack", "first-half"):
            raise ConfigurationError(f"Unknown dos_rule {self.dos_rule!r}.")
        if self.self_transition_range not in ("states", "abstract"):
            raise ConfigurationError(
                f"Unknown self_transition_range {self.self_transition_range!r}."
            )

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))

    @property
    def threshold(self) -> float:
        return self.alpha * self.total_weight

    @property
    def w_a(self) -> float:
        if self.action_weight is not None:
            return float(self.action_weight)
        if self.literal_action_weight:
            return LITERAL_ACTION_WEIGHT
        return self.total_weight / len(self.weights)

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["weights"] = list(self.weights)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RiskParams":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"Unknown risk parameters {sorted(unknown)}.")
        return cls(**d)


@dataclasses.dataclass(frozen=True, eq=False)
class RiskLabeling:
    """Risk metric of every state and whether it exceeds the threshold."""

    rm: np.ndarray
    risky: np.ndarray
    threshold: float

    def __len__(self) -> int:
        return int(self.rm.shape[0])

    @property
    def n_risky(self) -> int:
        return int(np.count_nonzero(self.risky))


@dataclasses.dataclass(frozen=True, eq=False)
class MdpModel:
    """
    ``reward[s, a]`` and ``transitions[a, s, s']`` over ``K`` abstract states.
    ``abstract_rm``/``risky`` are the labels the model was built from and
    ``self_transition`` the ``t_s`` used for the remain action.
    """

    reward: np.ndarray
    transitions: np.ndarray
    gamma: float
    abstract_rm: Optional[np.ndarray] = None
    risky: Optional[np.ndarray] = None
    self_transition: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return int(self.reward.shape[0])

    def transition(self, action: int) -> np.ndarray:
        if action not in ACTIONS:
            raise BoundsError(f"Unknown action {action}, expected one of {ACTIONS}.")
        return self.transitions[action]

    def validate(self) -> "MdpModel":
        k = self.k
        if self.reward.shape != (k, len(ACTIONS)):
            raise ModelError(f"Reward matrix has shape {self.reward.shape}.")
        if self.transitions.shape != (len(ACTIONS), k, k):
            raise ModelError(f"Transition tensor has shape {self.transitions.shape}.")
        if not np.all(np.isfinite(self.reward)):
            raise ModelError("Reward matrix has non-finite entries.")
        if not np.all(np.isfinite(self.transitions)):
            raise ModelError("Transition matrices have non-finite entries.")
        if np.any(self.transitions < 0) or np.any(self.transitions > 1):
            raise ModelError("Transition probabilities outside of [0, 1].")
        deviation = np.abs(self.transitions.sum(axis=2) - 1.0)
        if np.any(deviation > STOCHASTIC_TOLERANCE):
            action, state = np.unravel_index(np.argmax(deviation), deviation.shape)
            raise ModelError(
                f"Row {state} of action {action} sums to "
                f"{self.transitions[action, state].sum()!r}."
            )
        if not 0 < self.gamma <= 1:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}.")
        return self

    def to_dict(self, include_transitions: bool = True) -> Dict[str, Any]:
        d: Dict[str, Any] = {"k": self.k, "gamma": self.gamma, "reward": self.reward}
        if include_transitions:
            d["transitions"] = self.transitions
        for key in ("abstract_rm", "risky", "self_transition"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d

    @classmethod
    def from_dict(
        cls, d: Mapping[str, Any], transitions: Optional[np.ndarray] = None
    ) -> "MdpModel":
        k = int(d["k"])
        if transitions is None:
            if "transitions" not in d:
                raise ValidationException("MDP artifact has no transition matrices.")
            transitions = np.asarray(d["transitions"], dtype=float)
        return cls(
            reward=np.asarray(d["reward"], dtype=float).reshape(k, len(ACTIONS)),
            transitions=np.asarray(transitions, dtype=float).reshape(
                len(ACTIONS), k, k
            ),
            gamma=float(d["gamma"]),
            abstract_rm=None
            if d.get("abstract_rm") is None
            else np.asarray(d["abstract_rm"], dtype=float),
            risky=(
                None if d.get("risky") is None else np.asarray(d["risky"], dtype=bool)
            ),
            self_transition=None
            if d.get("self_transition") is None
            else np.asarray(d["self_transition"], dtype=float),
        ).validate()


def _codes(state: Union[DiscreteState, Sequence[int], np.ndarray]) -> np.ndarray:
    if isinstance(state, DiscreteState):
        state = state.codes
    return np.asarray(state, dtype=np.int64)


def flag_matrix(
    codes: Any, params: RiskParams, scheme: BinningScheme = DEFAULT_SCHEME
) -> np.ndarray:
    """
    Unsafe-feature flags for every row of a code matrix. A feature is safe
    (flag 0) while its code lies in the first half of its bins.
    """
    codes = np.atleast_2d(np.asarray(codes, dtype=np.int64))
    if codes.shape[1] != len(scheme):
        raise ConfigurationError(
            f"Expected {len(scheme)} codes per state, got {codes.shape[1]}."
        )
    if len(params.weights) != len(scheme):
        raise ConfigurationError(
            f"{len(params.weights)} weights for {len(scheme)} features."
        )
    flags = np.empty(codes.shape, dtype=np.int8)
    for column, b in enumerate(scheme.bins):
        if b.name == DOS_FEATURE and params.dos_rule == "attack":
            flags[:, column] = codes[:, column] != 0
        else:
            flags[:, column] = codes[:, column] >= b.half
    return flags


def feature_flags(
    state: Union[DiscreteState, Sequence[int]],
    params: RiskParams,
    scheme: BinningScheme = DEFAULT_SCHEME,
) -> Tuple[int, ...]:
    return tuple(int(f) for f in flag_matrix(_codes(state), params, scheme)[0])


def risk_metric(
    state: Union[DiscreteState, Sequence[int]],
    params: RiskParams,
    scheme: BinningScheme = DEFAULT_SCHEME,
) -> float:
    flags = flag_matrix(_codes(state), params, scheme)[0]
    return float(flags @ np.asarray(params.weights))


def risk_threshold(params: RiskParams) -> float:
    return params.threshold


def label_states(
    codes: Any, params: RiskParams, scheme: BinningScheme = DEFAULT_SCHEME
) -> RiskLabeling:
    """Risk metric and risky flag of every row of a code matrix."""
    rm = flag_matrix(codes, params, scheme) @ np.asarray(params.weights)
    return RiskLabeling(rm=rm, risky=rm > params.threshold, threshold=params.threshold)


def _action_sign(risky: Any, action: Any) -> Any:
    # +1 for remaining at risky states and jumping from the others
    favourable = np.asarray(risky, dtype=bool) == (np.asarray(action) == REMAIN)
    return np.where(favourable, 1.0, -1.0)


def action_reward(
    state: Union[DiscreteState, Sequence[int]],
    action: int,
    params: RiskParams,
    scheme: BinningScheme = DEFAULT_SCHEME,
) -> float:
    if action not in ACTIONS:
        raise BoundsError(f"Unknown action {action}, expected one of {ACTIONS}.")
    risky = risk_metric(state, params, scheme) > params.threshold
    return float(_action_sign(risky, action))


def state_reward(
    state: Union[DiscreteState, Sequence[int]],
    action: int,
    params: RiskParams,
    scheme: BinningScheme = DEFAULT_SCHEME,
) -> float:
    return risk_metric(state, params, scheme) + params.w_a * action_reward(
        state, action, params, scheme
    )


def reward_matrix(labeling: RiskLabeling, params: RiskParams) -> np.ndarray:
    """``(n_states, 2)`` rewards of both actions for every labelled state."""
    columns = [
        labeling.rm + params.w_a * _action_sign(labeling.risky, action)
        for action in ACTIONS
    ]
    return np.stack(columns, axis=1)


def _cluster_mean(model: ClusterModel, values: np.ndarray) -> np.ndarray:
    population = model.population
    sums = np.bincount(model.assignment, weights=values, minlength=model.k)
    return np.divide(sums, population, out=np.zeros(model.k), where=population > 0)


def _check_labeling(model: ClusterModel, labeling: RiskLabeling) -> None:
    if len(labeling) != model.n_states:
        raise ConfigurationError(
            f"Labeling covers {len(labeling)} states, "
            f"the cluster model {model.n_states}."
        )


def abstract_rewards(
    model: ClusterModel, labeling: RiskLabeling, params: RiskParams
) -> np.ndarray:
    """Mean member reward per abstract state and action; empty clusters get 0."""
    _check_labeling(model, labeling)
    rewards = reward_matrix(labeling, params)
    return np.stack([_cluster_mean(model, rewards[:, a]) for a in ACTIONS], axis=1)


def abstract_reward(
    model: ClusterModel,
    abstract_id: int,
    action: int,
    labeling: RiskLabeling,
    params: RiskParams,
) -> float:
    if not 0 <= abstract_id < model.k:
        raise BoundsError(f"Abstract state {abstract_id} outside of [0, {model.k}).")
    if action not in ACTIONS:
        raise BoundsError(f"Unknown action {action}, expected one of {ACTIONS}.")
    return float(abstract_rewards(model, labeling, params)[abstract_id, action])


def abstract_labeling(
    model: ClusterModel, labeling: RiskLabeling, params: RiskParams
) -> RiskLabeling:
    """Mean member risk metric per abstract state; empty clusters are safe."""
    _check_labeling(model, labeling)
    rm = _cluster_mean(model, labeling.rm)
    return RiskLabeling(rm=rm, risky=rm > params.threshold, threshold=params.threshold)


def empirical_transitions(trajectory: Any, k: int) -> np.ndarray:
    """
    Row-normalised transition counts of a sequence of abstract states. States
    without an observed outgoing transition become self-loops.
    """
    ids = np.asarray(trajectory, dtype=np.int64).reshape(-1)
    if ids.shape[0] < 2:
        raise PreconditionError("A trajectory needs at least two steps.")
    if np.any(ids < 0) or np.any(ids >= k):
        raise BoundsError(f"Trajectory refers to states outside of [0, {k}).")
    counts = np.zeros((k, k))
    np.add.at(counts, (ids[:-1], ids[1:]), 1.0)
    outgoing = counts.sum(axis=1)
    unseen = outgoing == 0
    counts[unseen, unseen.nonzero()[0]] = 1.0
    outgoing[unseen] = 1.0
    return counts / outgoing[:, None]


def self_transition_prob(rm: Any, rm_min: float, rm_max: float) -> Any:
    """Linear map of a risk metric from ``[rm_min, rm_max]`` into ``[0.51, 1]``."""
    if rm_max < rm_min:
        raise ConfigurationError(f"rm_max {rm_max} is below rm_min {rm_min}.")
    if rm_max == rm_min:
        return np.full(np.shape(rm), SELF_TRANSITION_MIN)[()]
    scaled = (np.asarray(rm, dtype=float) - rm_min) / (rm_max - rm_min)
    return (np.clip(scaled, 0.0, 1.0) * SELF_TRANSITION_SPAN + SELF_TRANSITION_MIN)[()]


def remain_transitions(base: np.ndarray, t_s: np.ndarray) -> np.ndarray:
    """
    Transition matrix of the remain action: self-transition ``t_s`` and the
    base row's off-diagonal mass rescaled to ``1 - t_s``. A base row without
    off-diagonal mass stays a pure self-loop.
    """
    k = base.shape[0]
    off = base.copy()
    np.fill_diagonal(off, 0.0)
    mass = off.sum(axis=1)
    moving = mass > 0
    remain = np.zeros_like(base)
    remain[moving] = off[moving] / mass[moving, None] * (1.0 - t_s[moving, None])
    diagonal = np.where(moving, t_s, 1.0)
    remain[np.arange(k), np.arange(k)] = diagonal
    return remain


def _abstract_ids(model: ClusterModel, trajectory: Any) -> np.ndarray:
    index = trajectory.index if isinstance(trajectory, Trajectory) else trajectory
    index = np.asarray(index, dtype=np.int64).reshape(-1)
    if np.any(index < 0) or np.any(index >= model.n_states):
        raise BoundsError(
            f"Trajectory refers to states outside of [0, {model.n_states})."
        )
    return model.assignment[index]


def build_mdp(
    model: ClusterModel,
    trajectory: Any,
    params: RiskParams,
    gamma: float,
    labeling: Optional[RiskLabeling] = None,
    scheme: BinningScheme = DEFAULT_SCHEME,
) -> MdpModel:
    """
    Build the abstract MDP from a cluster model over the states of
    ``scheme`` and a trajectory of original state indices.

    ``labeling`` is computed from the enumerated states of ``scheme`` when
    not given.
    """
    if labeling is None:
        if model.n_states != state_space_size(scheme):
            raise ConfigurationError(
                f"Cluster model covers {model.n_states} states, the scheme "
                f"{state_space_size(scheme)}."
            )
        labeling = label_states(enumerate_states(scheme), params, scheme)
    _check_labeling(model, labeling)

    abstract = abstract_labeling(model, labeling, params)
    if params.self_transition_range == "states":
        rm_min, rm_max = float(labeling.rm.min()), float(labeling.rm.max())
    else:
        occupied = abstract.rm[model.population > 0]
        rm_min, rm_max = float(occupied.min()), float(occupied.max())
    t_s = np.asarray(self_transition_prob(abstract.rm, rm_min, rm_max), dtype=float)

    base = empirical_transitions(_abstract_ids(model, trajectory), model.k)
    mdp = MdpModel(
        reward=abstract_rewards(model, labeling, params),
        transitions=np.stack([remain_transitions(base, t_s), base]),
        gamma=float(gamma),
        abstract_rm=abstract.rm,
        risky=abstract.risky,
        self_transition=t_s,
    ).validate()
    logger.info(
        "built MDP over %d abstract states (%d risky), gamma=%s",
        mdp.k,
        abstract.n_risky,
        gamma,
    )
    return mdp


_DIMS = struct.Struct("<ii")


def write_sidecar(mdp: MdpModel, path: PathType) -> None:
    """
    Both transition matrices as dense binary blocks: two little-endian int32
    dimensions followed by row-major little-endian float64 data, action 0
    first.
    """
    with open(path, "wb") as f:
        for matrix in mdp.transitions:
            f.write(_DIMS.pack(*matrix.shape))
            f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_sidecar(path: PathType) -> np.ndarray:
    matrices = []
    with open(path, "rb") as f:
        while True:
            header = f.read(_DIMS.size)
            if not header:
                break
            if len(header) != _DIMS.size:
                raise ValidationException(f"{path}: truncated matrix header.")
            rows, cols = _DIMS.unpack(header)
            data = f.read(rows * cols * 8)
            if len(data) != rows * cols * 8:
                raise ValidationException(f"{path}: truncated matrix data.")
            matrices.append(np.frombuffer(data, dtype="<f8").reshape(rows, cols))
    if len(matrices) != len(ACTIONS):
        raise ValidationException(
            f"{path}: expected {len(ACTIONS)} matrices, found {len(matrices)}."
        )
    return np.stack(matrices).astype(float)


def write_mdp(mdp: MdpModel, path: PathType, sidecar: bool = False) -> None:
    """
    Write the model as JSON. With ``sidecar`` the transition matrices go to a
    ``.bin`` file next to it and the JSON only names that file.
    """
    d = mdp.to_dict(include_transitions=not sidecar)
    if sidecar:
        bin_path = os.path.splitext(os.fspath(path))[0] + ".bin"
        write_sidecar(mdp, bin_path)
        d["sidecar"] = os.path.basename(bin_path)
    serializer.dump(d, path)


def load_mdp(path: PathType) -> MdpModel:
    d = serializer.load(path)
    transitions = None
    if d.get("sidecar"):
        directory = os.path.dirname(os.fspath(path))
        transitions = read_sidecar(os.path.join(directory, d["sidecar"]))
    return MdpModel.from_dict(d, transitions=transitions)
