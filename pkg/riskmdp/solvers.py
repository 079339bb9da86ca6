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
Dynamic programming solvers for :class:`~riskmdp.mdpbuild.MdpModel`.

Every solver starts from ``V = 0`` and breaks ties between the two actions
toward action 0, so policies are deterministic and comparable across
solvers.
"""

import collections.abc
import dataclasses
import logging
import time
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .exceptions import ConfigurationError, NumericError, PreconditionError
from .mdpbuild import MdpModel
from .serializer import PathType, serializer
from .utils import Component

logger = logging.getLogger(__name__)

EPSILON = 1e-8
MPI_SWEEPS = 10
PI_MAX_ITER = 1000
VI_MAX_ITER = 100_000
RVI_MAX_ITER = 10_000
RVI_STALL_WINDOW = 100
RVI_STALL_TOLERANCE = 1e-10
APERIODICITY_TAU = 0.5

SOLVER_NAMES = ("vi", "pi", "mpi", "rvi", "gs-vi")


@dataclasses.dataclass(frozen=True, eq=False)
class Policy:
    """
    Solver output. ``values`` are discounted values, or relative values for
    ``rvi`` which also reports its ``gain``. ``tolerance`` bounds the Bellman
    residual of ``values``.
    """

    actions: np.ndarray
    values: np.ndarray
    solver: str
    iterations: int
    seconds: float
    gamma: Optional[float]
    converged: bool = True
    tolerance: float = EPSILON
    gain: Optional[float] = None

    def __post_init__(self) -> None:
        if self.actions.shape != self.values.shape:
            raise PreconditionError(
                f"{self.actions.shape[0]} actions but {self.values.shape[0]} values."
            )

    @property
    def k(self) -> int:
        return int(self.actions.shape[0])

    def agrees(self, other: "Policy") -> bool:
        return bool(np.array_equal(self.actions, other.actions))

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {
            "solver": self.solver,
            "gamma": self.gamma,
            "actions": self.actions,
            "values": self.values,
            "iterations": self.iterations,
            "seconds": self.seconds,
            "converged": self.converged,
            "tolerance": self.tolerance,
        }
        if self.gain is not None:
            d["gain"] = self.gain
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Policy":
        return cls(
            actions=np.asarray(d["actions"], dtype=np.int64),
            values=np.asarray(d["values"], dtype=float),
            solver=d["solver"],
            iterations=int(d["iterations"]),
            seconds=float(d["seconds"]),
            gamma=None if d.get("gamma") is None else float(d["gamma"]),
            converged=bool(d.get("converged", True)),
            tolerance=float(d.get("tolerance", EPSILON)),
            gain=None if d.get("gain") is None else float(d["gain"]),
        )


def write_policy(policy: Policy, path: PathType) -> None:
    serializer.dump(policy, path)


def load_policy(path: PathType) -> Policy:
    return Policy.from_dict(serializer.load(path))


def _gamma(mdp: MdpModel, gamma: Optional[float]) -> float:
    gamma = mdp.gamma if gamma is None else float(gamma)
    if not 0 < gamma < 1:
        raise ConfigurationError(
            f"Discounted solvers need gamma in (0, 1), got {gamma}."
        )
    return gamma


def _stop_threshold(epsilon: float, gamma: float) -> float:
    return epsilon * (1 - gamma) / (2 * gamma)


def q_values(mdp: MdpModel, values: np.ndarray, gamma: float) -> np.ndarray:
    """``Q[s, a] = R[s, a] + gamma * sum_s' P(s'|s, a) V(s')``."""
    return mdp.reward + gamma * (mdp.transitions @ values).T


def greedy(q: np.ndarray) -> np.ndarray:
    """Action 1 only where it is strictly better than action 0."""
    return (q[:, 1] > q[:, 0]).astype(np.int64)


def _select(q: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return q[np.arange(q.shape[0]), actions]


def _policy_model(mdp: MdpModel, actions: np.ndarray) -> Any:
    states = np.arange(mdp.k)
    return mdp.reward[states, actions], mdp.transitions[actions, states, :]


def evaluate_policy(
    mdp: MdpModel, actions: Any, gamma: Optional[float] = None
) -> np.ndarray:
    """Exact value of a fixed policy: solves ``(I - gamma P_pi) V = R_pi``."""
    gamma = _gamma(mdp, gamma)
    actions = np.asarray(actions, dtype=np.int64)
    if actions.shape != (mdp.k,):
        raise PreconditionError(f"Expected {mdp.k} actions, got {actions.shape}.")
    r_pi, p_pi = _policy_model(mdp, actions)
    try:
        values = scipy.linalg.solve(np.eye(mdp.k) - gamma * p_pi, r_pi)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericError(f"Policy evaluation system is singular: {e}") from e
    if not np.all(np.isfinite(values)):
        raise NumericError("Policy evaluation produced non-finite values.")
    return values


def _aperiodic(mdp: MdpModel, tau: float) -> np.ndarray:
    return tau * np.eye(mdp.k)[None, :, :] + (1 - tau) * mdp.transitions


def bellman_residual(mdp: MdpModel, policy: Policy) -> float:
    """
    ``max_s |V(s) - max_a Q(s, a)|`` for discounted policies. For relative
    value iteration, the span of ``T h - h`` on the aperiodic model.
    """
    if policy.solver == "rvi":
        transitions = _aperiodic(mdp, APERIODICITY_TAU)
        q = mdp.reward + (transitions @ policy.values).T
        diff = q.max(axis=1) - policy.values
        return float(diff.max() - diff.min())
    q = q_values(mdp, policy.values, _gamma(mdp, policy.gamma))
    return float(np.max(np.abs(q.max(axis=1) - policy.values)))


def _finish(
    name: str,
    actions: np.ndarray,
    values: np.ndarray,
    iterations: int,
    start: float,
    gamma: Optional[float],
    converged: bool = True,
    tolerance: float = EPSILON,
    gain: Optional[float] = None,
) -> Policy:
    seconds = time.perf_counter() - start
    if not converged:
        logger.warning(
            "%s stopped after %d iterations, residual bound %.3g",
            name,
            iterations,
            tolerance,
        )
    logger.info(
        "%s: %d states, %d iterations in %.4fs",
        name,
        actions.shape[0],
        iterations,
        seconds,
    )
    return Policy(
        actions=actions,
        values=values,
        solver=name,
        iterations=iterations,
        seconds=seconds,
        gamma=gamma,
        converged=converged,
        tolerance=tolerance,
        gain=gain,
    )


def value_iteration(
    mdp: MdpModel,
    gamma: Optional[float] = None,
    epsilon: float = EPSILON,
    max_iter: int = VI_MAX_ITER,
) -> Policy:
    gamma = _gamma(mdp, gamma)
    start = time.perf_counter()
    threshold = _stop_threshold(epsilon, gamma)
    values = np.zeros(mdp.k)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        new_values = q_values(mdp, values, gamma).max(axis=1)
        diff = float(np.max(np.abs(new_values - values)))
        values = new_values
        logger.debug("vi iteration %d diff %.3g", iteration, diff)
        if diff < threshold:
            converged = True
            break
    actions = greedy(q_values(mdp, values, gamma))
    return _finish("vi", actions, values, iteration, start, gamma, converged, epsilon)


def policy_iteration(
    mdp: MdpModel,
    gamma: Optional[float] = None,
    max_iter: int = PI_MAX_ITER,
    tol: float = 1e-12,
) -> Policy:
    """
    Exact evaluation alternating with greedy improvement. A state only
    switches action when that improves its value by more than ``tol``
    relative to the value scale.
    """
    gamma = _gamma(mdp, gamma)
    start = time.perf_counter()
    actions = np.zeros(mdp.k, dtype=np.int64)
    values = evaluate_policy(mdp, actions, gamma)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        q = q_values(mdp, values, gamma)
        improvement = q.max(axis=1) - _select(q, actions)
        if np.all(improvement <= tol * (1.0 + np.max(np.abs(values)))):
            converged = True
            actions = greedy(q)
            break
        actions = greedy(q)
        values = evaluate_policy(mdp, actions, gamma)
        logger.debug("pi iteration %d, %d states on action 1", iteration, actions.sum())
    return _finish("pi", actions, values, iteration, start, gamma, converged, EPSILON)


def modified_policy_iteration(
    mdp: MdpModel,
    gamma: Optional[float] = None,
    m: int = MPI_SWEEPS,
    epsilon: float = EPSILON,
    max_iter: int = VI_MAX_ITER,
) -> Policy:
    """
    Policy iteration where evaluation is replaced by ``m`` backups of the
    greedy policy; stops with the value iteration criterion.
    """
    if m < 1:
        raise ConfigurationError(f"m must be >= 1, got {m}.")
    gamma = _gamma(mdp, gamma)
    start = time.perf_counter()
    threshold = _stop_threshold(epsilon, gamma)
    values = np.zeros(mdp.k)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        q = q_values(mdp, values, gamma)
        actions = greedy(q)
        backed_up = _select(q, actions)
        diff = float(np.max(np.abs(backed_up - values)))
        values = backed_up
        if diff < threshold:
            converged = True
            break
        r_pi, p_pi = _policy_model(mdp, actions)
        for _ in range(m - 1):
            values = r_pi + gamma * (p_pi @ values)
        logger.debug("mpi iteration %d diff %.3g", iteration, diff)
    actions = greedy(q_values(mdp, values, gamma))
    return _finish("mpi", actions, values, iteration, start, gamma, converged, epsilon)


def gauss_seidel_vi(
    mdp: MdpModel,
    gamma: Optional[float] = None,
    epsilon: float = EPSILON,
    max_iter: int = VI_MAX_ITER,
) -> Policy:
    """Value iteration with in-place updates in ascending state order."""
    gamma = _gamma(mdp, gamma)
    start = time.perf_counter()
    threshold = _stop_threshold(epsilon, gamma)
    reward = mdp.reward
    p_remain, p_jump = mdp.transitions
    values = np.zeros(mdp.k)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        diff = 0.0
        for s in range(mdp.k):
            remain = reward[s, 0] + gamma * (p_remain[s] @ values)
            jump = reward[s, 1] + gamma * (p_jump[s] @ values)
            new = jump if jump > remain else remain
            diff = max(diff, abs(new - values[s]))
            values[s] = new
        logger.debug("gs-vi iteration %d diff %.3g", iteration, diff)
        if diff < threshold:
            converged = True
            break
    actions = greedy(q_values(mdp, values, gamma))
    return _finish(
        "gs-vi", actions, values, iteration, start, gamma, converged, epsilon
    )


def relative_value_iteration(
    mdp: MdpModel,
    epsilon: float = EPSILON,
    tau: float = APERIODICITY_TAU,
    reference: int = 0,
    max_iter: int = RVI_MAX_ITER,
    stall_window: int = RVI_STALL_WINDOW,
) -> Policy:
    """
    Average reward value iteration on the aperiodic model
    ``tau * I + (1 - tau) * P``. The value of ``reference`` is pinned to 0
    after every sweep; iteration stops once ``span(T h - h) < epsilon``.

    Models with several recurrent classes of different gain never meet the
    span criterion: the span settles on a positive constant. Iteration stops
    once the span has not moved for ``stall_window`` sweeps, and the last
    policy is returned with ``converged=False`` and the span reached as its
    tolerance.
    """
    if not 0 < tau < 1:
        raise ConfigurationError(f"tau must lie in (0, 1), got {tau}.")
    if not 0 <= reference < mdp.k:
        raise ConfigurationError(f"Reference state {reference} outside of the model.")
    if stall_window < 1:
        raise ConfigurationError(f"stall_window must be >= 1, got {stall_window}.")
    start = time.perf_counter()
    transitions = _aperiodic(mdp, tau)
    relative = np.zeros(mdp.k)
    gain = 0.0
    span = float("inf")
    stalled = 0
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        backed_up = (
            mdp.reward + (transitions @ relative).T
        ).max(axis=1)
        diff = backed_up - relative
        previous, span = span, float(diff.max() - diff.min())
        gain = float(backed_up[reference])
        relative = backed_up - gain
        if span < epsilon:
            converged = True
            break
        stalled = stalled + 1 if previous - span <= RVI_STALL_TOLERANCE * span else 0
        if stalled >= stall_window:
            logger.warning(
                "rvi: span stalled at %.6g after %d iterations, "
                "the model has several recurrent classes",
                span,
                iteration,
            )
            break
    q = mdp.reward + (transitions @ relative).T
    actions = greedy(q)
    tolerance = epsilon if converged else span
    return _finish(
        "rvi", actions, relative, iteration, start, None, converged, tolerance, gain
    )


def solver(
    name_or_solver: Union[str, "Solver", Mapping[str, Any]], **params: Any
) -> "Solver":
    # {"mpi": {"m": 20}}
    if isinstance(name_or_solver, collections.abc.Mapping):
        if params or len(name_or_solver) != 1:
            raise ValueError("solver() expects a dict with exactly one solver.")
        name, params = next(iter(name_or_solver.items()))
        return Solver.get_component_class(name)(**params)

    # PolicyIteration()
    if isinstance(name_or_solver, Solver):
        if params:
            raise ValueError(
                "solver() cannot accept parameters when passing in a Solver."
            )
        return name_or_solver

    # "mpi", m=10
    return Solver.get_component_class(name_or_solver)(**params)


class Solver(Component):
    _type_name = "solver"
    _type_shortcut = staticmethod(solver)

    def solve(self, mdp: MdpModel, gamma: Optional[float] = None) -> Policy:
        raise NotImplementedError()


class ValueIteration(Solver):
    name = "vi"
    _defaults = {"epsilon": EPSILON, "max_iter": VI_MAX_ITER}

    def solve(self, mdp: MdpModel, gamma: Optional[float] = None) -> Policy:
        return value_iteration(mdp, gamma, **self._params)


class PolicyIteration(Solver):
    name = "pi"
    _defaults = {"max_iter": PI_MAX_ITER, "tol": 1e-12}

    def solve(self, mdp: MdpModel, gamma: Optional[float] = None) -> Policy:
        return policy_iteration(mdp, gamma, **self._params)


class ModifiedPolicyIteration(Solver):
    name = "mpi"
    _defaults = {"m": MPI_SWEEPS, "epsilon": EPSILON, "max_iter": VI_MAX_ITER}

    def solve(self, mdp: MdpModel, gamma: Optional[float] = None) -> Policy:
        return modified_policy_iteration(mdp, gamma, **self._params)


class RelativeValueIteration(Solver):
    name = "rvi"
    _defaults = {
        "epsilon": EPSILON,
        "tau": APERIODICITY_TAU,
        "reference": 0,
        "max_iter": RVI_MAX_ITER,
        "stall_window": RVI_STALL_WINDOW,
    }

    def solve(self, mdp: MdpModel, gamma: Optional[float] = None) -> Policy:
        return relative_value_iteration(mdp, **self._params)


class GaussSeidelValueIteration(Solver):
    name = "gs-vi"
    aliases = ("gsvi", "gauss-seidel")
    _defaults = {"epsilon": EPSILON, "max_iter": VI_MAX_ITER}

    def solve(self, mdp: MdpModel, gamma: Optional[float] = None) -> Policy:
        return gauss_seidel_vi(mdp, gamma, **self._params)


def solve(
    name: Union[str, Solver],
    mdp: MdpModel,
    gamma: Optional[float] = None,
    **params: Any,
) -> Policy:
    return solver(name, **params).solve(mdp, gamma)


@dataclasses.dataclass(frozen=True, eq=False)
class SolverReport:
    policies: Dict[str, Policy]

    @property
    def names(self) -> List[str]:
        return list(self.policies)

    @property
    def timings(self) -> Dict[str, float]:
        return {name: p.seconds for name, p in self.policies.items()}

    def agreement(self) -> np.ndarray:
        """Pairwise identical-action matrix in the order of ``names``."""
        policies = list(self.policies.values())
        return np.array([[a.agrees(b) for b in policies] for a in policies])

    def to_rows(self, reference: str = "mpi") -> List[Dict[str, Any]]:
        ref = self.policies.get(reference)
        return [
            {
                "solver": name,
                "seconds": p.seconds,
                "iterations": p.iterations,
                "agrees_with_mpi": None if ref is None else p.agrees(ref),
            }
            for name, p in self.policies.items()
        ]


def solve_all(
    mdp: MdpModel,
    gamma: Optional[float] = None,
    solvers: Iterable[str] = SOLVER_NAMES,
    params: Optional[Mapping[str, Mapping[str, Any]]] = None,
) -> SolverReport:
    params = params or {}
    policies = {
        name: solve(name, mdp, gamma, **params.get(name, {})) for name in solvers
    }
    report = SolverReport(policies)
    logger.info(
        "solver agreement with mpi: %s",
        ", ".join(f"{r['solver']}={r['agrees_with_mpi']}" for r in report.to_rows()),
    )
    return report


def policy_value_gap(
    mdp: MdpModel, policies: Sequence[Policy], gamma: Optional[float] = None
) -> float:
    """Largest difference between the exact values of a set of policies."""
    values = [evaluate_policy(mdp, p.actions, gamma) for p in policies]
    return float(max(np.max(np.abs(v - values[0])) for v in values))
