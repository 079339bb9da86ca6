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
End to end orchestration: configuration, artifact layout, the individual
stages and the experiment sweeps built on top of them.
"""

import concurrent.futures
import contextlib
import copy
import dataclasses
import logging
import os
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import numpy as np

from . import abstraction, solvers
from .abstraction import ClusterModel, write_cluster_model
from .discretizer import (
    DEFAULT_SCHEME,
    BinningScheme,
    Trajectory,
    enumerate_states,
    trajectory,
    write_scheme,
    write_trajectory,
)
from .exceptions import (
    ConfigurationError,
    RiskMdpException,
    StageError,
    ValidationException,
)
from .featurestream import (
    FeatureRecord,
    SimulationConfig,
    load_records,
    simulate,
    write_records,
)
from .field import Table
from .mdpbuild import MdpModel, RiskLabeling, RiskParams, build_mdp, label_states
from .mdpbuild import write_mdp
from .policyeval import AccuracyReport, evaluate, write_accuracy_report
from .predictor import (
    PredictionTree,
    RiskEntry,
    first_passage,
    predict,
    risk_report,
    select_root,
    write_prediction_tree,
    write_report_csv,
)
from .serializer import PathType, serializer
from .solvers import Policy, write_policy
from .utils import AttrDict, merge

logger = logging.getLogger(__name__)

_T = TypeVar("_T")

ALL_SOLVERS = "all"
PRIMARY_SOLVER = "mpi"

DEFAULT_CONFIG: Dict[str, Any] = {
    "seed": 0,
    "paths": {"records": None, "out_dir": "riskmdp-out"},
    "simulation": {
        "duration_steps": 300,
        "attack_schedule": [[60, 120, "syn"], [150, 200, "udp"], [180, 240, "icmp"]],
    },
    "binning": None,
    "abstraction": {"algorithm": "kme", "k": 1000, "params": {}},
    "risk": {},
    "gamma": 0.1,
    "solver": PRIMARY_SOLVER,
    "solver_params": {},
    "write_sidecar": True,
    "prediction": {
        "root": None,
        "horizon": 5,
        "min_probability": 1e-4,
        "branching": 16,
    },
    "sweep": {
        "algorithms": ["kme", "kmm", "gmm"],
        "k_list": [250, 500, 750, 1000],
        "gammas": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        "solver": "pi",
    },
    "jobs": 1,
}

# sections whose keys are fixed; the others are validated by their own types
_CLOSED_SECTIONS = ("paths", "abstraction", "prediction", "sweep")


def _check_keys(
    data: Mapping[str, Any], allowed: Mapping[str, Any], where: str
) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigurationError(f"Unknown {where} keys {sorted(unknown)}.")


class PipelineConfig(AttrDict[Any]):
    """
    Pipeline settings: ``DEFAULT_CONFIG`` with user values deep-merged over
    it. Typed views of the individual sections are available through
    :meth:`simulation_config`, :meth:`scheme` and :meth:`risk_params`.
    """

    def __init__(self, overrides: Optional[Mapping[str, Any]] = None):
        data = copy.deepcopy(DEFAULT_CONFIG)
        overrides = copy.deepcopy(dict(overrides or {}))
        _check_keys(overrides, DEFAULT_CONFIG, "configuration")
        for section in _CLOSED_SECTIONS:
            if isinstance(overrides.get(section), Mapping):
                _check_keys(overrides[section], DEFAULT_CONFIG[section], section)
        simulation = overrides.get("simulation")
        if isinstance(simulation, Mapping) and "seed" in simulation:
            raise ConfigurationError(
                "simulation.seed is not accepted, set the top-level seed instead."
            )
        merge(data, overrides)
        super().__init__(data)
        self.validate()

    @classmethod
    def from_file(cls, path: PathType) -> "PipelineConfig":
        try:
            data = serializer.load(path)
        except (OSError, ValidationException) as e:
            raise ConfigurationError(f"Cannot read configuration {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"Configuration {path} must hold a JSON object.")
        return cls(data)

    def override(
        self, seed: Optional[int] = None, out_dir: Optional[str] = None
    ) -> "PipelineConfig":
        data = self.to_dict(recursive=True)
        if seed is not None:
            data["seed"] = seed
        if out_dir is not None:
            data["paths"]["out_dir"] = out_dir
        return PipelineConfig(data)

    def validate(self) -> None:
        if int(self.abstraction.k) < 1:
            raise ConfigurationError(
                f"abstraction.k must be >= 1, got {self.abstraction.k}."
            )
        if not 0 < float(self.gamma) <= 1:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}.")
        if int(self.jobs) < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {self.jobs}.")
        if self.solver != ALL_SOLVERS:
            solvers.Solver.get_component_class(self.solver)
        abstraction.Clusterer.get_component_class(self.abstraction.algorithm)
        for name in self.sweep.algorithms:
            abstraction.Clusterer.get_component_class(name)
        for gamma in self.sweep.gammas:
            if not 0 < float(gamma) < 1:
                raise ConfigurationError(f"Sweep gamma {gamma} outside of (0, 1).")
        self.simulation_config()
        self.scheme()
        self.risk_params()

    def simulation_config(self) -> SimulationConfig:
        settings = dict(self.simulation.to_dict(recursive=True))
        settings["seed"] = int(self.seed)
        return SimulationConfig.from_dict(settings)

    def scheme(self) -> BinningScheme:
        if self.binning is None:
            return DEFAULT_SCHEME
        return BinningScheme.from_dict(self.binning.to_dict(recursive=True))

    def risk_params(self) -> RiskParams:
        return RiskParams.from_dict(self.risk.to_dict(recursive=True))

    def clusterer(self, algorithm: Optional[str] = None) -> abstraction.Clusterer:
        if algorithm is None or algorithm == self.abstraction.algorithm:
            return abstraction.clusterer(
                self.abstraction.algorithm,
                **self.abstraction.params.to_dict(recursive=True),
            )
        return abstraction.clusterer(algorithm)


class Workspace:
    """File layout of the artifacts under one output directory."""

    PARTIAL = ".partial"

    def __init__(self, out_dir: PathType):
        self.out_dir = os.fspath(out_dir)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def ensure(self) -> "Workspace":
        os.makedirs(self.out_dir, exist_ok=True)
        return self

    records = property(lambda self: self.path("records.csv"))
    scheme = property(lambda self: self.path("scheme.json"))
    trajectory = property(lambda self: self.path("trajectory.csv"))
    cluster_model = property(lambda self: self.path("cluster_model.json"))
    mdp = property(lambda self: self.path("mdp.json"))
    accuracy_json = property(lambda self: self.path("accuracy.json"))
    accuracy_csv = property(lambda self: self.path("accuracy.csv"))
    prediction_json = property(lambda self: self.path("prediction.json"))
    prediction_csv = property(lambda self: self.path("prediction.csv"))
    prediction_txt = property(lambda self: self.path("prediction.txt"))
    partial = property(lambda self: self.path(Workspace.PARTIAL))

    def policy(self, solver: Optional[str] = None) -> str:
        return self.path("policy.json" if solver is None else f"policy-{solver}.json")


ACCURACY_TABLE = Table(
    [
        (name, "float" if name.endswith("_acc") else "integer")
        for name in AccuracyReport.CSV_HEADER
    ]
)

_OPTIONAL_FLOAT = {"type": "float", "required": False}

CLUSTERING_TABLE = Table(
    [
        ("algorithm", "keyword"),
        ("k", "integer"),
        ("abstract_acc", _OPTIONAL_FLOAT),
        ("original_acc", _OPTIONAL_FLOAT),
        ("abstract_empty", {"type": "integer", "required": False}),
        ("status", "keyword"),
    ]
)
ELBOW_TABLE = Table(
    [
        ("k", "integer"),
        ("mse", {"type": "float", "required": False}),
        ("status", "keyword"),
    ]
)
GAMMA_TABLE = Table(
    [("gamma", "float"), ("abstract_acc", "float"), ("original_acc", "float")]
)
SOLVERS_TABLE = Table(
    [
        ("solver", "keyword"),
        ("seconds", "float"),
        ("iterations", "integer"),
        ("agrees_with_mpi", {"type": "boolean", "required": False}),
    ]
)


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    """Wrap failures of one pipeline stage into a :class:`StageError`."""
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except (RiskMdpException, OSError) as e:
        raise StageError(name, e) from e


def _run_stage(name: str, func: Callable[..., _T], *args: Any, **kwargs: Any) -> _T:
    with stage(name):
        return func(*args, **kwargs)


# individual stages, each reading its inputs as objects and writing artifacts


def stage_records(config: PipelineConfig, ws: Workspace) -> List[FeatureRecord]:
    if config.paths.records:
        records = load_records(config.paths.records)
        logger.info("loaded %d records from %s", len(records), config.paths.records)
    else:
        records = simulate(config.simulation_config())
    write_records(records, ws.records)
    return records


def stage_discretize(
    config: PipelineConfig, ws: Workspace, records: Sequence[FeatureRecord]
) -> Trajectory:
    scheme = config.scheme()
    traj = trajectory(records, scheme)
    write_scheme(scheme, ws.scheme)
    write_trajectory(traj, ws.trajectory)
    logger.info(
        "discretized %d records into %d distinct states",
        len(records),
        np.unique(traj.index).size,
    )
    return traj


def state_points(scheme: BinningScheme) -> np.ndarray:
    return enumerate_states(scheme).astype(float)


def stage_abstract(
    config: PipelineConfig,
    ws: Workspace,
    scheme: BinningScheme,
    algorithm: Optional[str] = None,
    k: Optional[int] = None,
) -> ClusterModel:
    model = config.clusterer(algorithm).fit(
        state_points(scheme),
        int(config.abstraction.k if k is None else k),
        seed=int(config.seed),
    )
    write_cluster_model(model, ws.cluster_model)
    return model


def stage_build(
    config: PipelineConfig,
    ws: Workspace,
    model: ClusterModel,
    traj: Trajectory,
    scheme: BinningScheme,
) -> Tuple[MdpModel, RiskLabeling]:
    params = config.risk_params()
    labeling = label_states(enumerate_states(scheme), params, scheme)
    mdp = build_mdp(model, traj, params, float(config.gamma), labeling=labeling)
    write_mdp(mdp, ws.mdp, sidecar=bool(config.write_sidecar))
    return mdp, labeling


def stage_solve(config: PipelineConfig, ws: Workspace, mdp: MdpModel) -> Policy:
    params = config.solver_params.to_dict(recursive=True)
    if config.solver == ALL_SOLVERS:
        report = solvers.solve_all(mdp, params=params)
        for name, policy in report.policies.items():
            write_policy(policy, ws.policy(name))
        policy = report.policies[PRIMARY_SOLVER]
    else:
        policy = solvers.solve(config.solver, mdp, **params)
    write_policy(policy, ws.policy())
    return policy


def stage_evaluate(
    config: PipelineConfig,
    ws: Workspace,
    policy: Policy,
    model: ClusterModel,
    labeling: RiskLabeling,
) -> AccuracyReport:
    report = evaluate(policy, model, labeling, config.risk_params())
    write_accuracy_report(report, ws.accuracy_json)
    ACCURACY_TABLE.write([report.to_csv_row()], ws.accuracy_csv)
    return report


def stage_predict(
    config: PipelineConfig,
    ws: Workspace,
    mdp: MdpModel,
    policy: Policy,
    model: ClusterModel,
    traj: Trajectory,
) -> Tuple[PredictionTree, List[RiskEntry]]:
    settings = config.prediction
    root = settings.root
    if root is None:
        root = select_root(traj.index, model.assignment, mdp.risky)
    tree = predict(
        mdp,
        policy,
        int(root),
        horizon=int(settings.horizon),
        min_probability=float(settings.min_probability),
        branching=int(settings.branching),
    )
    entries = risk_report(tree)
    exact = first_passage(mdp, policy, int(root), horizon=int(settings.horizon))

    write_prediction_tree(tree, ws.prediction_json)
    write_report_csv(entries, ws.prediction_csv)
    lines = [
        tree.render(),
        "",
        "risky states by depth (tree estimate / exact first passage):",
    ]
    for e in entries:
        lines.append(
            f"  depth {e.depth} state {e.state}: {e.probability:.6g} / "
            f"{exact[e.depth, e.state]:.6g}"
        )
    lines.append(
        f"total risky mass within {tree.horizon} steps: "
        f"{tree.mass('risky'):.6g} / {exact.sum():.6g}"
    )
    with open(ws.prediction_txt, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return tree, entries


@dataclasses.dataclass
class PipelineResult:
    records: List[FeatureRecord]
    trajectory: Trajectory
    model: ClusterModel
    mdp: MdpModel
    labeling: RiskLabeling
    policy: Policy
    accuracy: AccuracyReport
    tree: PredictionTree
    risk: List[RiskEntry]

    def summary(self) -> str:
        return (
            f"abstract accuracy {self.accuracy.abstract_accuracy:.5f}, "
            f"original accuracy {self.accuracy.original_accuracy:.5f}"
        )


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """
    Run every stage in order and write all artifacts to the output
    directory. The directory holds a ``.partial`` marker while the run is in
    progress; a failed run leaves it behind naming the failing stage.
    """
    ws = Workspace(config.paths.out_dir).ensure()
    with open(ws.partial, "w", encoding="utf-8") as f:
        f.write("running\n")
    try:
        scheme = config.scheme()
        records = _run_stage("simulate", stage_records, config, ws)
        traj = _run_stage("discretize", stage_discretize, config, ws, records)
        model = _run_stage("abstract", stage_abstract, config, ws, scheme)
        mdp, labeling = _run_stage(
            "build", stage_build, config, ws, model, traj, scheme
        )
        policy = _run_stage("solve", stage_solve, config, ws, mdp)
        report = _run_stage(
            "evaluate", stage_evaluate, config, ws, policy, model, labeling
        )
        tree, entries = _run_stage(
            "predict", stage_predict, config, ws, mdp, policy, model, traj
        )
    except StageError as e:
        with open(ws.partial, "w", encoding="utf-8") as f:
            f.write(f"{e.stage}: {e.cause}\n")
        raise
    os.remove(ws.partial)
    result = PipelineResult(
        records, traj, model, mdp, labeling, policy, report, tree, entries
    )
    logger.info("pipeline finished: %s", result.summary())
    return result


def _map(jobs: int, func: Callable[[Any], _T], items: Sequence[Any]) -> List[_T]:
    if jobs <= 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


@dataclasses.dataclass
class _Inputs:
    scheme: BinningScheme
    points: np.ndarray
    trajectory: Trajectory
    labeling: RiskLabeling
    params: RiskParams


def _prepare(config: PipelineConfig, ws: Workspace) -> _Inputs:
    scheme = config.scheme()
    records = _run_stage("simulate", stage_records, config, ws)
    traj = _run_stage("discretize", stage_discretize, config, ws, records)
    params = config.risk_params()
    return _Inputs(
        scheme=scheme,
        points=state_points(scheme),
        trajectory=traj,
        labeling=label_states(enumerate_states(scheme), params, scheme),
        params=params,
    )


def sweep_clustering(
    config: PipelineConfig,
    algorithms: Optional[Sequence[str]] = None,
    k_list: Optional[Sequence[int]] = None,
) -> List[Dict[str, Any]]:
    """
    Original and abstract accuracy per (algorithm, K) cell, written to
    ``clustering.csv``, and the k-means elbow curve, written to
    ``elbow.csv``. A failing cell is reported in its ``status`` column.
    """
    algorithms = list(config.sweep.algorithms if algorithms is None else algorithms)
    k_list = [int(k) for k in (config.sweep.k_list if k_list is None else k_list)]
    ws = Workspace(config.paths.out_dir).ensure()
    inputs = _prepare(config, ws)
    gamma = float(config.gamma)

    def _cell(cell: Tuple[str, int]) -> Dict[str, Any]:
        algorithm, k = cell
        row: Dict[str, Any] = {"algorithm": algorithm, "k": k}
        try:
            model = config.clusterer(algorithm).fit(
                inputs.points, k, seed=int(config.seed)
            )
            mdp = build_mdp(
                model, inputs.trajectory, inputs.params, gamma, labeling=inputs.labeling
            )
            policy = solvers.solve(config.sweep.solver, mdp)
            report = evaluate(policy, model, inputs.labeling, inputs.params)
        except RiskMdpException as e:
            logger.warning("sweep cell %s k=%d failed: %s", algorithm, k, e)
            row["status"] = f"failed: {e}"
            return row
        row.update(
            abstract_acc=report.abstract_accuracy,
            original_acc=report.original_accuracy,
            abstract_empty=report.empty_clusters,
            status="ok",
        )
        return row

    cells = [(a, k) for a in algorithms for k in k_list]
    rows = _map(int(config.jobs), _cell, cells)
    CLUSTERING_TABLE.write(rows, ws.path("clustering.csv"))

    fitted: List[int] = []
    failed: Dict[int, str] = {}
    for k in dict.fromkeys(k_list):
        try:
            abstraction.check_cluster_count(inputs.points, k)
        except ConfigurationError as e:
            logger.warning("elbow k=%d skipped: %s", k, e)
            failed[k] = f"failed: {e}"
        else:
            fitted.append(k)
    with stage("elbow"):
        curve = abstraction.elbow(inputs.points, fitted, seed=int(config.seed))
    elbow_rows = {row["k"]: dict(row, status="ok") for row in curve.to_rows()}
    for k, status in failed.items():
        elbow_rows[k] = {"k": k, "mse": None, "status": status}
    ELBOW_TABLE.write((elbow_rows[k] for k in k_list), ws.path("elbow.csv"))
    return rows


def _single_model(
    config: PipelineConfig, ws: Workspace
) -> Tuple[_Inputs, ClusterModel, MdpModel]:
    inputs = _prepare(config, ws)
    model = _run_stage("abstract", stage_abstract, config, ws, inputs.scheme)
    with stage("build"):
        mdp = build_mdp(
            model,
            inputs.trajectory,
            inputs.params,
            float(config.gamma),
            labeling=inputs.labeling,
        )
    return inputs, model, mdp


def sweep_gamma(
    config: PipelineConfig, gammas: Optional[Sequence[float]] = None
) -> List[Dict[str, Any]]:
    """Accuracy of the MPI policy for every discount factor, to ``gamma.csv``."""
    gammas = [float(g) for g in (config.sweep.gammas if gammas is None else gammas)]
    for g in gammas:
        if not 0 < g < 1:
            raise ConfigurationError(f"Sweep gamma {g} outside of (0, 1).")
    ws = Workspace(config.paths.out_dir).ensure()
    inputs, model, mdp = _single_model(config, ws)

    def _cell(gamma: float) -> Dict[str, Any]:
        with stage(f"gamma={gamma}"):
            policy = solvers.solve(PRIMARY_SOLVER, mdp, gamma)
            report = evaluate(policy, model, inputs.labeling, inputs.params)
        return {
            "gamma": gamma,
            "abstract_acc": report.abstract_accuracy,
            "original_acc": report.original_accuracy,
        }

    rows = _map(int(config.jobs), _cell, gammas)
    GAMMA_TABLE.write(rows, ws.path("gamma.csv"))
    return rows


def bench_solvers(config: PipelineConfig) -> List[Dict[str, Any]]:
    """Time every solver on the configured model, to ``solvers.csv``."""
    ws = Workspace(config.paths.out_dir).ensure()
    _, _, mdp = _single_model(config, ws)
    with stage("solve"):
        report = solvers.solve_all(
            mdp, params=config.solver_params.to_dict(recursive=True)
        )
    rows = report.to_rows()
    SOLVERS_TABLE.write(rows, ws.path("solvers.csv"))
    return rows

