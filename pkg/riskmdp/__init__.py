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

from .abstraction import (
    ClusterModel,
    Clusterer,
    clusterer,
    elbow,
    fit,
    fit_gmm,
    fit_kme,
    fit_kmm,
    map_state,
)
from .discretizer import (
    DEFAULT_SCHEME,
    BinningScheme,
    DiscreteState,
    FeatureBins,
    Trajectory,
    discretize,
    enumerate_states,
    state_from_index,
    state_index,
    state_space_size,
    trajectory,
)
from .exceptions import (
    BoundsError,
    ConfigurationError,
    ModelError,
    NumericError,
    ParseError,
    PreconditionError,
    RiskMdpException,
    StageError,
    UnknownComponent,
    ValidationException,
)
from .featurestream import FeatureRecord, SimulationConfig, load_records, simulate
from .mdpbuild import (
    MdpModel,
    RiskLabeling,
    RiskParams,
    abstract_labeling,
    abstract_reward,
    action_reward,
    build_mdp,
    empirical_transitions,
    feature_flags,
    label_states,
    risk_metric,
    risk_threshold,
    self_transition_prob,
    state_reward,
)
from .pipeline import (
    PipelineConfig,
    bench_solvers,
    run_pipeline,
    sweep_clustering,
    sweep_gamma,
)
from .policyeval import AccuracyCounts, AccuracyReport, accuracy, evaluate, lift_policy
from .predictor import PredictionTree, first_passage, predict, risk_report
from .solvers import (
    Policy,
    Solver,
    SolverReport,
    evaluate_policy,
    gauss_seidel_vi,
    modified_policy_iteration,
    policy_iteration,
    relative_value_iteration,
    solve_all,
    solver,
    value_iteration,
)
from .wrappers import Range

VERSION = (1, 0, 0)
__version__ = VERSION
__versionstr__ = ".".join(map(str, VERSION))
__all__ = [
    "AccuracyCounts",
    "AccuracyReport",
    "BinningScheme",
    "BoundsError",
    "ClusterModel",
    "Clusterer",
    "ConfigurationError",
    "DEFAULT_SCHEME",
    "DiscreteState",
    "FeatureBins",
    "FeatureRecord",
    "MdpModel",
    "ModelError",
    "NumericError",
    "ParseError",
    "PipelineConfig",
    "Policy",
    "PreconditionError",
    "PredictionTree",
    "Range",
    "RiskLabeling",
    "RiskMdpException",
    "RiskParams",
    "SimulationConfig",
    "Solver",
    "SolverReport",
    "StageError",
    "Trajectory",
    "UnknownComponent",
    "ValidationException",
    "abstract_labeling",
    "abstract_reward",
    "accuracy",
    "action_reward",
    "bench_solvers",
    "build_mdp",
    "clusterer",
    "discretize",
    "elbow",
    "empirical_transitions",
    "enumerate_states",
    "evaluate",
    "evaluate_policy",
    "feature_flags",
    "first_passage",
    "fit",
    "fit_gmm",
    "fit_kme",
    "fit_kmm",
    "gauss_seidel_vi",
    "label_states",
    "lift_policy",
    "load_records",
    "map_state",
    "modified_policy_iteration",
    "policy_iteration",
    "predict",
    "relative_value_iteration",
    "risk_metric",
    "risk_report",
    "risk_threshold",
    "run_pipeline",
    "self_transition_prob",
    "simulate",
    "solve_all",
    "solver",
    "state_from_index",
    "state_index",
    "state_reward",
    "state_space_size",
    "sweep_clustering",
    "sweep_gamma",
    "trajectory",
    "value_iteration",
]
