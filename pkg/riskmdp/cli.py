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
``riskmdp`` command line. Every subcommand reads its inputs from and writes
its artifacts to ``--out-dir``, so the single stage commands chained in
order reproduce ``riskmdp pipeline``.
"""

import argparse
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

from . import pipeline
from .abstraction import load_cluster_model
from .discretizer import BinningScheme, enumerate_states, load_scheme, load_trajectory
from .exceptions import (
    BoundsError,
    ConfigurationError,
    ModelError,
    NumericError,
    PreconditionError,
    RiskMdpException,
    StageError,
    ValidationException,
)
from .featurestream import load_records
from .mdpbuild import label_states, load_mdp
from .pipeline import PipelineConfig, Workspace, stage
from .solvers import load_policy

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def exit_code(error: BaseException) -> int:
    """Exit status for an error, looking through :class:`StageError`."""
    if isinstance(error, StageError):
        error = error.cause
    if isinstance(error, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(
        error, (ValidationException, PreconditionError, BoundsError, OSError)
    ):
        return EXIT_DATA
    if isinstance(error, (ModelError, NumericError)):
        return EXIT_NUMERIC
    return EXIT_FAILURE


def _scheme(config: PipelineConfig, ws: Workspace) -> BinningScheme:
    if os.path.exists(ws.scheme):
        return load_scheme(ws.scheme)
    return config.scheme()


def cmd_simulate(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    with stage("simulate"):
        records = pipeline.stage_records(config, ws)
    print(f"wrote {len(records)} records to {ws.records}")


def cmd_discretize(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    with stage("discretize"):
        records = load_records(config.paths.records or ws.records)
        traj = pipeline.stage_discretize(config, ws, records)
    print(f"wrote {len(traj.index)} trajectory steps to {ws.trajectory}")


def cmd_abstract(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    with stage("abstract"):
        model = pipeline.stage_abstract(config, ws, _scheme(config, ws))
    print(
        f"{model.algorithm}: {model.k} abstract states, "
        f"{len(model.empty_clusters)} empty, written to {ws.cluster_model}"
    )


def cmd_build(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    with stage("build"):
        scheme = _scheme(config, ws)
        model = load_cluster_model(ws.cluster_model)
        traj = load_trajectory(ws.trajectory, scheme)
        mdp, _ = pipeline.stage_build(config, ws, model, traj, scheme)
    print(f"MDP over {mdp.k} abstract states written to {ws.mdp}")


def cmd_solve(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    with stage("solve"):
        policy = pipeline.stage_solve(config, ws, load_mdp(ws.mdp))
    print(
        f"{policy.solver}: {policy.iterations} iterations in {policy.seconds:.4f}s, "
        f"written to {ws.policy()}"
    )


def cmd_evaluate(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    with stage("evaluate"):
        scheme = _scheme(config, ws)
        model = load_cluster_model(ws.cluster_model)
        labeling = label_states(enumerate_states(scheme), config.risk_params(), scheme)
        report = pipeline.stage_evaluate(
            config, ws, load_policy(ws.policy()), model, labeling
        )
    print(
        f"abstract accuracy {report.abstract_accuracy:.5f}, "
        f"original accuracy {report.original_accuracy:.5f}"
    )


def cmd_predict(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    with stage("predict"):
        scheme = _scheme(config, ws)
        tree, entries = pipeline.stage_predict(
            config,
            ws,
            load_mdp(ws.mdp),
            load_policy(ws.policy()),
            load_cluster_model(ws.cluster_model),
            load_trajectory(ws.trajectory, scheme),
        )
    print(f"{len(tree.nodes)} nodes, risky mass {tree.mass('risky'):.6g}")
    for e in entries[:10]:
        print(f"  depth {e.depth} state {e.state}: {e.probability:.6g}")


def cmd_pipeline(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    result = pipeline.run_pipeline(config)
    print(result.summary())


def _csv_list(convert: Callable[[str], object]) -> Callable[[str], List[object]]:
    def parse(value: str) -> List[object]:
        try:
            return [convert(v) for v in value.split(",") if v.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e))

    return parse


def cmd_sweep_clustering(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    rows = pipeline.sweep_clustering(config, args.algorithms, args.k_list)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"{len(rows)} cells ({failed} failed) written to {ws.path('clustering.csv')}")


def cmd_sweep_gamma(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    rows = pipeline.sweep_gamma(config, args.gammas)
    print(f"{len(rows)} rows written to {ws.path('gamma.csv')}")


def cmd_bench_solvers(
    config: PipelineConfig, ws: Workspace, args: argparse.Namespace
) -> None:
    for row in pipeline.bench_solvers(config):
        print(
            f"{row['solver']:6} {row['seconds']:.4f}s {row['iterations']:6d} iterations"
            f" agrees_with_mpi={row['agrees_with_mpi']}"
        )


COMMANDS: Dict[str, Callable[[PipelineConfig, Workspace, argparse.Namespace], None]] = {
    "simulate": cmd_simulate,
    "discretize": cmd_discretize,
    "abstract": cmd_abstract,
    "build": cmd_build,
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "pipeline": cmd_pipeline,
    "sweep-clustering": cmd_sweep_clustering,
    "sweep-gamma": cmd_sweep_gamma,
    "bench-solvers": cmd_bench_solvers,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskmdp",
        description="Predict risky states of a cloud subsystem with an abstracted MDP.",
    )
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out-dir", help="override the artifact directory")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        command = sub.add_parser(name)
        if name == "sweep-clustering":
            command.add_argument(
                "--algorithms",
                type=_csv_list(str),
                help="comma separated, e.g. kme,kmm",
            )
            command.add_argument(
                "--k-list", type=_csv_list(int), help="comma separated cluster counts"
            )
        elif name == "sweep-gamma":
            command.add_argument(
                "--gammas",
                type=_csv_list(float),
                help="comma separated discount factors",
            )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        config = (
            PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
        )
        config = config.override(seed=args.seed, out_dir=args.out_dir)
        ws = Workspace(config.paths.out_dir).ensure()
        COMMANDS[args.command](config, ws, args)
    except RiskMdpException as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
