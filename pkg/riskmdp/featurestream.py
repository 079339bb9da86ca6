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
Per-second feature records of a cloud subsystem: a seeded synthetic generator
mixing normal traffic with injected flood attacks, and CSV ingest/export.
"""

import dataclasses
import logging
import math
from typing import Any, Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy import stats
from typing_extensions import Literal, Self, TypeAlias

from .exceptions import ConfigurationError, ValidationException
from .field import Table
from .serializer import PathType
from .wrappers import Range

logger = logging.getLogger(__name__)

AttackType: TypeAlias = Literal["syn", "udp", "icmp"]
ATTACK_TYPES: Tuple[AttackType, ...] = ("syn", "udp", "icmp")

RATIO_TOLERANCE = 1e-9
LOAD_RATIO_TOLERANCE = 1e-6

# observable ranges of the monitored subsystem
FEATURE_RANGES: Dict[str, Range] = {
    "http_requests": Range(gte=0, lte=50),
    "unique_users": Range(gte=0, lte=50),
    "req_user_ratio": Range(gte=1, lte=4),
    "avg_bytes_sent": Range(gte=800, lte=1300),
    "avg_latency": Range(gte=100, lte=3500),
    "avg_response_time": Range(gte=0, lte=8000),
}

NON_NEGATIVE = {"range": {"gte": 0}}

RECORD_TABLE = Table(
    [
        ("t", {"type": "integer", **NON_NEGATIVE}),
        ("http_requests", {"type": "integer", **NON_NEGATIVE}),
        ("unique_users", {"type": "integer", **NON_NEGATIVE}),
        ("req_user_ratio", {"type": "float", **NON_NEGATIVE}),
        ("avg_bytes_sent", {"type": "float", **NON_NEGATIVE}),
        ("avg_latency", {"type": "float", **NON_NEGATIVE}),
        ("avg_response_time", {"type": "float", **NON_NEGATIVE}),
        ("syn", "boolean"),
        ("udp", "boolean"),
        ("icmp", "boolean"),
    ]
)


def request_user_ratio(http_requests: float, unique_users: float) -> float:
    if unique_users > 0:
        return http_requests / unique_users
    return 0.0


@dataclasses.dataclass(frozen=True)
class FeatureRecord:
    """One second of observations of the subsystem."""

    t: int
    http_requests: int
    unique_users: int
    req_user_ratio: float
    avg_bytes_sent: float
    avg_latency: float
    avg_response_time: float
    dos_flags: Tuple[bool, bool, bool] = (False, False, False)

    @property
    def syn(self) -> bool:
        return self.dos_flags[0]

    @property
    def udp(self) -> bool:
        return self.dos_flags[1]

    @property
    def icmp(self) -> bool:
        return self.dos_flags[2]

    @property
    def under_attack(self) -> bool:
        return any(self.dos_flags)

    def validate(self, tolerance: float = RATIO_TOLERANCE) -> None:
        for name in (
            "t",
            "http_requests",
            "unique_users",
            "req_user_ratio",
            "avg_bytes_sent",
            "avg_latency",
            "avg_response_time",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValidationException(f"{name} must be >= 0, got {value!r}.")
        expected = request_user_ratio(self.http_requests, self.unique_users)
        if abs(self.req_user_ratio - expected) > tolerance:
            raise ValidationException(
                f"req_user_ratio {self.req_user_ratio!r} does not match "
                f"http_requests/unique_users = {expected!r}."
            )

    def to_row(self) -> Dict[str, Any]:
        row = dataclasses.asdict(self)
        del row["dos_flags"]
        row.update(zip(ATTACK_TYPES, self.dos_flags))
        return row


class AttackInterval(NamedTuple):
    start: int
    end: int
    attack_type: AttackType


@dataclasses.dataclass(frozen=True)
class SimulationConfig:
    """
    Parameters of the synthetic generator. Attack intervals are half-open
    ``[start, end)`` step ranges and are added with :meth:`attack`, which
    returns a new config::

        cfg = SimulationConfig(seed=7).attack(40, 70, "syn").attack(60, 90, "udp")
    """

    duration_steps: int = 300
    seed: int = 0
    attack_schedule: Tuple[AttackInterval, ...] = ()
    mean_users: float = 12.0
    users_std: float = 5.0
    mean_ratio: float = 2.0
    ratio_std: float = 0.6
    mean_bytes: float = 1000.0
    bytes_std: float = 80.0
    latency_baseline: float = 600.0
    latency_std: float = 250.0
    response_baseline: float = 1500.0
    response_std: float = 500.0
    latency_inflation: float = 3.0
    response_inflation: float = 2.5
    idle_probability: float = 0.0

    def __post_init__(self) -> None:
        schedule = tuple(AttackInterval(*i) for i in self.attack_schedule)
        object.__setattr__(self, "attack_schedule", schedule)
        self.validate()

    def validate(self) -> None:
        if self.duration_steps < 1:
            raise ConfigurationError("duration_steps must be at least 1.")
        for name in (
            "users_std",
            "ratio_std",
            "bytes_std",
            "latency_std",
            "response_std",
        ):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive.")
        if self.latency_inflation < 1 or self.response_inflation < 1:
            raise ConfigurationError("attack inflation multipliers must be >= 1.")
        if not 0 <= self.idle_probability <= 1:
            raise ConfigurationError("idle_probability must lie in [0, 1].")

        by_type: Dict[str, List[AttackInterval]] = {}
        for interval in self.attack_schedule:
            if interval.attack_type not in ATTACK_TYPES:
                raise ConfigurationError(
                    f"Unknown attack type {interval.attack_type!r}, "
                    f"expected one of {ATTACK_TYPES}."
                )
            if not 0 <= interval.start < interval.end <= self.duration_steps:
                raise ConfigurationError(
                    f"Attack interval {tuple(interval)} must satisfy "
                    f"0 <= start < end <= {self.duration_steps}."
                )
            by_type.setdefault(interval.attack_type, []).append(interval)

        for attack_type, intervals in by_type.items():
            intervals.sort()
            for prev, cur in zip(intervals, intervals[1:]):
                if cur.start < prev.end:
                    raise ConfigurationError(
                        f"{attack_type} intervals {tuple(prev)} and {tuple(cur)} "
                        "overlap."
                    )

    def _clone(self, **changes: Any) -> Self:
        return dataclasses.replace(self, **changes)

    def attack(self, start: int, end: int, attack_type: AttackType) -> Self:
        return self._clone(
            attack_schedule=self.attack_schedule
            + (AttackInterval(start, end, attack_type),)
        )

    def attack_mask(self) -> np.ndarray:
        """Boolean ``(duration_steps, 3)`` matrix of active syn/udp/icmp attacks."""
        mask = np.zeros((self.duration_steps, len(ATTACK_TYPES)), dtype=bool)
        for interval in self.attack_schedule:
            column = ATTACK_TYPES.index(interval.attack_type)
            mask[interval.start : interval.end, column] = True
        return mask

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["attack_schedule"] = [list(i) for i in self.attack_schedule]
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SimulationConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"Unknown simulation settings {sorted(unknown)}.")
        d = dict(d)
        d["attack_schedule"] = tuple(
            AttackInterval(int(s), int(e), t)
            for s, e, t in d.get("attack_schedule", ())
        )
        return cls(**d)


def _truncated_normal(
    rng: np.random.Generator, mean: float, std: float, bounds: Range, size: int
) -> np.ndarray:
    lower, _ = bounds.lower
    upper, _ = bounds.upper
    a, b = (lower - mean) / std, (upper - mean) / std
    draws = stats.truncnorm.rvs(a, b, loc=mean, scale=std, size=size, random_state=rng)
    return np.asarray(bounds.clip(draws), dtype=float)


def simulate(config: SimulationConfig) -> List[FeatureRecord]:
    """
    Generate ``config.duration_steps`` seconds of observations.

    All random draws are taken regardless of the attack schedule, so two
    configs differing only in their schedule share the same baseline traffic.
    """
    config.validate()
    n = config.duration_steps
    rng = np.random.default_rng(config.seed)

    users = np.rint(
        _truncated_normal(
            rng, config.mean_users, config.users_std, Range(gte=1, lte=50), n
        )
    ).astype(int)
    ratio = _truncated_normal(
        rng, config.mean_ratio, config.ratio_std, FEATURE_RANGES["req_user_ratio"], n
    )
    bytes_sent = _truncated_normal(
        rng, config.mean_bytes, config.bytes_std, FEATURE_RANGES["avg_bytes_sent"], n
    )
    latency = _truncated_normal(
        rng,
        config.latency_baseline,
        config.latency_std,
        FEATURE_RANGES["avg_latency"],
        n,
    )
    response = _truncated_normal(
        rng,
        config.response_baseline,
        config.response_std,
        FEATURE_RANGES["avg_response_time"],
        n,
    )
    idle = rng.random(n) < config.idle_probability

    # keep the integer request count consistent with 1 <= ratio <= 4
    requests = np.clip(np.rint(users * ratio), users, np.minimum(50, 4 * users))
    requests = requests.astype(int)
    users = np.where(idle, 0, users)
    requests = np.where(idle, 0, requests)

    mask = config.attack_mask()
    attacked = mask.any(axis=1)
    latency = np.where(
        attacked,
        FEATURE_RANGES["avg_latency"].clip(latency * config.latency_inflation),
        latency,
    )
    response = np.where(
        attacked,
        FEATURE_RANGES["avg_response_time"].clip(
            response * config.response_inflation
        ),
        response,
    )

    records = []
    for t in range(n):
        records.append(
            FeatureRecord(
                t=t,
                http_requests=int(requests[t]),
                unique_users=int(users[t]),
                req_user_ratio=request_user_ratio(int(requests[t]), int(users[t])),
                avg_bytes_sent=float(bytes_sent[t]),
                avg_latency=float(latency[t]),
                avg_response_time=float(response[t]),
                dos_flags=(bool(mask[t, 0]), bool(mask[t, 1]), bool(mask[t, 2])),
            )
        )
    logger.info(
        "Simulated %d records (%d under attack, seed=%d)",
        n,
        int(attacked.sum()),
        config.seed,
    )
    return records


def load_records(path: PathType) -> List[FeatureRecord]:
    """
    Read records from CSV. The ``t`` column is optional; when missing the
    0-based row order is used instead. The request/user ratio is recomputed
    from the counts and must match the stored one within 1e-6.
    """
    records = []
    for position, (row_number, row) in enumerate(
        RECORD_TABLE.read(path, optional=("t",))
    ):
        expected = request_user_ratio(row["http_requests"], row["unique_users"])
        if abs(row["req_user_ratio"] - expected) > LOAD_RATIO_TOLERANCE:
            raise ValidationException(
                f"row {row_number}: req_user_ratio {row['req_user_ratio']!r} does "
                f"not match http_requests/unique_users = {expected!r}."
            )
        records.append(
            FeatureRecord(
                t=row.get("t", position),
                http_requests=row["http_requests"],
                unique_users=row["unique_users"],
                req_user_ratio=expected,
                avg_bytes_sent=row["avg_bytes_sent"],
                avg_latency=row["avg_latency"],
                avg_response_time=row["avg_response_time"],
                dos_flags=(row["syn"], row["udp"], row["icmp"]),
            )
        )
    logger.info("Loaded %d records from %s", len(records), path)
    return records


def write_records(records: Iterable[FeatureRecord], path: PathType) -> None:
    RECORD_TABLE.write((r.to_row() for r in records), path)


def feature_matrix(records: Sequence[FeatureRecord]) -> np.ndarray:
    """``(T, 6)`` float matrix of the continuous features in column order."""
    return np.array(
        [
            [
                r.http_requests,
                r.unique_users,
                r.req_user_ratio,
                r.avg_bytes_sent,
                r.avg_latency,
                r.avg_response_time,
            ]
            for r in records
        ],
        dtype=float,
    ).reshape(len(records), 6)


def dos_matrix(records: Sequence[FeatureRecord]) -> np.ndarray:
    return np.array([r.dos_flags for r in records], dtype=bool).reshape(
        len(records), 3
    )
