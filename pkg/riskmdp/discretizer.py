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
Standard (equal width) binning of feature records and the mixed-radix
numbering of the resulting discrete state space.
"""

import dataclasses
import logging
import math
from typing import Any, Dict, Iterator, List, NamedTuple, Sequence, Tuple

import numpy as np

from .exceptions import BoundsError, ConfigurationError, ParseError
from .featurestream import FeatureRecord, dos_matrix, feature_matrix
from .field import Table
from .serializer import PathType, serializer

logger = logging.getLogger(__name__)

DOS_FEATURE = "dos"
DOS_CODES = 8
# bit weights of the syn, udp and icmp flags in the DoS code
DOS_BITS = (4, 2, 1)

CONTINUOUS_FEATURES = (
    "http_requests",
    "unique_users",
    "req_user_ratio",
    "avg_bytes_sent",
    "avg_latency",
    "avg_response_time",
)

MAX_ENUMERATED_STATES = 10_000_000


@dataclasses.dataclass(frozen=True)
class FeatureBins:
    """
    Equal width bins ``[lower + k*width, lower + (k+1)*width)`` for one
    feature; the top bin is closed and absorbs anything above it, values under
    ``lower`` fall into bin 0. Categorical features only use ``count``.
    """

    name: str
    count: int
    lower: float = 0.0
    upper: float = 0.0
    width: float = 1.0
    categorical: bool = False

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigurationError(f"{self.name}: bin count must be >= 1.")
        if self.categorical:
            if self.name == DOS_FEATURE and self.count not in (2, DOS_CODES):
                raise ConfigurationError(
                    f"{DOS_FEATURE} takes 2 (attack or not) or {DOS_CODES} codes, "
                    f"got {self.count}."
                )
            return
        if self.width <= 0:
            raise ConfigurationError(f"{self.name}: bin width must be positive.")
        if self.upper <= self.lower:
            raise ConfigurationError(f"{self.name}: upper must exceed lower.")
        # tolerate representation error in widths such as 0.75
        if self.count * self.width < (self.upper - self.lower) * (1 - 1e-12):
            raise ConfigurationError(
                f"{self.name}: {self.count} bins of width {self.width} do not "
                f"cover [{self.lower}, {self.upper}]."
            )

    @property
    def half(self) -> int:
        """Number of codes in the first half of the range, ``ceil(n/2)``."""
        return math.ceil(self.count / 2)

    def codes(self, values: Any) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        raw = np.floor((values - self.lower) / self.width)
        return np.clip(raw, 0, self.count - 1).astype(np.int64)

    def code(self, value: float) -> int:
        return int(self.codes(value))

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


class BinningScheme:
    """Ordered collection of :class:`FeatureBins`, one per state feature."""

    def __init__(self, bins: Sequence[FeatureBins]):
        if not bins:
            raise ConfigurationError("A binning scheme needs at least one feature.")
        names = [b.name for b in bins]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"Duplicate feature names in {names}.")
        for b in bins:
            if b.name not in CONTINUOUS_FEATURES and b.name != DOS_FEATURE:
                raise ConfigurationError(
                    f"Unknown feature {b.name!r}, expected one of "
                    f"{CONTINUOUS_FEATURES + (DOS_FEATURE,)}."
                )
            if (b.name == DOS_FEATURE) != b.categorical:
                raise ConfigurationError(
                    f"Only {DOS_FEATURE!r} is categorical, got {b.name!r}."
                )
        self.bins: Tuple[FeatureBins, ...] = tuple(bins)

    def __len__(self) -> int:
        return len(self.bins)

    def __iter__(self) -> Iterator[FeatureBins]:
        return iter(self.bins)

    def __getitem__(self, name: str) -> FeatureBins:
        for b in self.bins:
            if b.name == name:
                return b
        raise KeyError(name)

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, BinningScheme) and other.bins == self.bins

    def __repr__(self) -> str:
        return f"BinningScheme({', '.join(f'{b.name}:{b.count}' for b in self.bins)})"

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(b.name for b in self.bins)

    @property
    def radices(self) -> Tuple[int, ...]:
        return tuple(b.count for b in self.bins)

    def to_dict(self) -> Dict[str, Any]:
        return {"features": [b.to_dict() for b in self.bins]}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "BinningScheme":
        try:
            return cls([FeatureBins(**f) for f in d["features"]])
        except (KeyError, TypeError) as e:
            raise ConfigurationError(f"Invalid binning scheme: {e}") from e


DEFAULT_SCHEME = BinningScheme(
    [
        FeatureBins("http_requests", 5, lower=0, upper=50, width=10),
        FeatureBins("unique_users", 5, lower=0, upper=50, width=10),
        FeatureBins("req_user_ratio", 4, lower=1, upper=4, width=0.75),
        FeatureBins("avg_bytes_sent", 4, lower=800, upper=1300, width=125),
        FeatureBins("avg_latency", 4, lower=100, upper=3500, width=850),
        FeatureBins("avg_response_time", 4, lower=0, upper=8000, width=2000),
        FeatureBins(DOS_FEATURE, DOS_CODES, categorical=True),
    ]
)


@dataclasses.dataclass(frozen=True)
class DiscreteState:
    codes: Tuple[int, ...]

    def index(self, scheme: BinningScheme = DEFAULT_SCHEME) -> int:
        return int(state_index(np.asarray(self.codes), scheme))

    @classmethod
    def from_index(
        cls, index: int, scheme: BinningScheme = DEFAULT_SCHEME
    ) -> "DiscreteState":
        return cls(tuple(int(c) for c in state_from_index(index, scheme)))


def dos_code(flags: Any) -> Any:
    """``4*syn + 2*udp + icmp`` for one flag triple or a ``(T, 3)`` matrix."""
    return np.asarray(flags, dtype=np.int64) @ np.asarray(DOS_BITS, dtype=np.int64)


def discretize_many(
    records: Sequence[FeatureRecord], scheme: BinningScheme = DEFAULT_SCHEME
) -> np.ndarray:
    """``(T, len(scheme))`` integer code matrix for a record sequence."""
    features = feature_matrix(records)
    codes = np.empty((len(records), len(scheme)), dtype=np.int64)
    for column, b in enumerate(scheme.bins):
        if b.categorical and b.count == DOS_CODES:
            codes[:, column] = dos_code(dos_matrix(records))
        elif b.categorical:
            codes[:, column] = dos_matrix(records).any(axis=1)
        else:
            codes[:, column] = b.codes(features[:, CONTINUOUS_FEATURES.index(b.name)])
    return codes


def discretize(
    record: FeatureRecord, scheme: BinningScheme = DEFAULT_SCHEME
) -> DiscreteState:
    codes = discretize_many([record], scheme)[0]
    return DiscreteState(tuple(int(c) for c in codes))


def state_space_size(scheme: BinningScheme = DEFAULT_SCHEME) -> int:
    return math.prod(scheme.radices)


def _check_codes(codes: np.ndarray, scheme: BinningScheme) -> None:
    radices = np.asarray(scheme.radices)
    if codes.shape[-1] != len(radices):
        raise BoundsError(
            f"Expected {len(radices)} codes per state, got {codes.shape[-1]}."
        )
    if np.any(codes < 0) or np.any(codes >= radices):
        raise BoundsError(f"Codes outside of the radices {scheme.radices}.")


def state_index(codes: Any, scheme: BinningScheme = DEFAULT_SCHEME) -> Any:
    """Mixed-radix index of one code vector or of every row of a matrix."""
    codes = np.asarray(codes, dtype=np.int64)
    _check_codes(codes, scheme)
    if codes.ndim == 1:
        return int(np.ravel_multi_index(tuple(codes), scheme.radices))
    return np.ravel_multi_index(tuple(codes.T), scheme.radices).astype(np.int64)


def state_from_index(index: Any, scheme: BinningScheme = DEFAULT_SCHEME) -> np.ndarray:
    index = np.asarray(index, dtype=np.int64)
    size = state_space_size(scheme)
    if np.any(index < 0) or np.any(index >= size):
        raise BoundsError(f"State index outside of [0, {size}).")
    return np.stack(np.unravel_index(index, scheme.radices), axis=-1).astype(np.int64)


def enumerate_states(
    scheme: BinningScheme = DEFAULT_SCHEME, max_states: int = MAX_ENUMERATED_STATES
) -> np.ndarray:
    """
    Every state of the scheme as an ``(|S|, len(scheme))`` code matrix in
    mixed-radix order, so row ``k`` is the state with index ``k``.
    """
    size = state_space_size(scheme)
    if size > max_states:
        raise ConfigurationError(
            f"State space of {size} states exceeds the enumeration limit {max_states}."
        )
    return state_from_index(np.arange(size), scheme)


class Trajectory(NamedTuple):
    t: np.ndarray
    codes: np.ndarray
    index: np.ndarray


def trajectory(
    records: Sequence[FeatureRecord], scheme: BinningScheme = DEFAULT_SCHEME
) -> Trajectory:
    codes = discretize_many(records, scheme)
    return Trajectory(
        t=np.array([r.t for r in records], dtype=np.int64),
        codes=codes,
        index=np.asarray(state_index(codes, scheme), dtype=np.int64).reshape(-1),
    )


def _trajectory_table(width: int) -> Table:
    return Table(
        [("t", "integer")]
        + [(f"c{i + 1}", "integer") for i in range(width)]
        + [("index", "integer")]
    )


def write_trajectory(traj: Trajectory, path: PathType) -> None:
    width = traj.codes.shape[1]
    rows = (
        {"t": t, "index": idx, **{f"c{i + 1}": c for i, c in enumerate(codes)}}
        for t, codes, idx in zip(traj.t, traj.codes, traj.index)
    )
    _trajectory_table(width).write(rows, path)


def load_trajectory(
    path: PathType, scheme: BinningScheme = DEFAULT_SCHEME
) -> Trajectory:
    width = len(scheme)
    t: List[int] = []
    codes: List[List[int]] = []
    index: List[int] = []
    for row_number, row in _trajectory_table(width).read(path):
        c = [row[f"c{i + 1}"] for i in range(width)]
        try:
            expected = state_index(np.asarray(c), scheme)
        except BoundsError as e:
            raise ParseError(str(e), row=row_number) from e
        if expected != row["index"]:
            raise ParseError(
                f"index {row['index']} does not match codes {c} ({expected})",
                row=row_number,
            )
        t.append(row["t"])
        codes.append(c)
        index.append(row["index"])
    return Trajectory(
        t=np.array(t, dtype=np.int64),
        codes=np.array(codes, dtype=np.int64).reshape(len(codes), width),
        index=np.array(index, dtype=np.int64),
    )


def write_scheme(scheme: BinningScheme, path: PathType) -> None:
    serializer.dump(scheme, path)


def load_scheme(path: PathType) -> BinningScheme:
    return BinningScheme.from_dict(serializer.load(path))
