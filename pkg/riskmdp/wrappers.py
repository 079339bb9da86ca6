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

import operator
from typing import Any, Callable, ClassVar, Dict, Literal, Mapping, Optional, Tuple

import numpy as np
from typing_extensions import TypeAlias

from .utils import AttrDict

ComparisonOperators: TypeAlias = Literal["lt", "lte", "gt", "gte"]

__all__ = ["Range"]


class Range(AttrDict[float]):
    """
    Numeric interval described with ``gt``/``gte``/``lt``/``lte`` bounds::

        Range(gte=0, lte=50)      # [0, 50]
        Range(gte=100, lt=3500)   # [100, 3500)

    Supports membership tests for scalars and numpy arrays and clipping of
    values into closed ranges.
    """

    OPS: ClassVar[Mapping[ComparisonOperators, Callable[[Any, Any], Any]]] = {
        "lt": operator.lt,
        "lte": operator.le,
        "gt": operator.gt,
        "gte": operator.ge,
    }

    def __init__(self, d: Optional[Dict[str, float]] = None, /, **kwargs: float):
        if d is not None and (kwargs or not isinstance(d, dict)):
            raise ValueError(
                "Range accepts a single dictionary or a set of keyword arguments."
            )
        data = kwargs if d is None else d

        for k in data:
            if k not in self.OPS:
                raise ValueError(f"Range received an unknown operator {k!r}")

        if "gt" in data and "gte" in data:
            raise ValueError("You cannot specify both gt and gte for Range.")

        if "lt" in data and "lte" in data:
            raise ValueError("You cannot specify both lt and lte for Range.")

        lower, _ = self._bound(data, "gt", "gte")
        upper, _ = self._bound(data, "lt", "lte")
        if lower is not None and upper is not None and lower > upper:
            raise ValueError(f"Range lower bound {lower} exceeds upper bound {upper}.")

        super().__init__(dict(data))

    @staticmethod
    def _bound(
        data: Mapping[str, float], strict: str, inclusive: str
    ) -> Tuple[Optional[float], bool]:
        if strict in data:
            return data[strict], False
        if inclusive in data:
            return data[inclusive], True
        return None, False

    def __repr__(self) -> str:
        return "Range(%s)" % ", ".join("%s=%r" % op for op in self._d_.items())

    def __contains__(self, item: object) -> bool:
        if isinstance(item, str):
            return super().__contains__(item)
        try:
            return bool(np.all(self.contains(item)))
        except TypeError:
            return False

    def contains(self, values: Any) -> Any:
        """Element-wise membership for scalars or arrays."""
        result = np.ones(np.shape(values), dtype=bool)
        for op, bound in self._d_.items():
            result &= self.OPS[op](values, bound)  # type: ignore[index]
        return result

    def clip(self, values: Any) -> Any:
        """Clip into the range; only meaningful for inclusive bounds."""
        lower, _ = self.lower
        upper, _ = self.upper
        return np.clip(values, lower, upper)

    @property
    def upper(self) -> Tuple[Optional[float], bool]:
        return self._bound(self._d_, "lt", "lte")

    @property
    def lower(self) -> Tuple[Optional[float], bool]:
        return self._bound(self._d_, "gt", "gte")
