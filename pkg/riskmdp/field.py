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

import collections.abc
import csv
import math
from copy import deepcopy
from typing import (
    Any,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

from .exceptions import ParseError, ValidationException
from .serializer import PathType
from .utils import Component
from .wrappers import Range


def construct_field(
    name_or_field: Union[str, "Field", Mapping[str, Any]],
    **params: Any,
) -> "Field":
    # {"type": "float", "range": {"gte": 0}}
    if isinstance(name_or_field, collections.abc.Mapping):
        if params:
            raise ValueError(
                "construct_field() cannot accept parameters when passing in a dict."
            )
        params = deepcopy(dict(name_or_field))
        if "type" not in params:
            raise ValueError('construct_field() needs to have a "type" key.')
        name = params.pop("type")
        return Field.get_component_class(name)(**params)

    # Float()
    if isinstance(name_or_field, Field):
        if params:
            raise ValueError(
                "construct_field() cannot accept parameters "
                "when passing in a construct_field object."
            )
        return name_or_field

    # "float", range=Range(gte=0)
    return Field.get_component_class(name_or_field)(**params)


class Field(Component):
    """
    A typed CSV column. ``deserialize`` turns the raw cell text into a Python
    value, ``serialize`` does the reverse and ``clean`` deserializes and
    validates in one go.
    """

    _type_name = "field"
    _type_shortcut = staticmethod(construct_field)
    _defaults = {"required": True, "range": None}

    def _serialize(self, data: Any) -> str:
        return str(data)

    def _deserialize(self, data: str) -> Any:
        return data

    def serialize(self, data: Any) -> str:
        if data is None:
            return ""
        return self._serialize(data)

    def deserialize(self, data: Optional[str]) -> Any:
        if data is None:
            return None
        data = data.strip()
        if data == "":
            return None
        return self._deserialize(data)

    def clean(self, data: Optional[str]) -> Any:
        value = self.deserialize(data)
        if value is None:
            if self.required:
                raise ValidationException("Value required for this field.")
            return None
        bounds = self.range
        if bounds is not None and not isinstance(bounds, Range):
            bounds = Range(bounds)
        if bounds is not None and value not in bounds:
            raise ValidationException(f"Value {value!r} outside of {self.range!r}.")
        return value

    def to_dict(self) -> Dict[str, Any]:
        d = dict(self._params)
        d["type"] = self.name
        return d


class Integer(Field):
    name = "integer"

    def _deserialize(self, data: str) -> int:
        try:
            value = float(data)
        except ValueError:
            raise ValidationException(f"Could not parse {data!r} as an integer.")
        if not value.is_integer():
            raise ValidationException(f"Value {data!r} is not an integer.")
        return int(value)

    def _serialize(self, data: Any) -> str:
        return str(int(data))


class Float(Field):
    name = "float"

    def _deserialize(self, data: str) -> float:
        try:
            value = float(data)
        except ValueError:
            raise ValidationException(f"Could not parse {data!r} as a number.")
        if not math.isfinite(value):
            raise ValidationException(f"Value {data!r} is not finite.")
        return value

    def _serialize(self, data: Any) -> str:
        return repr(float(data))


class Boolean(Field):
    """Booleans are written as ``0``/``1``; ``true``/``false`` are accepted."""

    name = "boolean"
    _truthy = ("1", "true", "t", "yes")
    _falsy = ("0", "false", "f", "no")

    def _deserialize(self, data: str) -> bool:
        lowered = data.lower()
        if lowered in self._truthy:
            return True
        if lowered in self._falsy:
            return False
        raise ValidationException(f"Could not parse {data!r} as a boolean.")

    def _serialize(self, data: Any) -> str:
        return "1" if data else "0"


class Keyword(Field):
    name = "keyword"


class Table:
    """
    An ordered set of named ``Field`` columns, used to read and write the CSV
    artifacts of the pipeline.
    """

    def __init__(self, columns: Sequence[Tuple[str, Union[str, Field]]]):
        self.columns: Dict[str, Field] = {
            name: construct_field(field) for name, field in columns
        }

    @property
    def header(self) -> List[str]:
        return list(self.columns)

    def format_row(self, row: Mapping[str, Any]) -> List[str]:
        return [field.serialize(row.get(name)) for name, field in self.columns.items()]

    def write(self, rows: Iterable[Mapping[str, Any]], path: PathType) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.header)
            for row in rows:
                writer.writerow(self.format_row(row))

    def read(
        self, path: PathType, optional: Iterable[str] = ()
    ) -> Iterator[Tuple[int, Dict[str, Any]]]:
        """
        Yield ``(row_number, values)`` for every data row. Row numbers are
        1-based and count the header, so they match what an editor shows.
        Columns listed in ``optional`` may be missing from the header.
        """
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            try:
                yield from self._parse(reader, set(optional))
            except UnicodeDecodeError as e:
                raise ParseError(f"not UTF-8 text: {e}", row=reader.line_num + 1)
            except csv.Error as e:
                raise ParseError(f"malformed CSV: {e}", row=max(reader.line_num, 1))

    def _parse(
        self, reader: Iterator[List[str]], optional: Set[str]
    ) -> Iterator[Tuple[int, Dict[str, Any]]]:
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("file is empty, expected a header", row=1)

        missing = [c for c in self.columns if c not in header and c not in optional]
        if missing:
            raise ParseError(f"missing columns {missing}", row=1)
        unknown = [h for h in header if h not in self.columns]
        if unknown:
            raise ParseError(f"unexpected columns {unknown}", row=1)

        for row_number, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise ParseError(
                    f"expected {len(header)} values, got {len(cells)}",
                    row=row_number,
                )
            values: Dict[str, Any] = {}
            for name, cell in zip(header, cells):
                try:
                    values[name] = self.columns[name].clean(cell)
                except ValidationException as e:
                    raise ParseError(f"column {name!r}: {e}", row=row_number)
            yield row_number, values
