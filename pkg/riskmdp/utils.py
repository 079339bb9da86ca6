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
from copy import copy
from typing import (
    Any,
    ClassVar,
    Dict,
    Generic,
    ItemsView,
    Iterator,
    KeysView,
    List,
    Tuple,
    Type,
    cast,
)

from typing_extensions import Self, TypeVar

from .exceptions import UnknownComponent

_ValT = TypeVar("_ValT")  # used by AttrDict


class AttrDict(Generic[_ValT]):
    """
    Dictionary with attribute access, so that ``config.abstraction.k`` and
    ``config["abstraction"]["k"]`` read the same value. Nested dictionaries
    are wrapped on access and share storage with the parent, writes through
    either spelling land in the same dictionary.
    """

    _d_: Dict[str, _ValT]

    def __init__(self, d: Dict[str, _ValT]):
        # bypass __setattr__, which writes into the dictionary
        object.__setattr__(self, "_d_", d)

    @staticmethod
    def _wrap(value: Any) -> Any:
        return AttrDict(value) if isinstance(value, dict) else value

    def _missing(self, name: str) -> AttributeError:
        return AttributeError(
            f"{self.__class__.__name__!r} has no key {name!r}, "
            f"available: {sorted(self._d_)}"
        )

    def __getattr__(self, name: str) -> Any:
        if name.startswith("__"):
            raise AttributeError(name)
        try:
            return self._wrap(self._d_[name])
        except KeyError:
            raise self._missing(name)

    def __setattr__(self, name: str, value: _ValT) -> None:
        if name.startswith("__") or (
            hasattr(self.__class__, name) and name not in self._d_
        ):
            object.__setattr__(self, name, value)
        else:
            self._d_[name] = value

    def __getitem__(self, key: str) -> Any:
        return self._wrap(self._d_[key])

    def __setitem__(self, key: str, value: _ValT) -> None:
        self._d_[key] = value

    def __delitem__(self, key: str) -> None:
        del self._d_[key]

    def __contains__(self, key: object) -> bool:
        return key in self._d_

    def __iter__(self) -> Iterator[str]:
        return iter(self._d_)

    def __len__(self) -> int:
        return len(self._d_)

    def __dir__(self) -> List[str]:
        return sorted(self._d_)

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, AttrDict):
            other = other._d_
        return bool(self._d_ == other)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self._d_!r})"

    def __getstate__(self) -> Tuple[Dict[str, _ValT]]:
        return (self._d_,)

    def __setstate__(self, state: Tuple[Dict[str, _ValT]]) -> None:
        object.__setattr__(self, "_d_", state[0])

    def get(self, key: str, default: Any = None) -> Any:
        return self._wrap(self._d_.get(key, default))

    def keys(self) -> KeysView[str]:
        return self._d_.keys()

    def items(self) -> ItemsView[str, _ValT]:
        return self._d_.items()

    def to_dict(self, recursive: bool = False) -> Dict[str, _ValT]:
        if recursive:
            return cast(Dict[str, _ValT], recursive_to_dict(self._d_))
        return self._d_


class RegistryMeta(type):
    """
    Metaclass that builds a registry of all concrete subclasses of a component
    family (all the solvers for ``Solver``, all clustering algorithms for
    ``Clusterer``, ...).

    A family base declares ``_type_name`` and ``_type_shortcut`` and leaves
    ``name`` empty; every subclass with a non-empty ``name`` is registered
    under it and can be constructed by that name through the shortcut.
    """

    name: str
    _classes: Dict[str, type]
    _type_name: str
    _types: ClassVar[Dict[str, Any]] = {}

    def __init__(cls, name: str, bases: Tuple[type, ...], attrs: Dict[str, Any]):
        super().__init__(name, bases, attrs)
        # Component itself has no family
        if not hasattr(cls, "_type_shortcut"):
            return
        if not cls.name:
            cls._types[cls._type_name] = cls._type_shortcut
            if not hasattr(cls, "_classes"):
                cls._classes = {}
            return
        for key in (cls.name, *attrs.get("aliases", ())):
            cls._classes.setdefault(key, cls)


class Component(metaclass=RegistryMeta):
    """
    Base class for named, parametrised building blocks. Parameters not listed
    in ``_defaults`` are rejected; the others are readable as attributes.
    Components compare by value and serialize to ``{name: params}``.
    """

    name: ClassVar[str] = ""
    aliases: ClassVar[Tuple[str, ...]] = ()
    _defaults: ClassVar[Dict[str, Any]] = {}

    @classmethod
    def get_component_class(cls: Type[Self], name: str) -> Type[Self]:
        try:
            return cast(Type[Self], cls._classes[name.lower()])
        except KeyError:
            raise UnknownComponent(
                f"{cls._type_name} `{name}` does not exist, "
                f"choose from {sorted(cls._classes)}."
            )

    def __init__(self, **params: Any) -> None:
        unknown = set(params) - set(self._defaults)
        if unknown:
            raise UnknownComponent(
                f"{self.__class__.__name__} got unexpected parameters "
                f"{sorted(unknown)}."
            )
        self._params: Dict[str, Any] = {**self._defaults, **params}

    def __repr__(self) -> str:
        params = ", ".join(f"{n}={v!r}" for (n, v) in sorted(self._params.items()))
        return f"{self.__class__.__name__}({params})"

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, self.__class__) and other.to_dict() == self.to_dict()

    def __getattr__(self, name: str) -> Any:
        params = self.__dict__.get("_params", {})
        if name.startswith("_") or name not in params:
            raise AttributeError(
                f"{self.__class__.__name__!r} object has no attribute {name!r}"
            )
        return params[name]

    def to_dict(self) -> Dict[str, Any]:
        return {self.name: recursive_to_dict(self._params)}

    def _clone(self, **params: Any) -> Self:
        c = copy(self)
        c._params = {**self._params, **params}
        return c


_MAPPINGS = (AttrDict, collections.abc.Mapping)


def merge(data: Any, new_data: Any, raise_on_conflict: bool = False) -> None:
    """
    Deep-merge ``new_data`` into ``data`` in place. Nested mappings are
    merged key by key, any other value replaces the existing one unless
    ``raise_on_conflict`` is set and the two differ.
    """
    if not (isinstance(data, _MAPPINGS) and isinstance(new_data, _MAPPINGS)):
        raise ValueError(
            f"Can only merge two mappings, got {data!r} and {new_data!r}."
        )

    for key, value in new_data.items():
        current = data[key] if key in data else None
        if isinstance(current, _MAPPINGS) and isinstance(value, _MAPPINGS):
            merge(current, value, raise_on_conflict)
        elif raise_on_conflict and key in data and current != value:
            raise ValueError(
                f"Conflicting values for key {key!r}: {current!r} and {value!r}."
            )
        else:
            data[key] = value


def recursive_to_dict(data: Any) -> Any:
    """
    Plain JSON-like copy of ``data``: ``AttrDict`` and objects with a
    ``to_dict()`` are unwrapped, lists, tuples and dicts are traversed.
    """
    if isinstance(data, AttrDict):
        data = data._d_
    elif hasattr(data, "to_dict") and not isinstance(data, type):
        data = data.to_dict()
    if isinstance(data, (list, tuple)):
        return type(data)(recursive_to_dict(inner) for inner in data)
    if isinstance(data, dict):
        return {key: recursive_to_dict(val) for key, val in data.items()}
    return data
