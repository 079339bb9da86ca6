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

import json
import os
from typing import Any, Union

import numpy as np

from .exceptions import ValidationException
from .utils import AttrDict

PathType = Union[str, "os.PathLike[str]"]


class ArtifactJSONEncoder(json.JSONEncoder):
    def default(self, data: Any) -> Any:
        if isinstance(data, AttrDict):
            return data._d_
        if hasattr(data, "to_dict"):
            return data.to_dict()
        if isinstance(data, np.ndarray):
            return data.tolist()
        if isinstance(data, np.bool_):
            return bool(data)
        if isinstance(data, np.integer):
            return int(data)
        if isinstance(data, np.floating):
            return float(data)
        return super().default(data)


class ArtifactSerializer:
    """
    JSON (de)serializer for pipeline artifacts. Keys are sorted and separators
    fixed so that equal objects always produce byte-identical files.
    """

    def __init__(self) -> None:
        self._encoder = ArtifactJSONEncoder(
            sort_keys=True, separators=(",", ":"), allow_nan=False
        )

    def dumps(self, data: Any) -> str:
        try:
            return self._encoder.encode(data)
        except ValueError as e:
            raise ValidationException(f"Cannot serialize artifact: {e}") from e

    def loads(self, s: Union[str, bytes]) -> Any:
        try:
            return json.loads(s)
        except ValueError as e:
            raise ValidationException(f"Cannot parse artifact: {e}") from e

    def dump(self, data: Any, path: PathType) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.dumps(data))
            f.write("\n")

    def load(self, path: PathType) -> Any:
        with open(path, encoding="utf-8") as f:
            return self.loads(f.read())


serializer = ArtifactSerializer()
