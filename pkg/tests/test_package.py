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

import riskmdp


def test__all__is_sorted() -> None:
    assert riskmdp.__all__ == sorted(riskmdp.__all__)


def test__all__names_exist() -> None:
    for name in riskmdp.__all__:
        assert hasattr(riskmdp, name), name


def test_version() -> None:
    assert riskmdp.__versionstr__ == ".".join(map(str, riskmdp.VERSION))
