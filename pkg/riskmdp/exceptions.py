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

from typing import Optional


class RiskMdpException(Exception):
    pass


class ConfigurationError(ValueError, RiskMdpException):
    pass


class UnknownComponent(ConfigurationError):
    pass


class ValidationException(ValueError, RiskMdpException):
    pass


class ParseError(ValidationException):
    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class PreconditionError(RiskMdpException):
    pass


class BoundsError(IndexError, RiskMdpException):
    pass


class ModelError(RiskMdpException):
    pass


class NumericError(ArithmeticError, RiskMdpException):
    pass


class StageError(RiskMdpException):
    """
    Raised by the pipeline when one of its stages fails. The original
    exception is available as ``cause`` (and ``__cause__``).
    """

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
