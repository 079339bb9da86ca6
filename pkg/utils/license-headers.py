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
Checks that every Python source file starts with the project license
header, optionally after a shebang or encoding line.

    python utils/license-headers.py check riskmdp/ tests/
    python utils/license-headers.py fix riskmdp/ tests/
"""

import argparse
import os
import sys
from typing import Iterable, Iterator, List

PREAMBLE = ("#!/usr/bin/env python\n", "# -*- coding: utf-8 -*-\n")
HEADER = """\
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
HEADER_LINES = HEADER.splitlines(keepends=True)


def python_files(sources: Iterable[str]) -> Iterator[str]:
    for source in sources:
        if os.path.isfile(source):
            if source.endswith(".py"):
                yield source
            continue
        for root, _, filenames in os.walk(source):
            for filename in sorted(filenames):
                if filename.endswith(".py"):
                    yield os.path.join(root, filename)


def _split(lines: List[str]) -> int:
    """Number of leading preamble lines."""
    i = 0
    while i < len(lines) and lines[i] in PREAMBLE:
        i += 1
    return i


def has_header(path: str) -> bool:
    with open(path, encoding="utf-8") as f:
        lines = f.readlines()
    start = _split(lines)
    if start == len(lines):
        # empty modules such as tests/__init__.py
        return True
    return lines[start : start + len(HEADER_LINES)] == HEADER_LINES


def add_header(path: str) -> None:
    with open(path, encoding="utf-8") as f:
        lines = f.readlines()
    start = _split(lines)
    with open(path, "w", encoding="utf-8") as f:
        f.write("".join(lines[:start] + HEADER_LINES + lines[start:]))
    print(f"Fixed {os.path.relpath(path)}")


def main(argv: List[str]) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("mode", choices=("check", "fix"))
    parser.add_argument("sources", nargs="+")
    args = parser.parse_args(argv)

    missing = [p for p in python_files(args.sources) if not has_header(p)]
    if args.mode == "fix":
        for path in missing:
            add_header(path)
        return 0
    if missing:
        print("No license header found in:")
        for path in missing:
            print(f" - {os.path.relpath(path)}")
        return 1
    print("All files had license header")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
