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

import datetime
import os
import sys

sys.path.insert(0, os.path.abspath(".."))

import riskmdp  # noqa: E402

extensions = ["sphinx.ext.autodoc", "sphinx.ext.doctest"]

autoclass_content = "both"

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

project = "riskmdp"
copyright = "%d, riskmdp authors" % datetime.datetime.now().year

version = riskmdp.__versionstr__
release = version

exclude_patterns = ["_build"]

pygments_style = "sphinx"

html_theme = "sphinx_rtd_theme"

htmlhelp_basename = "riskmdpdoc"

man_pages = [
    ("index", "riskmdp", "riskmdp Documentation", ["riskmdp authors"], 1),
]
