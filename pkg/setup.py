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

from os.path import dirname, join

from setuptools import find_packages, setup

VERSION = (1, 0, 0)
__version__ = VERSION
__versionstr__ = ".".join(map(str, VERSION))

f = open(join(dirname(__file__), "README.rst"))
long_description = f.read().strip()
f.close()

install_requires = [
    "numpy>=1.22",
    "scipy>=1.8",
    "typing-extensions",
]

develop_requires = [
    "pytest",
    "pytest-cov",
    "coverage",
    # Override Read the Docs default (sphinx<2 and sphinx-rtd-theme<0.5)
    "sphinx>2",
    "sphinx-rtd-theme>0.5",
    # typing support
    "mypy",
    "pyright",
]

setup(
    name="riskmdp",
    description="Risky state prediction for cloud subsystems with abstracted MDPs",
    license="Apache-2.0",
    long_description=long_description,
    long_description_content_type="text/x-rst",
    version=__versionstr__,
    author="riskmdp authors",
    packages=find_packages(where=".", exclude=("tests*",)),
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 4 - Beta",
        "License :: OSI Approved :: Apache Software License",
        "Intended Audience :: Science/Research",
        "Intended Audience :: System Administrators",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: System :: Monitoring",
    ],
    install_requires=install_requires,
    extras_require={"develop": develop_requires},
    entry_points={"console_scripts": ["riskmdp = riskmdp.cli:main"]},
)
