# Copyright 2026 The FundusNet Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the fundusnet C++ core."""

import json

from ._fnet import (
    FnetError,
    Model,
    default_descriptor_json,
    evaluate,
    gradcheck,
    run_cli,
    tiny_descriptor_json,
)

__all__ = [
    "FnetError",
    "Model",
    "default_descriptor",
    "evaluate",
    "gradcheck",
    "run_cli",
    "tiny_descriptor",
]


def tiny_descriptor():
    return json.loads(tiny_descriptor_json())


def default_descriptor():
    return json.loads(default_descriptor_json())
