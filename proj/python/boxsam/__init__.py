# Copyright 2026 The BoxSAM-CPP Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python access to the boxsam C++ core."""

import json as _json

from ._core import (  # noqa: F401
    BoxsamError,
    boxes_from_mask,
    cli,
    connected_components,
    count_boxes,
    dice_iou,
    e_measure,
    f_adaptive,
    mae,
    redundancy_process,
    s_measure,
    weighted_bce,
    weighted_iou,
)
from . import _core


def synth_generate(out_dir, **config):
    """Writes a synthetic dataset and returns the number of images."""
    return _core.synth_generate(_json.dumps(config), str(out_dir))


def run_boxsam(config, base_dir=""):
    """Runs the full pipeline from a config dict; returns the number of RPS reports."""
    return _core.run_boxsam(_json.dumps(config), str(base_dir))


__version__ = "0.1.0"
