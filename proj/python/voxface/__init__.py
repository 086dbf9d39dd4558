# Copyright 2026 The voxface Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Voice-to-face anthropometric estimation."""

from ._core import (
    AmDefinition,
    DegenerateMeasurementError,
    Error,
    FormatError,
    ShapeBasis,
    __version__,
    aggregate,
    build_basis,
    ci_upper,
    compute_all_ams,
    compute_am,
    compute_am_gradient,
    default_am_definitions,
    fit_shape,
    flatten,
    generate_synthetic,
    log_mel,
    loss_plain,
    loss_uncertainty,
    run_stage,
    stage_names,
    student_quantile,
)


def run_pipeline(settings, stages=None):
    """Runs the given stages (default: all, in order)."""
    for stage in stages or stage_names():
        run_stage(stage, settings)
