# Copyright (c) 2026 The `passfl` authors
#
# This file is a part of `passfl` project.
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""Energy-minimizing transceiver design for pinching-antenna and MIMO uplinks."""

from .common import OuterRecord, SolverConfig, SolveTrace
from .joint import (
    combiner_update,
    effective_channel,
    energy_per_entry,
    initial_state,
    joint_optimize,
    matched_combiner,
    optimize_mimo_baseline,
)
from .placement import (
    RelaxedTarget,
    closed_form_target,
    norm_budget,
    placement_residual,
    relaxed_objective,
    tune_pass,
)
from .power import power_update_step, project_power, tune_power
from .schedule import exhaustive_schedule, marginal_G, schedule_devices
