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

"""Solver configuration and solve traces shared by all the marginal solvers."""

import dataclasses as _dc
import typing as _t

from ..channel import SystemParams
from ..failure import InvalidArgument


@_dc.dataclass(frozen=True)
class SolverConfig:
    outer_iters: int = 20
    placement_iters: int = 10
    power_iters: int = 50
    tolerance: float = 1e-6
    # `None` means a quarter of a wavelength
    grid_step: float | None = None
    grid_refinements: int = 2
    k_min: int = 6
    restarts: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ["outer_iters", "placement_iters", "power_iters", "k_min"]:
            if getattr(self, name) < 1:
                raise InvalidArgument("`%s` must be at least 1, got %r", name, getattr(self, name))
        if self.grid_refinements < 0 or self.restarts < 0:
            raise InvalidArgument("`grid_refinements` and `restarts` must be non-negative")
        if not self.tolerance > 0:
            raise InvalidArgument("`tolerance` must be positive, got %r", self.tolerance)
        if self.grid_step is not None and not self.grid_step > 0:
            raise InvalidArgument("`grid_step` must be positive, got %r", self.grid_step)

    def resolved_grid_step(self, params: SystemParams) -> float:
        step = params.wavelength / 4 if self.grid_step is None else self.grid_step
        if step > params.min_spacing:
            raise InvalidArgument(
                "grid step %g exceeds the minimal element spacing %g", step, params.min_spacing
            )
        return step


@_dc.dataclass
class OuterRecord:
    iteration: int
    step: str
    accepted: bool
    objective: float
    energy: float
    numerator: float
    denominator: float
    schedule: tuple[int, ...]
    residual: float | None = None


@_dc.dataclass
class SolveTrace:
    outer: list[OuterRecord] = _dc.field(default_factory=list)
    placement_residuals: list[float] = _dc.field(default_factory=list)
    dinkelbach: list[float] = _dc.field(default_factory=list)
    fallbacks: list[str] = _dc.field(default_factory=list)
    schedules: list[tuple[int, ...]] = _dc.field(default_factory=list)
    restarts: int = 0

    def accepted(self) -> list[OuterRecord]:
        return [r for r in self.outer if r.accepted]

    @property
    def energies(self) -> list[float]:
        return [r.energy for r in self.accepted()]

    def note_fallback(self, what: str, *args: _t.Any) -> None:
        self.fallbacks.append(what % args)


def test_solver_config() -> None:
    from ..channel import SPEED_OF_LIGHT

    params = SystemParams(SPEED_OF_LIGHT / 0.06, 1e-12, 1e-3)
    cfg = SolverConfig()
    assert abs(cfg.resolved_grid_step(params) - 0.015) <= 1e-15

    try:
        SolverConfig(grid_step=0.05).resolved_grid_step(params)
    except InvalidArgument:
        pass
    else:
        assert False

    for bad in [{"outer_iters": 0}, {"tolerance": 0.0}, {"k_min": 0}]:
        try:
            SolverConfig(**bad)  # type: ignore
        except InvalidArgument:
            pass
        else:
            assert False, bad


def test_trace_energies() -> None:
    trace = SolveTrace()
    trace.outer.append(OuterRecord(0, "init", True, 2.0, 4.0, 1.0, 0.5, (0, 1)))
    trace.outer.append(OuterRecord(1, "power", False, 3.0, 6.0, 1.0, 0.3, (0, 1)))
    trace.outer.append(OuterRecord(1, "placement", True, 1.0, 2.0, 1.0, 1.0, (0,)))
    trace.note_fallback("device %d: non-positive denominator", 3)
    assert trace.energies == [4.0, 2.0]
    assert trace.fallbacks == ["device 3: non-positive denominator"]
