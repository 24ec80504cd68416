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

"""Parameter sweeps over one axis, several backends and repeated seeds."""

import concurrent.futures as _cf
import dataclasses as _dc
import logging as _logging
import math as _math
import typing as _t

from sortedcontainers import SortedKeyList

from ..failure import DegenerateFailure, InfeasibleFailure, InvalidArgument, ParsingFailure
from ..fl.sim import parse_backend
from ..parsing import Parser
from .config import SWEEP_AXES, ExperimentConfig
from .experiment import run_experiment

_logger = _logging.getLogger("passfl.harness.sweep")


@_dc.dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    repetitions: int = 3

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise InvalidArgument(
                "unknown sweep axis `%s`, expected one of %s", self.axis, SWEEP_AXES
            )
        if len(self.values) == 0:
            raise InvalidArgument("empty sweep")
        if self.repetitions < 1:
            raise InvalidArgument("need at least one repetition, got %d", self.repetitions)


def parse_sweep_spec(text: str, repetitions: int = 3) -> SweepSpec:
    """Parse `AXIS=v1,v2,...`."""
    p = Parser(text)
    try:
        axis = p.name()
        p.string("=")
        values = p.separated(p.number, ",")
        p.eof()
    except ParsingFailure as exc:
        raise exc.elaborate("expected `AXIS=v1,v2,...`")
    return SweepSpec(axis, tuple(values), repetitions)


@_dc.dataclass(frozen=True)
class CellResult:
    value_index: int
    backend: str
    repetition: int
    accuracy: float
    energy: float
    infeasible: bool


@_dc.dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    backend: str
    # feasible repetitions the means are taken over
    repetitions: int
    accuracy: float
    energy: float
    infeasible: int


def run_cell(
    config: ExperimentConfig, spec: SweepSpec, value_index: int, backend: str, repetition: int
) -> CellResult:
    cell = config.with_axis(spec.axis, spec.values[value_index])
    # same seed for every value and backend of a repetition
    seed = config.scenario.seed + repetition
    try:
        reports = run_experiment(cell, seed, backend)
    except (InfeasibleFailure, DegenerateFailure) as exc:
        _logger.warning(
            "%s = %g, %s backend, repetition %d is infeasible: %s",
            spec.axis,
            spec.values[value_index],
            backend,
            repetition,
            exc,
        )
        return CellResult(value_index, backend, repetition, _math.nan, _math.nan, True)
    accuracy = reports[-1].accuracy if reports else _math.nan
    energy = sum(r.energy for r in reports) / len(reports) if reports else 0.0
    return CellResult(value_index, backend, repetition, accuracy, energy, False)


def aggregate_cells(
    spec: SweepSpec, backends: _t.Sequence[str], cells: _t.Iterable[CellResult]
) -> list[SweepRow]:
    """Mean over feasible repetitions, one row per value and backend, in sweep order."""
    order = {b: i for i, b in enumerate(backends)}
    ordered: SortedKeyList = SortedKeyList(
        cells, key=lambda c: (c.value_index, order[c.backend], c.repetition)
    )
    rows = []
    for vi, value in enumerate(spec.values):
        for backend in backends:
            group = list(
                ordered.irange_key((vi, order[backend], 0), (vi, order[backend], spec.repetitions))
            )
            ok = [c for c in group if not c.infeasible]
            if ok:
                accuracy = sum(c.accuracy for c in ok) / len(ok)
                energy = sum(c.energy for c in ok) / len(ok)
            else:
                accuracy = energy = _math.nan
            rows.append(
                SweepRow(spec.axis, value, backend, len(ok), accuracy, energy, len(group) - len(ok))
            )
    return rows


def run_sweep(
    config: ExperimentConfig,
    spec: SweepSpec,
    backends: _t.Sequence[str] = ("pass", "mimo"),
    jobs: int = 1,
) -> list[SweepRow]:
    for b in backends:
        parse_backend(b)
    if len(set(backends)) != len(backends):
        raise InvalidArgument("repeated backend in %s", list(backends))
    if jobs < 1:
        raise InvalidArgument("need at least one job, got %d", jobs)

    tasks = [
        (vi, backend, rep)
        for vi in range(len(spec.values))
        for backend in backends
        for rep in range(spec.repetitions)
    ]
    _logger.info("sweeping %s over %d cells with %d job(s)", spec.axis, len(tasks), jobs)
    if jobs == 1:
        cells = [run_cell(config, spec, vi, b, rep) for vi, b, rep in tasks]
    else:
        with _cf.ProcessPoolExecutor(jobs) as pool:
            futures = [pool.submit(run_cell, config, spec, vi, b, rep) for vi, b, rep in tasks]
            cells = [f.result() for f in futures]
    return aggregate_cells(spec, backends, cells)


def test_parse_sweep_spec() -> None:
    spec = parse_sweep_spec("D=10,50, 400")
    assert spec == SweepSpec("D", (10.0, 50.0, 400.0), 3)
    assert parse_sweep_spec("P_dBm=-20,0,20", 1).values == (-20.0, 0.0, 20.0)

    for bad in ["D=", "D 10", "K=1,2", "D=1;2", ""]:
        try:
            parse_sweep_spec(bad)
        except (ParsingFailure, InvalidArgument):
            pass
        else:
            assert False, bad


def test_aggregate_cells() -> None:
    spec = SweepSpec("D", (10.0, 50.0), 2)
    cells = [
        CellResult(1, "mimo", 1, 30.0, 2.0, False),
        CellResult(0, "pass", 0, 80.0, 1.0, False),
        CellResult(1, "pass", 0, _math.nan, _math.nan, True),
        CellResult(0, "mimo", 0, 20.0, 4.0, False),
        CellResult(0, "pass", 1, 90.0, 3.0, False),
        CellResult(1, "mimo", 0, 10.0, 4.0, False),
        CellResult(0, "mimo", 1, 40.0, 2.0, False),
        CellResult(1, "pass", 1, _math.nan, _math.nan, True),
    ]
    rows = aggregate_cells(spec, ["pass", "mimo"], cells)
    assert [(r.value, r.backend) for r in rows] == [
        (10.0, "pass"),
        (10.0, "mimo"),
        (50.0, "pass"),
        (50.0, "mimo"),
    ]
    assert rows[0] == SweepRow("D", 10.0, "pass", 2, 85.0, 2.0, 0)
    assert rows[1].accuracy == 30.0 and rows[3].energy == 3.0
    assert rows[2].infeasible == 2 and rows[2].repetitions == 0 and _math.isnan(rows[2].accuracy)


def test_single_value_sweep_is_plain_run() -> None:
    from .experiment import _small_config

    cfg = _small_config()
    spec = SweepSpec("D", (20.0,), 1)
    rows = run_sweep(cfg, spec, ["ideal"])
    plain = run_experiment(cfg, cfg.scenario.seed, "ideal")
    assert len(rows) == 1 and rows[0].accuracy == plain[-1].accuracy


def test_sweep_sized_mimo_backends() -> None:
    from .experiment import _small_config

    cfg = _small_config()
    spec = SweepSpec("D", (20.0,), 1)
    rows = run_sweep(cfg, spec, ["mimo:1", "mimo:4"])
    assert [r.backend for r in rows] == ["mimo:1", "mimo:4"]
    plain = run_experiment(cfg, cfg.scenario.seed, "mimo")
    assert rows[1].accuracy == plain[-1].accuracy

    for bad in [["mimo:0"], ["pass", "pass"]]:
        try:
            run_sweep(cfg, spec, bad)
        except InvalidArgument:
            pass
        else:
            assert False, bad
