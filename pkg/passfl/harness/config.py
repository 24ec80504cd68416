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

"""Experiment configuration: a validated tree of blocks loaded from TOML or JSON."""

import json as _json
import logging as _logging
import math as _math
import os as _os
import tomllib as _tomllib
import typing as _t

import pydantic as _pd

from ..channel import SystemParams
from ..failure import ConfigFailure, InvalidArgument
from ..fl.sim import TrainingConfig
from ..optimizer import SolverConfig

_logger = _logging.getLogger("passfl.harness.config")

SWEEP_AXES = ["D", "P_dBm", "M", "N", "sigma2_dBm"]


def dbm_to_watts(dbm: float) -> float:
    return float(10 ** ((dbm - 30) / 10))


# plain SGD step sizes that converge within a few rounds
DEFAULT_LR = {"mlp": 0.05, "cnn": 0.01, "logistic": 0.05}


class _Block(_pd.BaseModel):
    model_config = _pd.ConfigDict(extra="forbid", frozen=True)


class ScenarioBlock(_Block):
    devices: int = _pd.Field(8, ge=1)
    k_min: int = _pd.Field(6, ge=1)
    # edge of the square region, meters
    edge: float = _pd.Field(50.0, gt=0)
    altitude: float = _pd.Field(5.0, gt=0)
    elements: int = _pd.Field(32, ge=1)
    # waveguide length, `None` means the region edge
    length: float | None = _pd.Field(None, gt=0)
    seed: int = _pd.Field(0, ge=0)

    @property
    def waveguide_length(self) -> float:
        return self.edge if self.length is None else self.length


class PhysicsBlock(_Block):
    carrier_frequency: float = _pd.Field(5e9, gt=0)
    noise_dbm: float = -90.0
    power_dbm: float = 0.0
    # `0` means half a wavelength
    min_spacing: float = _pd.Field(0.0, ge=0)
    reflective_index: float = _pd.Field(1.4, ge=0)
    bandwidth: float = _pd.Field(1e6, gt=0)
    resolution: float = _pd.Field(32.0, gt=0)

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def power_cap(self) -> float:
        return dbm_to_watts(self.power_dbm)


class SolverBlock(_Block):
    outer_iters: int = _pd.Field(20, ge=1)
    placement_iters: int = _pd.Field(10, ge=1)
    power_iters: int = _pd.Field(50, ge=1)
    tolerance: float = _pd.Field(1e-6, gt=0)
    grid_step: float | None = _pd.Field(None, gt=0)
    grid_refinements: int = _pd.Field(2, ge=0)
    restarts: int = _pd.Field(3, ge=0)


class FLBlock(_Block):
    architecture: _t.Literal["mlp", "cnn", "logistic"] = "mlp"
    rounds: int = _pd.Field(20, ge=0)
    epochs: int = _pd.Field(2, ge=0)
    # `None` picks the default of the architecture, see `DEFAULT_LR`
    lr: float | None = _pd.Field(None, ge=0)
    batch_size: int = _pd.Field(64, ge=1)
    # "synthetic" or a directory with MNIST IDX files
    dataset: str = "synthetic"
    backend: _t.Literal["pass", "mimo", "ideal"] = "pass"
    antennas: int = _pd.Field(32, ge=1)
    delta_mode: bool = False
    resolve_each_round: bool = False
    workers: int = _pd.Field(1, ge=1)
    repetitions: int = _pd.Field(3, ge=1)


class OutputBlock(_Block):
    directory: str = "results"
    formats: list[_t.Literal["csv", "json"]] = ["csv", "json"]


class ExperimentConfig(_Block):
    scenario: ScenarioBlock = ScenarioBlock()
    physics: PhysicsBlock = PhysicsBlock()
    solver: SolverBlock = SolverBlock()
    fl: FLBlock = FLBlock()
    output: OutputBlock = OutputBlock()

    @_pd.model_validator(mode="after")
    def _check_k_min(self) -> "ExperimentConfig":
        if self.scenario.k_min > self.scenario.devices:
            raise ValueError(
                f"k_min = {self.scenario.k_min} exceeds the device count {self.scenario.devices}"
            )
        return self

    def system_params(self) -> SystemParams:
        p = self.physics
        return SystemParams(
            p.carrier_frequency,
            p.noise_power,
            p.power_cap,
            p.bandwidth,
            p.resolution,
            p.reflective_index,
            p.min_spacing,
        )

    def solver_config(self, seed: int | None = None) -> SolverConfig:
        s = self.solver
        return SolverConfig(
            s.outer_iters,
            s.placement_iters,
            s.power_iters,
            s.tolerance,
            s.grid_step,
            s.grid_refinements,
            self.scenario.k_min,
            s.restarts,
            self.scenario.seed if seed is None else seed,
        )

    def training_config(
        self, seed: int | None = None, backend: str | None = None
    ) -> TrainingConfig:
        f = self.fl
        return TrainingConfig(
            f.architecture,
            f.rounds,
            f.epochs,
            DEFAULT_LR[f.architecture] if f.lr is None else f.lr,
            f.batch_size,
            f.backend if backend is None else backend,
            f.delta_mode,
            f.resolve_each_round,
            f.workers,
            self.scenario.seed if seed is None else seed,
        )

    def updated(self, block: str, **changes: _t.Any) -> "ExperimentConfig":
        """A re-validated copy with some fields of one block replaced."""
        data = self.model_dump(mode="json")
        data[block].update(changes)
        return validate_config(data)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.updated("scenario", seed=seed)

    def with_axis(self, axis: str, value: float) -> "ExperimentConfig":
        """Set a sweep axis value."""
        if axis in ("M", "N"):
            if value != _math.floor(value):
                raise InvalidArgument("axis `%s` takes integers, got %r", axis, value)
        if axis == "D":
            return self.updated("scenario", edge=value)
        if axis == "N":
            return self.updated("scenario", elements=int(value))
        if axis == "M":
            return self.updated("fl", antennas=int(value))
        if axis == "P_dBm":
            return self.updated("physics", power_dbm=value)
        if axis == "sigma2_dBm":
            return self.updated("physics", noise_dbm=value)
        raise InvalidArgument("unknown sweep axis `%s`, expected one of %s", axis, SWEEP_AXES)


def validate_config(data: _t.Any, source: str = "<config>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except _pd.ValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(x) for x in err["loc"]) or "<root>"
        raise ConfigFailure("invalid `%s` in %s: %s", key, source, err["msg"]) from exc


def load_config(path: str | _os.PathLike[str]) -> ExperimentConfig:
    """Load a TOML or JSON config, or the config recorded in a run manifest."""
    source = _os.fspath(path)
    try:
        with open(source, "rb") as f:
            if source.endswith(".toml"):
                data: _t.Any = _tomllib.load(f)
            else:
                data = _json.load(f)
    except OSError as exc:
        raise ConfigFailure("cannot read %s: %s", source, exc.strerror) from exc
    except (_tomllib.TOMLDecodeError, ValueError) as exc:
        raise ConfigFailure("cannot parse %s: %s", source, str(exc)) from exc

    if isinstance(data, dict) and "manifest_version" in data:
        data = data.get("config")
    config = validate_config(data, source)
    _logger.debug("loaded config from %s", source)
    return config


def test_dbm_to_watts() -> None:
    assert abs(dbm_to_watts(-90) - 1e-12) <= 1e-15 * 1e-12
    assert abs(dbm_to_watts(0) - 1e-3) <= 1e-15 * 1e-3
    assert abs(dbm_to_watts(20) - 0.1) <= 1e-15 * 0.1


def test_defaults() -> None:
    cfg = validate_config({"scenario": {"devices": 10}})
    assert cfg.scenario.k_min == 6 and cfg.scenario.elements == 32
    assert cfg.scenario.waveguide_length == 50.0
    params = cfg.system_params()
    assert abs(params.wavelength - 0.0599584916) <= 1e-9
    assert params.noise_power == dbm_to_watts(-90)
    solver = cfg.solver_config()
    assert solver.k_min == 6 and solver.seed == 0
    assert cfg.training_config(seed=4, backend="ideal").backend == "ideal"


def test_learning_rate_by_architecture() -> None:
    cfg = ExperimentConfig()
    assert cfg.fl.lr is None and cfg.training_config().lr == 0.05
    assert cfg.updated("fl", architecture="cnn").training_config().lr == 0.01
    assert cfg.updated("fl", architecture="logistic").training_config().lr == 0.05
    assert cfg.updated("fl", architecture="cnn", lr=0.2).training_config().lr == 0.2


def test_rejects_bad_keys() -> None:
    for data, key in [
        ({"scenario": {"bogus": 1}}, "scenario.bogus"),
        ({"physics": {"bandwidth": -1.0}}, "physics.bandwidth"),
        ({"fl": {"backend": "lora"}}, "fl.backend"),
        ({"extra_block": {}}, "extra_block"),
    ]:
        try:
            validate_config(data)
        except ConfigFailure as exc:
            assert key in str(exc), (key, str(exc))
        else:
            assert False, key

    try:
        validate_config({"scenario": {"devices": 4}})
    except ConfigFailure as exc:
        assert "k_min" in str(exc)
    else:
        assert False


def test_load_toml_and_json() -> None:
    import tempfile as _tempfile

    with _tempfile.TemporaryDirectory() as tmp:
        toml_path = _os.path.join(tmp, "run.toml")
        with open(toml_path, "w", encoding="utf-8") as f:
            f.write('[scenario]\nedge = 100.0\n\n[fl]\nbackend = "mimo"\nantennas = 8\n')
        cfg = load_config(toml_path)
        assert cfg.scenario.edge == 100.0 and cfg.fl.antennas == 8

        json_path = _os.path.join(tmp, "manifest.json")
        with open(json_path, "w", encoding="utf-8") as f:
            _json.dump({"manifest_version": 1, "config": cfg.model_dump(mode="json")}, f)
        assert load_config(json_path) == cfg

        try:
            load_config(_os.path.join(tmp, "missing.toml"))
        except ConfigFailure as exc:
            assert "missing.toml" in str(exc)
        else:
            assert False


def test_with_axis() -> None:
    cfg = ExperimentConfig()
    assert cfg.with_axis("D", 400).scenario.edge == 400.0
    assert cfg.with_axis("M", 8).fl.antennas == 8
    assert cfg.with_axis("N", 4).scenario.elements == 4
    assert cfg.with_axis("P_dBm", -20).physics.power_dbm == -20.0
    assert cfg.with_axis("sigma2_dBm", -100).physics.noise_dbm == -100.0
    assert cfg.with_seed(9).scenario.seed == 9
    for axis, value in [("M", 2.5), ("K", 3)]:
        try:
            cfg.with_axis(axis, value)
        except InvalidArgument:
            pass
        else:
            assert False
