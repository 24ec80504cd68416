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

"""Single experiment runs: data, scenario, transceiver design and training from one config."""

import dataclasses as _dc
import functools as _functools
import logging as _logging
import os as _os

from ..fl.data import Dataset, synthetic_blobs, uniform_split
from ..fl.sim import RoundReport, Uplink, parse_backend, prepare_uplink, train
from .config import ExperimentConfig
from .idx import load_mnist_idx
from .scenario import DATA_STREAM, generate_scenario, mimo_array, stream

_logger = _logging.getLogger("passfl.harness.experiment")

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _idx_path(directory: str, name: str) -> str:
    path = _os.path.join(directory, name)
    if not _os.path.exists(path) and _os.path.exists(path + ".gz"):
        return path + ".gz"
    return path


@_functools.lru_cache(maxsize=2)
def load_mnist_dir(directory: str) -> tuple[Dataset, Dataset]:
    """The standard training and test splits from a directory of IDX files."""
    res = []
    for split in ["train", "test"]:
        images, labels = MNIST_FILES[split]
        res.append(load_mnist_idx(_idx_path(directory, images), _idx_path(directory, labels)))
    return res[0], res[1]


def load_data(config: ExperimentConfig, seed: int) -> tuple[list[Dataset], Dataset]:
    """Per-device training sets and the held-out test set."""
    rng = stream(seed, DATA_STREAM)
    if config.fl.dataset == "synthetic":
        train_set, test_set = synthetic_blobs(rng)
    else:
        train_set, test_set = load_mnist_dir(config.fl.dataset)
    return uniform_split(train_set, config.scenario.devices, rng), test_set


def with_backend(config: ExperimentConfig, backend: str | None) -> tuple[ExperimentConfig, str]:
    """Resolve a backend name, with `mimo:M` overriding `fl.antennas`."""
    base, antennas = parse_backend(config.fl.backend if backend is None else backend)
    if antennas is not None:
        config = config.updated("fl", antennas=antennas)
    return config, base


def solve(config: ExperimentConfig, seed: int, backend: str | None = None) -> Uplink:
    """Transceiver design alone, with devices weighted as an equal data split would weigh them."""
    config, base = with_backend(config, backend)
    parts, _ = load_data(config, seed)
    scenario = generate_scenario(config, seed, [len(p) for p in parts])
    params = config.system_params()
    return prepare_uplink(
        base,
        scenario,
        params,
        config.solver_config(seed),
        mimo_array(config, params),
    )


def run_experiment(
    config: ExperimentConfig, seed: int, backend: str | None = None
) -> list[RoundReport]:
    """Reports are labelled with `backend` as given, so `mimo:8` and `mimo:32` stay apart."""
    label = config.fl.backend if backend is None else backend
    config, base = with_backend(config, label)
    parts, test_set = load_data(config, seed)
    scenario = generate_scenario(config, seed, [len(p) for p in parts])
    params = config.system_params()
    training = config.training_config(seed, base)
    _logger.info(
        "experiment: seed %d, %s backend, D = %g m, P = %g dBm",
        seed,
        label,
        config.scenario.edge,
        config.physics.power_dbm,
    )
    reports = train(
        scenario,
        params,
        config.solver_config(seed),
        parts,
        test_set,
        training,
        mimo_array(config, params),
    )
    if label != base:
        reports = [_dc.replace(r, backend=label) for r in reports]
    return reports


def _small_config() -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg = cfg.updated("scenario", devices=4, k_min=3, elements=8, edge=20.0)
    cfg = cfg.updated("fl", architecture="logistic", rounds=2, epochs=1, antennas=4)
    return cfg.updated("solver", outer_iters=3, placement_iters=3)


def test_run_experiment_paired() -> None:
    cfg = _small_config()
    ideal = run_experiment(cfg, 5, "ideal")
    far = run_experiment(cfg.with_axis("D", 200), 5, "ideal")
    assert [r.accuracy for r in ideal] == [r.accuracy for r in far]

    reports = run_experiment(cfg, 5, "pass")
    assert len(reports) == 2 and all(r.energy > 0 for r in reports)


def test_solve_backends() -> None:
    cfg = _small_config()
    for backend in ["pass", "mimo"]:
        uplink = solve(cfg, 1, backend)
        assert uplink.metrics is not None and uplink.metrics.snr > 1
        assert len(uplink.state.scheduled) >= 3


def test_sized_mimo_backend() -> None:
    cfg = _small_config()
    assert with_backend(cfg, "mimo:2")[0].fl.antennas == 2
    assert with_backend(cfg, None) == (cfg, "pass")

    sized = run_experiment(cfg, 3, "mimo:4")
    plain = run_experiment(cfg, 3, "mimo")
    assert [r.backend for r in sized] == ["mimo:4"] * 2
    assert [r.accuracy for r in sized] == [r.accuracy for r in plain]
    combiner = solve(cfg, 3, "mimo:1").state.combiner
    assert combiner is not None and len(combiner) == 1
