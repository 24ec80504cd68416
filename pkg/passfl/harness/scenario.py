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

"""Random device placement in the square region served by the waveguide or the MIMO array."""

import math as _math
import typing as _t

import numpy as _np

from ..channel import Device, MimoArray, Scenario, SystemParams, Waveguide
from ..failure import InvalidArgument, check_lengths
from .config import ExperimentConfig

# spawn keys of the independent random streams derived from one seed
SCENARIO_STREAM = 0
DATA_STREAM = 1


def stream(seed: int, key: int) -> _np.random.Generator:
    return _np.random.default_rng(_np.random.SeedSequence(seed, spawn_key=(key,)))


def generate_scenario(
    config: ExperimentConfig, seed: int, dataset_sizes: _t.Sequence[int] | None = None
) -> Scenario:
    """Devices uniform in `[0, D] x [-D/2, D/2]`, weighted by their dataset sizes.

    The waveguide starts with uniformly spread elements.
    """
    sc = config.scenario
    k = sc.devices
    if dataset_sizes is None:
        dataset_sizes = [1] * k
    check_lengths("generate_scenario", k, dataset_sizes=dataset_sizes)
    if min(dataset_sizes) < 1:
        raise InvalidArgument("every device needs at least one sample")

    rng = stream(seed, SCENARIO_STREAM)
    d = sc.edge
    xs = rng.uniform(0, d, size=k)
    ys = rng.uniform(-d / 2, d / 2, size=k)
    total = sum(dataset_sizes)
    devices = tuple(
        Device(float(x), float(y), 1.0, int(n), n / total)
        for x, y, n in zip(xs, ys, dataset_sizes)
    )
    return Scenario(devices, Waveguide.uniform(sc.waveguide_length, sc.altitude, sc.elements))


def mimo_array(config: ExperimentConfig, params: SystemParams) -> MimoArray:
    """Half-wavelength array at the center of the region, at the waveguide altitude."""
    sc = config.scenario
    return MimoArray.centered(params, sc.edge / 2, 0.0, sc.altitude, config.fl.antennas)


def test_generate_scenario_deterministic() -> None:
    cfg = ExperimentConfig()
    a = generate_scenario(cfg, 3, [100] * 8)
    b = generate_scenario(cfg, 3, [100] * 8)
    c = generate_scenario(cfg, 4, [100] * 8)
    assert a.devices == b.devices and a.devices != c.devices
    assert _np.allclose(a.weights, 1 / 8)
    assert a.waveguide.length == 50.0 and a.waveguide.element_count == 32

    w = generate_scenario(cfg, 3, [1, 2, 3, 4, 5, 6, 7, 8]).weights
    assert abs(w[7] - 8 / 36) <= 1e-15


def test_generate_scenario_box_and_mean() -> None:
    cfg = ExperimentConfig().updated("scenario", devices=10_000)
    sc = generate_scenario(cfg, 0)
    xs = _np.array([d.x for d in sc.devices])
    ys = _np.array([d.y for d in sc.devices])
    assert _np.all((0 <= xs) & (xs <= 50)) and _np.all((-25 <= ys) & (ys <= 25))
    se = 50 / _math.sqrt(12) / _math.sqrt(len(xs))
    assert abs(xs.mean() - 25) <= 4 * se
    assert abs(ys.mean()) <= 4 * se


def test_mimo_array_center() -> None:
    cfg = ExperimentConfig().updated("fl", antennas=4)
    arr = mimo_array(cfg, cfg.system_params())
    assert arr.center == (25.0, 0.0, 5.0) and arr.element_count == 4
    assert tuple(arr.element_positions[1]) == (25.0, 0.0, 5.0)
    assert abs(_np.mean(arr.element_positions[:, 0]) - 25.0 - arr.spacing / 2) <= 1e-12
