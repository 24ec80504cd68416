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

"""Pinching-antenna waveguide channels and the line-of-sight MIMO baseline channel.

A waveguide runs along the x-axis at `y = 0` and altitude `a`; its `N`
pinching elements sit at positions `l` along it.  Devices live in the
`z = 0` plane.  Every element radiates the signal it picked up after the
in-waveguide phase `psi * i_ref * l_n`, so device `k` sees

    h_k(l) = xi * alpha_k * sum_n exp(-j psi (D_k(l_n) + i_ref l_n)) / D_k(l_n)

with `D_k(l)^2 = (l - x_k)^2 + y_k^2 + a^2`.
"""

import dataclasses as _dc
import math as _math
import typing as _t

import numpy as _np

from .failure import InfeasibleFailure, InvalidArgument, DegenerateFailure

SPEED_OF_LIGHT = 299_792_458.0


@_dc.dataclass(frozen=True)
class SystemParams:
    """Physical constants and budgets, in SI units."""

    carrier_frequency: float
    noise_power: float
    power_cap: float
    bandwidth: float = 1e6
    resolution: float = 32.0
    reflective_index: float = 1.4
    # `0` means half a wavelength
    min_spacing: float = 0.0

    def __post_init__(self) -> None:
        for name in ["carrier_frequency", "noise_power", "power_cap", "bandwidth", "resolution"]:
            value = getattr(self, name)
            if not value > 0 or not _math.isfinite(value):
                raise InvalidArgument("`%s` must be positive and finite, got %r", name, value)
        if not self.reflective_index >= 0:
            raise InvalidArgument(
                "`reflective_index` must be non-negative, got %r", self.reflective_index
            )
        if self.min_spacing == 0.0:
            object.__setattr__(self, "min_spacing", self.wavelength / 2)
        elif self.min_spacing < self.wavelength / 2 * (1 - 1e-12):
            raise InvalidArgument(
                "`min_spacing` %r is below half a wavelength %r",
                self.min_spacing,
                self.wavelength / 2,
            )

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def wavenumber(self) -> float:
        return 2 * _math.pi / self.wavelength

    @property
    def aperture_coeff(self) -> float:
        return self.wavelength / (4 * _math.pi)


@_dc.dataclass(frozen=True)
class Device:
    x: float
    y: float
    alpha: float = 1.0
    dataset_size: int = 1
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise InvalidArgument("shadowing must be non-negative, got %r", self.alpha)
        if self.dataset_size < 1:
            raise InvalidArgument("dataset size must be at least 1, got %r", self.dataset_size)
        if not 0 < self.weight <= 1:
            raise InvalidArgument("weight must be in (0, 1], got %r", self.weight)

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, 0.0)


@_dc.dataclass(frozen=True, eq=False)
class Waveguide:
    length: float
    altitude: float
    positions: _np.ndarray

    def __post_init__(self) -> None:
        pos = _np.array(self.positions, dtype=_np.float64)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if not self.length > 0 or not self.altitude > 0:
            raise InvalidArgument(
                "waveguide length and altitude must be positive, got %r and %r",
                self.length,
                self.altitude,
            )
        if pos.ndim != 1:
            raise InvalidArgument("element positions must be a vector")

    @property
    def element_count(self) -> int:
        return len(self.positions)

    @classmethod
    def uniform(cls, length: float, altitude: float, n: int) -> "Waveguide":
        """Elements at the centers of `n` equal sections of the waveguide."""
        if n < 1:
            raise InvalidArgument("element count must be at least 1, got %r", n)
        return cls(length, altitude, (_np.arange(n) + 0.5) * (length / n))

    def with_positions(self, positions: _np.ndarray) -> "Waveguide":
        return Waveguide(self.length, self.altitude, positions)

    def violations(self, min_spacing: float) -> list[str]:
        res = []
        pos = self.positions
        if len(pos) > 0:
            if pos[0] < 0 or pos[-1] > self.length:
                res.append("element outside of [0, L]")
            gaps = _np.diff(pos)
            if _np.any(gaps < min_spacing * (1 - 1e-9)):
                res.append("elements closer than the minimal spacing")
        return res

    def is_feasible(self, min_spacing: float) -> bool:
        return len(self.violations(min_spacing)) == 0

    def check_feasible(self, min_spacing: float) -> None:
        if self.element_count * min_spacing > self.length * (1 + 1e-12):
            raise InfeasibleFailure(
                "waveguide too short: %d elements at spacing %g need more than %g m",
                self.element_count,
                min_spacing,
                self.length,
            )
        bad = self.violations(min_spacing)
        if bad:
            raise InfeasibleFailure("infeasible element placement: %s", "; ".join(bad))


@_dc.dataclass(frozen=True)
class MimoArray:
    """A uniform linear array oriented along the x-axis."""

    center: tuple[float, float, float]
    element_count: int
    spacing: float

    def __post_init__(self) -> None:
        if self.element_count < 1:
            raise InvalidArgument("array needs at least one antenna, got %r", self.element_count)
        if not self.spacing > 0:
            raise InvalidArgument("antenna spacing must be positive, got %r", self.spacing)

    @classmethod
    def centered(
        cls, params: SystemParams, x: float, y: float, altitude: float, m: int
    ) -> "MimoArray":
        return cls((x, y, altitude), m, params.wavelength / 2)

    @property
    def element_positions(self) -> _np.ndarray:
        """Element `(M - 1) // 2` sits at `center`, so smaller arrays nest inside larger ones."""
        m = self.element_count
        offsets = (_np.arange(m) - (m - 1) // 2) * self.spacing
        res = _np.tile(_np.array(self.center, dtype=_np.float64), (self.element_count, 1))
        res[:, 0] += offsets
        return res


@_dc.dataclass(frozen=True, eq=False)
class Scenario:
    """Devices plus the waveguide that serves them."""

    devices: tuple[Device, ...]
    waveguide: Waveguide

    @property
    def device_count(self) -> int:
        return len(self.devices)

    @property
    def weights(self) -> _np.ndarray:
        return _np.array([d.weight for d in self.devices], dtype=_np.float64)

    def with_waveguide(self, waveguide: Waveguide) -> "Scenario":
        return Scenario(self.devices, waveguide)


def element_terms(
    params: SystemParams, altitude: float, devices: _t.Sequence[Device], positions: _np.ndarray
) -> _np.ndarray:
    """Per-element contributions, a `(len(devices), len(positions))` complex matrix."""
    x = _np.array([d.x for d in devices], dtype=_np.float64)[:, None]
    y = _np.array([d.y for d in devices], dtype=_np.float64)[:, None]
    alpha = _np.array([d.alpha for d in devices], dtype=_np.float64)[:, None]
    ell = _np.asarray(positions, dtype=_np.float64)[None, :]
    dist = _np.sqrt((ell - x) ** 2 + y**2 + altitude**2)
    phase = params.wavenumber * (dist + params.reflective_index * ell)
    res: _np.ndarray = (params.aperture_coeff * alpha) * _np.exp(-1j * phase) / dist
    return res


def channel_vector(
    params: SystemParams, waveguide: Waveguide, devices: _t.Sequence[Device]
) -> _np.ndarray:
    if len(devices) == 0:
        return _np.zeros(0, dtype=_np.complex128)
    res: _np.ndarray = element_terms(params, waveguide.altitude, devices, waveguide.positions).sum(
        axis=1
    )
    return res


def pass_channel(params: SystemParams, waveguide: Waveguide, device: Device) -> complex:
    return complex(channel_vector(params, waveguide, [device])[0])


def norm_bound_A(
    params: SystemParams, n: int, scheduled: _t.Sequence[Device], altitude: float
) -> float:
    """`sum_k |xi alpha_k|^2 N / D_k(x_k)^2`, a bound on the scheduled channel norm."""
    if len(scheduled) == 0:
        raise DegenerateFailure("empty schedule")
    xi = params.aperture_coeff
    res = 0.0
    for d in scheduled:
        res += (xi * d.alpha) ** 2 * n / (d.y**2 + altitude**2)
    return res


def mimo_channel(params: SystemParams, array: MimoArray, device: Device) -> _np.ndarray:
    delta = array.element_positions - _np.array(device.position)[None, :]
    dist = _np.sqrt(_np.sum(delta**2, axis=1))
    res: _np.ndarray = (
        params.aperture_coeff * device.alpha * _np.exp(-1j * params.wavenumber * dist) / dist
    )
    return res


def channel_matrix_mimo(
    params: SystemParams, array: MimoArray, devices: _t.Sequence[Device]
) -> _np.ndarray:
    """Columns are `mimo_channel` vectors, shape `(M, K)`."""
    if len(devices) == 0:
        return _np.zeros((array.element_count, 0), dtype=_np.complex128)
    return _np.stack([mimo_channel(params, array, d) for d in devices], axis=1)


def random_feasible_positions(
    length: float, n: int, min_spacing: float, rng: _np.random.Generator
) -> _np.ndarray:
    """Uniformly random sorted positions respecting the minimal spacing."""
    slack = length - (n - 1) * min_spacing
    if slack < 0:
        raise InfeasibleFailure(
            "waveguide too short: %d elements at spacing %g need more than %g m",
            n,
            min_spacing,
            length,
        )
    base = _np.sort(rng.uniform(0.0, slack, size=n))
    res: _np.ndarray = _np.minimum(base + _np.arange(n) * min_spacing, length)
    return res


def _test_params(**kwargs: _t.Any) -> SystemParams:
    # lambda = 0.06 m
    kwargs.setdefault("carrier_frequency", SPEED_OF_LIGHT / 0.06)
    kwargs.setdefault("noise_power", 1e-12)
    kwargs.setdefault("power_cap", 1e-3)
    return SystemParams(**kwargs)


def test_system_params() -> None:
    p = _test_params()
    assert abs(p.wavenumber * p.wavelength - 2 * _math.pi) <= 1e-12 * 2 * _math.pi
    assert abs(p.aperture_coeff * 4 * _math.pi - p.wavelength) <= 1e-12 * p.wavelength
    assert p.min_spacing == p.wavelength / 2

    for bad in [{"noise_power": 0.0}, {"power_cap": -1.0}, {"min_spacing": 0.01}]:
        try:
            _test_params(**bad)
        except InvalidArgument:
            pass
        else:
            assert False, bad


def test_pass_channel_examples() -> None:
    p = _test_params()
    wg = Waveguide(20.0, 4.0, _np.array([10.0]))
    dev = Device(10.0, 3.0)
    h = pass_channel(p, wg, dev)
    assert abs(abs(h) - p.aperture_coeff / 5) <= 1e-15
    assert abs(abs(h) - 9.5493e-4) <= 1e-8
    expected = _np.exp(-1j * p.wavenumber * (5 + 10 * p.reflective_index)) * p.aperture_coeff / 5
    assert abs(h - expected) <= 1e-15

    assert pass_channel(p, wg, Device(10.0, 3.0, alpha=0.0)) == 0

    wg32 = Waveguide.uniform(50.0, 5.0, 32)
    far = Device(25.0, 1e6)
    assert abs(pass_channel(p, wg32, far)) <= p.aperture_coeff * 32 / 1e6


def test_channel_vector() -> None:
    p = _test_params()
    wg = Waveguide.uniform(50.0, 5.0, 32)
    assert channel_vector(p, wg, []).shape == (0,)

    same = channel_vector(p, wg, [Device(3.0, 4.0), Device(3.0, 4.0)])
    assert same[0] == same[1]

    rng = _np.random.default_rng(7)
    devices = [Device(float(rng.uniform(0, 50)), float(rng.uniform(-25, 25))) for _ in range(3)]
    hv = channel_vector(p, wg, devices)
    for k, d in enumerate(devices):
        assert hv[k] == pass_channel(p, wg, d)


def test_channel_triangle_bound() -> None:
    p = _test_params()
    rng = _np.random.default_rng(1)
    for _ in range(50):
        wg = Waveguide(50.0, 5.0, random_feasible_positions(50.0, 32, p.min_spacing, rng))
        d = Device(float(rng.uniform(0, 50)), float(rng.uniform(-25, 25)), float(rng.uniform(0, 2)))
        dist = _np.sqrt((wg.positions - d.x) ** 2 + d.y**2 + wg.altitude**2)
        assert _np.all(dist >= wg.altitude)
        bound = p.aperture_coeff * d.alpha * _np.sum(1 / dist)
        assert abs(pass_channel(p, wg, d)) <= bound * (1 + 1e-12)


def test_translation_invariance() -> None:
    p = _test_params(reflective_index=0.0)
    wg = Waveguide.uniform(50.0, 5.0, 8)
    devices = [Device(3.0, 4.0), Device(40.0, -7.0)]
    shift = 12.5
    moved = Waveguide(50.0 + shift, 5.0, wg.positions + shift)
    moved_devices = [Device(d.x + shift, d.y) for d in devices]
    h0 = channel_vector(p, wg, devices)
    h1 = channel_vector(p, moved, moved_devices)
    assert _np.allclose(_np.abs(h0), _np.abs(h1), rtol=1e-12, atol=0)
    assert _np.allclose(h0, h1, rtol=1e-6, atol=0)


def test_norm_bound_A() -> None:
    p = _test_params()
    dev = Device(10.0, 3.0)
    a1 = norm_bound_A(p, 32, [dev], 4.0)
    assert abs(a1 - p.aperture_coeff**2 * 32 / 25) <= 1e-15 * a1
    assert norm_bound_A(p, 32, [dev, dev], 4.0) == 2 * a1
    assert norm_bound_A(p, 32, [Device(1.0, 1.0, alpha=0.0)], 4.0) == 0

    try:
        norm_bound_A(p, 32, [], 4.0)
    except DegenerateFailure as exc:
        assert str(exc) == "empty schedule"
    else:
        assert False


def test_norm_bound_A_sampled() -> None:
    # the bound holds for the mean over random placements, individual
    # placements that phase-align several elements may exceed it
    p = _test_params()
    rng = _np.random.default_rng(3)
    devices = [Device(float(rng.uniform(0, 50)), float(rng.uniform(-25, 25))) for _ in range(6)]
    a = norm_bound_A(p, 32, devices, 5.0)
    total = 0.0
    for _ in range(1000):
        wg = Waveguide(50.0, 5.0, random_feasible_positions(50.0, 32, p.min_spacing, rng))
        total += float(_np.sum(_np.abs(channel_vector(p, wg, devices)) ** 2))
    assert total / 1000 <= a


def test_mimo_channel() -> None:
    p = _test_params()
    arr = MimoArray((25.0, 0.0, 5.0), 1, p.wavelength / 2)
    h = mimo_channel(p, arr, Device(25.0, 0.0))
    assert h.shape == (1,)
    assert abs(abs(h[0]) - p.aperture_coeff / 5) <= 1e-15

    assert _np.all(mimo_channel(p, arr, Device(3.0, 2.0, alpha=0.0)) == 0)

    dev = Device(25.0, 13.0)
    h1 = mimo_channel(p, MimoArray.centered(p, 25.0, 0.0, 5.0, 1), dev)
    for m in [2, 3, 8, 32]:
        arr_m = MimoArray.centered(p, 25.0, 0.0, 5.0, m)
        pos = arr_m.element_positions
        assert _np.all(_np.abs(_np.diff(pos[:, 0]) - p.wavelength / 2) <= 1e-12)
        # the lone antenna of the one-element array is an element of every larger one
        assert tuple(pos[(m - 1) // 2]) == (25.0, 0.0, 5.0)
        assert abs(mimo_channel(p, arr_m, dev)[(m - 1) // 2] - h1[0]) <= 1e-12 * abs(h1[0])

    hm = channel_matrix_mimo(p, MimoArray.centered(p, 25.0, 0.0, 5.0, 4), [Device(1.0, 2.0)] * 3)
    assert hm.shape == (4, 3)


def test_waveguide_feasibility() -> None:
    p = _test_params()
    wg = Waveguide.uniform(50.0, 5.0, 32)
    wg.check_feasible(p.min_spacing)
    assert not Waveguide(1.0, 5.0, _np.array([0.5, 0.51])).is_feasible(p.min_spacing)
    assert not Waveguide(1.0, 5.0, _np.array([0.5, 1.5])).is_feasible(p.min_spacing)

    try:
        Waveguide.uniform(0.5, 5.0, 32).check_feasible(p.min_spacing)
    except InfeasibleFailure as exc:
        assert "waveguide too short" in str(exc)
    else:
        assert False

    rng = _np.random.default_rng(0)
    for _ in range(100):
        pos = random_feasible_positions(3.0, 50, p.min_spacing, rng)
        assert Waveguide(3.0, 5.0, pos).is_feasible(p.min_spacing)
