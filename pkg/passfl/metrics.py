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

"""Over-the-air aggregation metrics: MSE, computation SNR and rate, time, energy."""

import dataclasses as _dc
import math as _math
import typing as _t

import numpy as _np

from .channel import SystemParams
from .failure import DegenerateFailure, InfeasibleFailure, InvalidArgument, check_lengths


@_dc.dataclass(eq=False)
class TransceiverState:
    """Element positions `l`, schedule `gamma`, power scalings `b` and receive scale `rho`.

    `combiner` is only set by the MIMO baseline, in which case `positions`
    is empty and channels are the effective scalar ones.
    """

    positions: _np.ndarray
    schedule: _np.ndarray
    power_scalings: _np.ndarray
    receive_scale: float
    combiner: _np.ndarray | None = None

    def __post_init__(self) -> None:
        self.positions = _np.array(self.positions, dtype=_np.float64)
        self.schedule = _np.array(self.schedule, dtype=bool)
        self.power_scalings = _np.array(self.power_scalings, dtype=_np.complex128)
        self.receive_scale = float(self.receive_scale)
        check_lengths("TransceiverState", len(self.schedule), power_scalings=self.power_scalings)
        if not self.receive_scale >= 0:
            raise InvalidArgument("receive scale must be non-negative, got %r", self.receive_scale)

    @property
    def device_count(self) -> int:
        return len(self.schedule)

    @property
    def gamma(self) -> _np.ndarray:
        return self.schedule.astype(_np.float64)

    @property
    def scheduled(self) -> tuple[int, ...]:
        return tuple(int(k) for k in _np.flatnonzero(self.schedule))

    def copy(self, **changes: _t.Any) -> "TransceiverState":
        fields = {
            "positions": self.positions.copy(),
            "schedule": self.schedule.copy(),
            "power_scalings": self.power_scalings.copy(),
            "receive_scale": self.receive_scale,
            "combiner": None if self.combiner is None else self.combiner.copy(),
        }
        fields.update(changes)
        return TransceiverState(**fields)

    def with_schedule(self, subset: _t.Iterable[int]) -> "TransceiverState":
        sched = _np.zeros(self.device_count, dtype=bool)
        sched[list(subset)] = True
        return self.copy(schedule=sched)

    def violations(self, power_cap: float, k_min: int) -> list[str]:
        """Broken constraints among the power cap, the schedule size and `rho >= 0`."""
        res = []
        if _np.any(_np.abs(self.power_scalings) ** 2 > power_cap * (1 + 1e-9)):
            res.append("power scaling above the power cap")
        if int(_np.sum(self.schedule)) < k_min:
            res.append("fewer than %d devices scheduled" % (k_min,))
        if self.receive_scale < 0:
            res.append("negative receive scale")
        return res


@_dc.dataclass(frozen=True)
class AirCompMetrics:
    mse: float
    snr: float
    rate: float
    time: float
    per_device_energy: _np.ndarray
    total_energy: float

    @property
    def snr_db(self) -> float:
        return 10 * _math.log10(self.snr)


def _check(h: _np.ndarray, state: TransceiverState, phi: _np.ndarray) -> None:
    check_lengths("aircomp", state.device_count, h=h, phi=phi)


def coefficients(h: _np.ndarray, state: TransceiverState) -> _np.ndarray:
    """Effective per-device gains `rho h_k gamma_k b_k`."""
    res: _np.ndarray = state.receive_scale * (
        _np.asarray(h, dtype=_np.complex128) * state.gamma * state.power_scalings
    )
    return res


def signal_power(h: _np.ndarray, state: TransceiverState) -> float:
    """`||rho h^T Gamma B||^2`."""
    return float(_np.sum(_np.abs(coefficients(h, state)) ** 2))


def aggregation_mse(
    h: _np.ndarray, state: TransceiverState, phi: _np.ndarray, noise_power: float
) -> float:
    _check(h, state, phi)
    misalign = coefficients(h, state) - _np.asarray(phi) * state.gamma
    return float(_np.sum(_np.abs(misalign) ** 2)) + noise_power * state.receive_scale**2


def computation_snr(
    h: _np.ndarray, state: TransceiverState, phi: _np.ndarray, noise_power: float
) -> float:
    eps = aggregation_mse(h, state, phi, noise_power)
    if eps == 0:
        raise DegenerateFailure("zero aggregation error (degenerate)")
    return (signal_power(h, state) + noise_power * state.receive_scale**2) / eps


def computation_rate(snr: float, bandwidth: float) -> float:
    if not snr > 0:
        raise InvalidArgument("computation SNR must be positive, got %r", snr)
    return bandwidth * _math.log2(snr)


def transmission_time(resolution: float, rate: float) -> float:
    if not rate > 0:
        raise InfeasibleFailure("infeasible: computation SNR <= 1")
    return resolution / rate


def round_energy(state: TransceiverState, t: float) -> tuple[_np.ndarray, float]:
    if t < 0:
        raise InvalidArgument("transmission time must be non-negative, got %r", t)
    per_device = state.gamma * _np.abs(state.power_scalings) ** 2 * t
    return per_device, float(_np.sum(per_device))


def pprime_objective(
    h: _np.ndarray, state: TransceiverState, phi: _np.ndarray, noise_power: float
) -> float:
    """`sum_k gamma_k |b_k|^2 / log2(SNR)`, `inf` when the SNR is at most 1."""
    try:
        snr = computation_snr(h, state, phi, noise_power)
    except DegenerateFailure:
        return _math.inf
    if not snr > 1:
        return _math.inf
    power = float(_np.sum(state.gamma * _np.abs(state.power_scalings) ** 2))
    return power / _math.log2(snr)


def evaluate_state(
    h: _np.ndarray, state: TransceiverState, phi: _np.ndarray, params: SystemParams
) -> AirCompMetrics:
    eps = aggregation_mse(h, state, phi, params.noise_power)
    snr = computation_snr(h, state, phi, params.noise_power)
    rate = computation_rate(snr, params.bandwidth)
    t = transmission_time(params.resolution, rate)
    per_device, total = round_energy(state, t)
    return AirCompMetrics(eps, snr, rate, t, per_device, total)


def ideal_aggregate(phi: _np.ndarray, gamma: _np.ndarray, s: _np.ndarray) -> _t.Any:
    """`sum_k phi_k gamma_k s_k` where `s` has shape `(K,)` or `(K, d)`."""
    weights = _np.asarray(phi, dtype=_np.float64) * _np.asarray(gamma, dtype=_np.float64)
    return weights @ _np.asarray(s, dtype=_np.float64)


def noisy_aggregate(
    h: _np.ndarray,
    state: TransceiverState,
    s: _np.ndarray,
    noise_power: float,
    noise_source: _np.random.Generator,
) -> _t.Any:
    """`rho (sum_k h_k gamma_k b_k s_k + z)` with `z ~ CN(0, sigma^2)`.

    `s` has shape `(K,)` or `(K, d)`, every one of the `d` entries gets its own noise draw.
    """
    s = _np.asarray(s, dtype=_np.float64)
    c = coefficients(h, state)
    shape = s.shape[1:]
    scale = _math.sqrt(noise_power / 2)
    z_re = noise_source.standard_normal(shape) * scale
    z_im = noise_source.standard_normal(shape) * scale
    rho = state.receive_scale
    re = _np.ascontiguousarray(c.real) @ s + rho * z_re
    im = _np.ascontiguousarray(c.imag) @ s + rho * z_im
    return re + 1j * im


def _state(b: _t.Any, gamma: _t.Any, rho: float) -> TransceiverState:
    return TransceiverState(_np.zeros(0), gamma, b, rho)


def test_aggregation_mse_examples() -> None:
    st = _state([1, 1], [0, 0], 0.0)
    assert aggregation_mse(_np.array([1, 1j]), st, _np.array([0.5, 0.5]), 0.1) == 0

    h = _np.array([2.0, 0.5j])
    phi = _np.array([0.25, 0.75])
    b = phi / h
    st = _state(b, [1, 1], 1.0)
    assert abs(aggregation_mse(h, st, phi, 0.3) - 0.3) <= 1e-15

    st = _state([1, 1], [1, 1], 1.0)
    assert abs(aggregation_mse(_np.array([1, 1j]), st, _np.array([0.5, 0.5]), 0.1) - 1.6) <= 1e-12


def test_dimension_mismatch() -> None:
    from .failure import DimensionFailure

    st = _state([1, 1], [1, 1], 1.0)
    try:
        aggregation_mse(_np.ones(3), st, _np.ones(2), 0.1)
    except DimensionFailure:
        pass
    else:
        assert False


def test_computation_snr() -> None:
    phi = _np.array([0.5, 0.5])
    st = _state([1, 1], [0, 0], 2.0)
    assert computation_snr(_np.array([1, 1j]), st, phi, 0.1) == 1

    h = _np.array([1 + 1j, 0.5])
    rho = 3.0
    b = phi / (rho * h)
    st = _state(b, [1, 1], rho)
    expected = 1 + float(_np.sum(phi**2)) / (rho**2 * 0.2)
    assert abs(computation_snr(h, st, phi, 0.2) - expected) <= 1e-12 * expected

    try:
        computation_snr(_np.array([1.0]), _state([1], [0], 0.0), _np.array([1.0]), 0.1)
    except DegenerateFailure as exc:
        assert "degenerate" in str(exc)
    else:
        assert False


def test_rate_time_energy() -> None:
    assert computation_rate(2, 1) == 1
    assert computation_rate(1, 1e6) == 0
    assert computation_rate(4, 1e6) == 2e6

    assert abs(transmission_time(32, 2e6) - 1.6e-5) <= 1e-20
    assert transmission_time(0, 2e6) == 0
    try:
        transmission_time(32, 0)
    except InfeasibleFailure as exc:
        assert "SNR <= 1" in str(exc)
    else:
        assert False

    P = 1e-3
    e, total = round_energy(_state([_math.sqrt(P)] * 2, [1, 0], 1.0), 2)
    assert abs(e[0] - 2 * P) <= 1e-18 and e[1] == 0
    assert abs(total - 2 * P) <= 1e-18
    e, total = round_energy(_state([1, 1], [1, 1], 1.0), 0)
    assert total == 0 and _np.all(e == 0)
    _, total = round_energy(_state([1, 1, 1], [1, 1, 1], 1.0), 0.5)
    assert total == 1.5


def test_ideal_aggregate() -> None:
    assert ideal_aggregate(_np.array([0.5, 0.5]), _np.zeros(2), _np.array([3.0, 4.0])) == 0
    assert ideal_aggregate(_np.array([1.0]), _np.ones(1), _np.array([3.0])) == 3
    assert ideal_aggregate(_np.array([0.25, 0.75]), _np.ones(2), _np.array([4.0, 0.0])) == 1


def test_noisy_aggregate_exact_cases() -> None:
    phi = _np.array([0.5, 0.5])
    st = _state(phi, [1, 1], 1.0)
    rng = _np.random.default_rng(0)
    assert noisy_aggregate(_np.ones(2), st, _np.array([1.0, -1.0]), 0.0, rng) == 0

    st0 = _state([1, 1], [1, 1], 0.0)
    assert noisy_aggregate(_np.array([1, 2j]), st0, _np.array([5.0, 7.0]), 1.0, rng) == 0


def test_noisy_aggregate_statistics() -> None:
    rng = _np.random.default_rng(11)
    h = _np.array([0.3 + 0.4j, -0.2 + 1j, 0.7])
    st = _state([1.0, 0.5 - 0.5j, 2.0], [1, 1, 0], 0.8)
    s = _np.array([0.3, -1.2, 0.9])
    sigma2 = 0.5
    n = 100_000
    draws = noisy_aggregate(h, st, _np.tile(s[:, None], (1, n)), sigma2, rng)
    mean = complex(coefficients(h, st) @ s)
    var = st.receive_scale**2 * sigma2
    assert abs(draws.mean() - mean) <= 4 * _math.sqrt(var / n)
    assert abs(draws.real.var() - var / 2) <= 0.05 * var / 2
    assert abs(draws.imag.var() - var / 2) <= 0.05 * var / 2


def test_mse_monte_carlo() -> None:
    rng = _np.random.default_rng(5)
    n = 100_000
    for _ in range(10):
        k = 4
        h = rng.normal(size=k) + 1j * rng.normal(size=k)
        st = _state(
            rng.normal(size=k) + 1j * rng.normal(size=k),
            rng.integers(0, 2, size=k),
            float(rng.uniform(0.1, 2)),
        )
        phi = rng.dirichlet(_np.ones(k))
        sigma2 = float(rng.uniform(0.05, 1))
        s = rng.standard_normal((k, n))
        err = noisy_aggregate(h, st, s, sigma2, rng) - ideal_aggregate(phi, st.gamma, s)
        emp = float(_np.mean(_np.abs(err) ** 2))
        eps = aggregation_mse(h, st, phi, sigma2)
        assert abs(emp - eps) <= 0.03 * eps


def test_snr_capacity_form() -> None:
    rng = _np.random.default_rng(2)
    for _ in range(100):
        k = 5
        h = rng.normal(size=k) + 1j * rng.normal(size=k)
        b = rng.normal(size=k) + 1j * rng.normal(size=k)
        rho = float(rng.uniform(0.1, 3))
        phi = rng.dirichlet(_np.ones(k))
        sigma2 = float(rng.uniform(0.1, 2))
        st = _state(b, _np.ones(k), rho)
        c0 = _np.abs(h * b) ** 2 / sigma2
        c1 = _np.abs(h * b - phi / rho) ** 2 / sigma2
        expected = (1 + c0.sum()) / (1 + c1.sum())
        got = computation_snr(h, st, phi, sigma2)
        assert abs(got - expected) <= 1e-10 * expected


def test_scaling() -> None:
    rng = _np.random.default_rng(4)
    k = 3
    h = rng.normal(size=k) + 1j * rng.normal(size=k)
    b = rng.normal(size=k) + 1j * rng.normal(size=k)
    phi = rng.dirichlet(_np.ones(k))
    sigma2 = 0.3
    st = _state(b, _np.ones(k), 0.7)
    c = 2.5
    scaled = _state(b * c, _np.ones(k), 0.7 / c)

    # the signal misalignment is invariant, the noise term is not
    mis = aggregation_mse(h, st, phi, sigma2) - sigma2 * 0.7**2
    mis_scaled = aggregation_mse(h, scaled, phi, sigma2) - sigma2 * (0.7 / c) ** 2
    assert abs(mis - mis_scaled) <= 1e-10 * mis

    _, e0 = round_energy(st, 1.0)
    _, e1 = round_energy(scaled, 1.0)
    assert abs(e1 - c**2 * e0) <= 1e-12 * e1


def test_evaluate_state() -> None:
    params = SystemParams(5e9, 0.1, 4.0, bandwidth=1.0, resolution=2.0)
    phi = _np.array([0.5, 0.5])
    st = _state([1, 1], [1, 1], 1.0)
    m = evaluate_state(_np.array([1, 1j]), st, phi, params)
    assert abs(m.mse - 1.6) <= 1e-12
    assert abs(m.snr - 2.1 / 1.6) <= 1e-12
    assert abs(m.time * m.rate - 2.0) <= 1e-12
    assert abs(m.total_energy - 2 * m.time) <= 1e-12

    bad = _state([0, 0], [1, 1], 1.0)
    try:
        evaluate_state(_np.array([1, 1j]), bad, phi, params)
    except InfeasibleFailure:
        pass
    else:
        assert False
    assert pprime_objective(_np.array([1, 1j]), bad, phi, 0.1) == _math.inf
