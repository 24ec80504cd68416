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

"""Transmit power scaling via Dinkelbach iterations with minorization-minimization steps."""

import logging as _logging
import math as _math

import numpy as _np

from ..channel import SystemParams
from ..failure import DegenerateFailure, InfeasibleFailure, InvalidArgument
from ..metrics import TransceiverState, aggregation_mse, pprime_objective, signal_power
from .common import SolverConfig, SolveTrace

_logger = _logging.getLogger("passfl.optimizer.power")

BACKTRACKS = 8


def project_power(x: _np.ndarray, power_cap: float) -> _np.ndarray:
    """Scale entries with `|x|^2 > P` back onto the circle of radius `sqrt(P)`."""
    mag = _np.abs(x)
    cap = _math.sqrt(power_cap)
    over = mag**2 > power_cap
    res = x.astype(_np.complex128, copy=True)
    res[over] = cap * x[over] / mag[over]
    return res


def mm_coefficients(
    h: _np.ndarray, state: TransceiverState, phi: _np.ndarray, noise_power: float
) -> tuple[float, float]:
    """`(kappa, tau)`: the aggregation MSE and the received power at the current `b`."""
    kappa = aggregation_mse(h, state, phi, noise_power)
    tau = signal_power(h, state) + noise_power * state.receive_scale**2
    return kappa, tau


def power_update_step(
    state: TransceiverState,
    h: _np.ndarray,
    phi: _np.ndarray,
    noise_power: float,
    eta: float,
    power_cap: float,
    fallbacks: list[int] | None = None,
) -> _np.ndarray:
    """One surrogate minimization step, returns new `b`.

    Entries whose surrogate denominator is non-positive get full power with
    the phase of `conj(rho h_k) phi_k` and are appended to `fallbacks`.
    """
    sched = list(state.scheduled)
    if len(sched) == 0:
        raise DegenerateFailure("empty schedule")
    if not eta > 0:
        raise InvalidArgument("Dinkelbach ratio must be positive, got %r", eta)

    kappa, tau = mm_coefficients(h, state, phi, noise_power)
    g = state.receive_scale * _np.asarray(h, dtype=_np.complex128)
    res = state.power_scalings.copy()
    cap = _math.sqrt(power_cap)
    for k in sched:
        num = _np.conj(g[k]) * phi[k] / kappa
        den = _math.log(2) / eta - abs(g[k]) ** 2 * (1 / tau - 1 / kappa)
        if den > 0:
            res[k] = num / den
        else:
            if fallbacks is not None:
                fallbacks.append(k)
            if num != 0:
                res[k] = cap * num / abs(num)
    sel = _np.array(sched)
    res[sel] = project_power(res[sel], power_cap)
    return res


def tune_power(
    state: TransceiverState,
    h: _np.ndarray,
    phi: _np.ndarray,
    params: SystemParams,
    config: SolverConfig,
    trace: SolveTrace | None = None,
) -> _np.ndarray:
    """Minimize `sum_k gamma_k |b_k|^2 / log2(SNR)` over `b` with `rho` fixed.

    Candidates that do not improve the objective are backtracked towards
    the previous iterate, iterations stop when no improvement is found.
    """
    sigma2 = params.noise_power
    current = state
    value = pprime_objective(h, current, phi, sigma2)
    if not _math.isfinite(value):
        raise InfeasibleFailure("infeasible start: computation SNR <= 1")

    gamma = state.gamma
    for t in range(config.power_iters):
        eta = value
        if trace is not None:
            trace.dinkelbach.append(eta)

        fallbacks: list[int] = []
        b_old = current.power_scalings
        cand = power_update_step(current, h, phi, sigma2, eta, params.power_cap, fallbacks)
        cand_value = pprime_objective(h, current.copy(power_scalings=cand), phi, sigma2)
        if fallbacks:
            if trace is not None:
                trace.note_fallback("power step %d: fallback at devices %s", t, fallbacks)
            _logger.debug("power step %d: fallback at devices %s", t, fallbacks)
            if cand_value > value:
                reverted = cand.copy()
                reverted[fallbacks] = b_old[fallbacks]
                rvalue = pprime_objective(h, current.copy(power_scalings=reverted), phi, sigma2)
                if rvalue < cand_value:
                    cand, cand_value = reverted, rvalue

        tries = 0
        while cand_value > value and tries < BACKTRACKS:
            cand = b_old + 0.5 * (cand - b_old)
            cand_value = pprime_objective(h, current.copy(power_scalings=cand), phi, sigma2)
            tries += 1
        if cand_value > value:
            _logger.debug("power step %d: no improving step", t)
            break

        change = float(_np.linalg.norm((cand - b_old) * gamma))
        current = current.copy(power_scalings=cand)
        value = cand_value
        if change <= config.tolerance * max(float(_np.linalg.norm(b_old * gamma)), 1e-300):
            break

    _logger.debug("power scaling converged at objective %.6g", value)
    return current.power_scalings


def _state(b: _np.ndarray, rho: float, sched: _np.ndarray | None = None) -> TransceiverState:
    b = _np.asarray(b, dtype=_np.complex128)
    if sched is None:
        sched = _np.ones(len(b), dtype=bool)
    return TransceiverState(_np.zeros(0), sched, b, rho)


def test_project_power() -> None:
    x = _np.array([3 + 4j, 0.1j, 0.0])
    y = project_power(x, 1.0)
    assert abs(abs(y[0]) - 1) <= 1e-15
    assert abs(_np.angle(y[0]) - _np.angle(x[0])) <= 1e-15
    assert y[1] == x[1] and y[2] == 0


def test_power_update_step_hand() -> None:
    h = _np.array([1.0])
    phi = _np.array([1.0])
    st = _state(_np.array([0.8]), 1.0)
    kappa, tau = mm_coefficients(h, st, phi, 0.5)
    assert abs(kappa - 0.54) <= 1e-15 and abs(tau - 1.14) <= 1e-15

    eta = 0.64 / _math.log2(1.14 / 0.54)
    expected = (1 / 0.54) / (_math.log(2) / eta - (1 / 1.14 - 1 / 0.54))
    got = power_update_step(st, h, phi, 0.5, eta, 10.0)
    assert abs(got[0] - expected) <= 1e-12
    assert abs(expected - 0.8645) <= 1e-3

    # projection keeps the phase
    capped = power_update_step(st, h, phi, 0.5, eta, 0.25)
    assert abs(abs(capped[0]) - 0.5) <= 1e-15 and abs(capped[0].imag) <= 1e-15


def test_power_update_step_zero_weight() -> None:
    h = _np.array([1.0 + 1j, 0.5])
    phi = _np.array([0.0, 1.0])
    st = _state(_np.array([0.3, 1.0]), 1.0)
    got = power_update_step(st, h, phi, 0.5, 1.0, 10.0)
    assert got[0] == 0


def test_power_update_step_fallback() -> None:
    h = _np.array([1.0])
    phi = _np.array([1.0])
    st = _state(_np.array([0.1]), 1.0)
    fallbacks: list[int] = []
    got = power_update_step(st, h, phi, 0.5, 10.0, 4.0, fallbacks)
    assert fallbacks == [0]
    assert abs(got[0] - 2.0) <= 1e-15


def test_power_update_step_unscheduled() -> None:
    h = _np.array([1.0, 2.0])
    phi = _np.array([0.5, 0.5])
    st = _state(_np.array([0.7, 0.3 + 0.1j]), 1.0, _np.array([True, False]))
    got = power_update_step(st, h, phi, 0.1, 1.0, 10.0)
    assert got[1] == 0.3 + 0.1j


def _fixed_point_map(b: float) -> float:
    st = _state(_np.array([b]), 1.0)
    h = _np.array([1.0])
    phi = _np.array([1.0])
    eta = pprime_objective(h, st, phi, 0.5)
    return float(power_update_step(st, h, phi, 0.5, eta, 100.0)[0].real)


def test_power_fixed_point() -> None:
    lo, hi = 0.8, 5.0
    assert _fixed_point_map(lo) > lo and _fixed_point_map(hi) < hi
    for _ in range(200):
        mid = (lo + hi) / 2
        if _fixed_point_map(mid) > mid:
            lo = mid
        else:
            hi = mid
    b = (lo + hi) / 2
    assert abs(_fixed_point_map(b) - b) <= 1e-12


def _random_instance(
    rng: _np.random.Generator, k: int
) -> tuple[_np.ndarray, _np.ndarray, TransceiverState, SystemParams]:
    h = (rng.normal(size=k) + 1j * rng.normal(size=k)) * 0.5
    phi = rng.dirichlet(_np.ones(k))
    power_cap = 4.0
    rho = 1.0
    # start from the phase-aligned inversion clipped to the cap
    b = project_power(_np.conj(h) / _np.abs(h) ** 2 * phi / rho, power_cap)
    params = SystemParams(5e9, float(rng.uniform(0.01, 0.2)), power_cap)
    return h, phi, _state(b, rho), params


def test_tune_power_monotone() -> None:
    rng = _np.random.default_rng(9)
    cfg = SolverConfig(k_min=1)
    for _ in range(50):
        h, phi, st, params = _random_instance(rng, 4)
        before = pprime_objective(h, st, phi, params.noise_power)
        if not _math.isfinite(before):
            continue
        trace = SolveTrace()
        b = tune_power(st, h, phi, params, cfg, trace)
        after = pprime_objective(h, st.copy(power_scalings=b), phi, params.noise_power)
        assert after <= before + 1e-9
        etas = trace.dinkelbach
        assert all(later <= earlier + 1e-9 for earlier, later in zip(etas, etas[1:]))
        assert _np.all(_np.abs(b) ** 2 <= params.power_cap * (1 + 1e-12))


def test_tune_power_single_device() -> None:
    h = _np.array([1.0])
    phi = _np.array([1.0])
    st = _state(_np.array([0.8]), 1.0)
    params = SystemParams(5e9, 0.5, 1.0)
    before = pprime_objective(h, st, phi, 0.5)
    b = tune_power(st, h, phi, params, SolverConfig(k_min=1))
    assert pprime_objective(h, st.copy(power_scalings=b), phi, 0.5) <= before


def test_tune_power_grid_oracle() -> None:
    rng = _np.random.default_rng(12)
    cfg = SolverConfig(k_min=1, power_iters=500, tolerance=1e-12)
    radii = _np.linspace(0, 2.0, 201)[1:]
    for _ in range(20):
        h, phi, st, params = _random_instance(rng, 2)
        sigma2 = params.noise_power
        if not _math.isfinite(pprime_objective(h, st, phi, sigma2)):
            continue
        b = tune_power(st, h, phi, params, cfg)
        ours = pprime_objective(h, st.copy(power_scalings=b), phi, sigma2)

        # objective on the aligned-phase grid, vectorized over both radii
        g = st.receive_scale * h
        phase = _np.conj(g) * phi / _np.abs(_np.conj(g) * phi)
        r1, r2 = _np.meshgrid(radii, radii, indexing="ij")
        c1 = g[0] * phase[0] * r1
        c2 = g[1] * phase[1] * r2
        noise = sigma2 * st.receive_scale**2
        tau = _np.abs(c1) ** 2 + _np.abs(c2) ** 2 + noise
        kappa = _np.abs(c1 - phi[0]) ** 2 + _np.abs(c2 - phi[1]) ** 2 + noise
        snr = tau / kappa
        with _np.errstate(divide="ignore", invalid="ignore"):
            obj = _np.where(snr > 1, (r1**2 + r2**2) / _np.log2(snr), _np.inf)
        grid_best = float(_np.min(obj))
        assert ours <= grid_best * 1.02


def test_tune_power_infeasible_start() -> None:
    h = _np.array([1.0])
    phi = _np.array([1.0])
    st = _state(_np.array([0.1]), 1.0)
    try:
        tune_power(st, h, phi, SystemParams(5e9, 0.5, 1.0), SolverConfig(k_min=1))
    except InfeasibleFailure as exc:
        assert str(exc) == "infeasible start: computation SNR <= 1"
    else:
        assert False
