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

"""Element placement: the relaxed closed-form target and Gauss-Seidel grid sweeps towards it."""

import dataclasses as _dc
import logging as _logging
import math as _math
import typing as _t

import numpy as _np

from ..channel import Scenario, SystemParams, channel_vector, element_terms, norm_bound_A
from ..failure import DegenerateFailure, InvalidArgument
from ..metrics import TransceiverState
from .common import SolverConfig, SolveTrace

_logger = _logging.getLogger("passfl.optimizer.placement")

ChannelEvaluator = _t.Callable[[_np.ndarray], _np.ndarray]


@_dc.dataclass(frozen=True, eq=False)
class RelaxedTarget:
    rho: float
    target: _np.ndarray
    budget: float


def closed_form_target(phi: _np.ndarray, budget: float) -> RelaxedTarget:
    """Maximizer of the relaxed SNR over `||v|| <= budget` and real `rho >= 0`."""
    phi = _np.asarray(phi, dtype=_np.float64)
    pnorm = float(_np.linalg.norm(phi))
    if pnorm == 0:
        raise DegenerateFailure("degenerate weights")
    if not budget > 0:
        raise InvalidArgument("norm budget must be positive, got %r", budget)
    return RelaxedTarget(pnorm / budget, (budget / pnorm) * phi.astype(_np.complex128), budget)


def relaxed_objective(v: _np.ndarray, rho: float, phi: _np.ndarray, noise_power: float) -> float:
    """`(||rho v||^2 + sigma^2 rho^2) / (||rho v - phi||^2 + sigma^2 rho^2)`."""
    noise = noise_power * rho**2
    num = float(_np.sum(_np.abs(rho * v) ** 2)) + noise
    den = float(_np.sum(_np.abs(rho * v - phi) ** 2)) + noise
    return num / den


def norm_budget(params: SystemParams, scenario: Scenario, state: TransceiverState) -> float:
    """`Q = sqrt(A) ||B~||` over the scheduled devices, with the operator norm of `B~`."""
    sched = list(state.scheduled)
    a = norm_bound_A(
        params,
        len(state.positions),
        [scenario.devices[k] for k in sched],
        scenario.waveguide.altitude,
    )
    return _math.sqrt(a) * float(_np.max(_np.abs(state.power_scalings[sched])))


def placement_residual(
    positions: _np.ndarray, state: TransceiverState, v: _np.ndarray, channel: ChannelEvaluator
) -> float:
    """`||Gamma B h(l) - v||` over the scheduled devices."""
    sched = list(state.scheduled)
    h = channel(positions)
    return float(_np.linalg.norm(state.power_scalings[sched] * h[sched] - v))


def grid_minimize(
    f: _t.Callable[[_np.ndarray], _np.ndarray],
    lo: float,
    hi: float,
    incumbent: float,
    step: float,
    refinements: int,
) -> tuple[float, float]:
    """Grid search of `f` over `[lo, hi]` with `refinements` local passes at a quarter of the step.

    The `incumbent` is always a candidate and wins ties, so the result is
    never worse than it.
    """
    if hi <= lo:
        return incumbent, float(f(_np.array([incumbent]))[0])

    count = int(_math.floor((hi - lo) / step)) + 1
    cands = _np.concatenate([[incumbent], lo + step * _np.arange(count), [hi]])
    cands = _np.clip(cands, lo, hi)
    cands[0] = incumbent
    values = f(cands)
    i = int(_np.argmin(values))
    best, best_value = float(cands[i]), float(values[i])

    sub = step
    for _ in range(refinements):
        sub /= 4
        local = _np.clip(best + sub * _np.arange(-4, 5), lo, hi)
        cands = _np.concatenate([[best], local])
        values = f(cands)
        i = int(_np.argmin(values))
        best, best_value = float(cands[i]), float(values[i])
    return best, best_value


def tune_pass(
    scenario: Scenario,
    params: SystemParams,
    state: TransceiverState,
    config: SolverConfig,
    trace: SolveTrace | None = None,
) -> tuple[_np.ndarray, float]:
    """Set `rho` from the relaxed target and sweep element positions towards it.

    Returns new positions and the new receive scale.
    """
    wg = scenario.waveguide.with_positions(state.positions)
    wg.check_feasible(params.min_spacing)

    sched = list(state.scheduled)
    if len(sched) == 0:
        raise DegenerateFailure("empty schedule")
    devices = [scenario.devices[k] for k in sched]
    b = state.power_scalings[sched]
    budget = norm_budget(params, scenario, state)
    if budget == 0:
        raise DegenerateFailure("zero norm budget: no scheduled device reaches the server")
    target = closed_form_target(scenario.weights[sched], budget)
    v = target.target

    def evaluate(pos: _np.ndarray) -> _np.ndarray:
        return channel_vector(params, wg.with_positions(pos), scenario.devices)

    n = len(state.positions)
    altitude = wg.altitude
    length = wg.length
    delta = params.min_spacing
    step = config.resolved_grid_step(params)
    positions = state.positions.copy()

    residual = placement_residual(positions, state, v, evaluate)
    if trace is not None:
        trace.placement_residuals.append(residual)
    tol = config.tolerance * budget

    sweeps = 0
    while residual > tol and sweeps < config.placement_iters:
        before = positions.copy()
        terms = b[:, None] * element_terms(params, altitude, devices, positions)
        for i in range(n):
            lo = 0.0 if i == 0 else positions[i - 1] + delta
            hi = length if i == n - 1 else positions[i + 1] - delta
            rest = terms.sum(axis=1) - terms[:, i]

            def f(cands: _np.ndarray) -> _np.ndarray:
                moved = b[:, None] * element_terms(params, altitude, devices, cands)
                res: _np.ndarray = _np.linalg.norm(rest[:, None] + moved - v[:, None], axis=0)
                return res

            best, _ = grid_minimize(f, lo, hi, positions[i], step, config.grid_refinements)
            if best != positions[i]:
                positions[i] = best
                moved = element_terms(params, altitude, devices, positions[i : i + 1])
                terms[:, i] = b * moved[:, 0]

        sweeps += 1
        new_residual = placement_residual(positions, state, v, evaluate)
        _logger.debug("placement sweep %d: residual %.6g -> %.6g", sweeps, residual, new_residual)
        if new_residual > residual:
            positions = before
            break
        residual = new_residual
        if trace is not None:
            trace.placement_residuals.append(residual)

    return positions, target.rho


def _test_params() -> SystemParams:
    from ..channel import SPEED_OF_LIGHT

    return SystemParams(SPEED_OF_LIGHT / 0.06, 1e-12, 1e-3)


def test_closed_form_examples() -> None:
    t = closed_form_target(_np.array([1.0]), 2.0)
    assert t.rho == 0.5 and t.target[0] == 2

    t = closed_form_target(_np.array([0.6, 0.8]), 1.0)
    assert abs(t.rho - 1) <= 1e-12
    assert _np.allclose(t.target, [0.6, 0.8], rtol=1e-12, atol=0)
    assert abs(_np.linalg.norm(t.target) - t.budget) <= 1e-12

    try:
        closed_form_target(_np.zeros(3), 1.0)
    except DegenerateFailure as exc:
        assert str(exc) == "degenerate weights"
    else:
        assert False


def _best_along_direction(phi: _np.ndarray, q: float, sigma2: float, rhos: _np.ndarray) -> float:
    """Grid maximum of the relaxed objective with `v` co-linear to `phi`."""
    zetas = _np.linspace(0, q, 101)
    a = rhos[:, None] * zetas[None, :]
    p = float(_np.linalg.norm(phi))
    num = a**2 + sigma2 * rhos[:, None] ** 2
    den = (a - p) ** 2 + sigma2 * rhos[:, None] ** 2
    return float(_np.max(num / den))


def test_closed_form_brute_force() -> None:
    phi = _np.array([0.3, 0.7])
    q, sigma = 1.5, 0.3
    t = closed_form_target(phi, q)
    best = relaxed_objective(t.target, t.rho, phi, sigma**2)

    grid_best = _best_along_direction(phi, q, sigma**2, _np.arange(1e-3, 20, 1e-2))
    assert grid_best <= best * (1 + 1e-12)

    # full norm along `phi` is where the maximum lives
    rhos = _np.arange(1e-3, 20, 1e-4)
    a = q * rhos
    pnorm = float(_np.linalg.norm(phi))
    line = (a**2 + sigma**2 * rhos**2) / ((a - pnorm) ** 2 + sigma**2 * rhos**2)
    assert float(_np.max(line)) >= best * (1 - 1e-6)

    # arbitrary directions and phases never beat the closed form
    rng = _np.random.default_rng(0)
    coarse = _np.linspace(1e-3, 20, 400)
    for _ in range(200):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v *= q * float(rng.uniform()) / _np.linalg.norm(v)
        for rho in coarse:
            assert relaxed_objective(v, float(rho), phi, sigma**2) <= best * (1 + 1e-12)


def test_closed_form_value() -> None:
    rng = _np.random.default_rng(1)
    rhos = _np.linspace(1e-3, 20, 2000)
    for i in range(200):
        k = [1, 2, 4][i % 3]
        phi = rng.dirichlet(_np.ones(k))
        sigma = float(rng.uniform(0.05, 1.0))
        # both `Q > sigma` and `Q <= sigma`
        q = sigma * float(rng.uniform(0.2, 5.0))
        t = closed_form_target(phi, q)
        value = relaxed_objective(t.target, t.rho, phi, sigma**2)
        expected = 1 + q**2 / sigma**2
        assert abs(value - expected) <= 1e-10 * expected
        assert _best_along_direction(phi, q, sigma**2, rhos) <= value * (1 + 1e-10)


def test_grid_minimize() -> None:
    def f(x: _np.ndarray) -> _np.ndarray:
        res: _np.ndarray = (x - 0.37) ** 2
        return res

    best, value = grid_minimize(f, 0.0, 1.0, 0.9, 0.1, 2)
    assert abs(best - 0.37) <= 0.1 / 16
    assert value <= f(_np.array([0.4]))[0]

    # the incumbent wins ties
    best, _ = grid_minimize(lambda x: _np.zeros(len(x)), 0.0, 1.0, 0.55, 0.1, 2)
    assert best == 0.55

    # an empty box leaves the incumbent
    best, _ = grid_minimize(f, 0.5, 0.5, 0.5, 0.1, 2)
    assert best == 0.5


def test_placement_residual_examples() -> None:
    from ..channel import Device, Waveguide

    p = _test_params()
    wg = Waveguide(20.0, 4.0, _np.array([10.0]))
    dev = Device(10.0, 3.0)

    def evaluate(pos: _np.ndarray) -> _np.ndarray:
        return channel_vector(p, wg.with_positions(pos), [dev])

    b = 0.02 - 0.01j
    st = TransceiverState(wg.positions, [True], [b], 1.0)
    h = evaluate(wg.positions)
    assert placement_residual(wg.positions, st, b * h, evaluate) == 0

    st0 = TransceiverState(wg.positions, [False], [b], 1.0)
    assert placement_residual(wg.positions, st0, _np.zeros(0), evaluate) == 0

    v = _np.array([1e-5 + 2e-5j])
    pos = _np.array([7.0])
    dist = _math.sqrt(9 + 9 + 16)
    h1 = p.aperture_coeff * _np.exp(-1j * p.wavenumber * (dist + p.reflective_index * 7.0)) / dist
    assert abs(placement_residual(pos, st, v, evaluate) - abs(b * h1 - v[0])) <= 1e-18


def _scenario(rng: _np.random.Generator, k: int, n: int, length: float) -> Scenario:
    from ..channel import Device, Waveguide

    phi = rng.dirichlet(_np.ones(k))
    devices = tuple(
        Device(float(rng.uniform(0, length)), float(rng.uniform(-length / 2, length / 2)), weight=w)
        for w in phi
    )
    return Scenario(devices, Waveguide.uniform(length, 5.0, n))


def test_tune_pass_exhaustive_single_element() -> None:
    p = _test_params()
    rng = _np.random.default_rng(2)
    cfg = SolverConfig(k_min=1)
    step = cfg.resolved_grid_step(p)
    for _ in range(5):
        sc = _scenario(rng, 1, 1, 10.0)
        b = _math.sqrt(p.power_cap) * _np.exp(1j * rng.uniform(0, 2 * _math.pi, size=1))
        st = TransceiverState(sc.waveguide.positions, [True], b, 1.0)
        positions, rho = tune_pass(sc, p, st, cfg)

        budget = norm_budget(p, sc, st)
        t = closed_form_target(sc.weights, budget)
        assert rho == t.rho

        def evaluate(pos: _np.ndarray) -> _np.ndarray:
            return channel_vector(p, sc.waveguide.with_positions(pos), sc.devices)

        grid = _np.concatenate([step * _np.arange(int(10.0 / step) + 1), [10.0]])
        exhaustive = min(placement_residual(_np.array([c]), st, t.target, evaluate) for c in grid)
        ours = placement_residual(positions, st, t.target, evaluate)
        assert ours <= exhaustive * (1 + 1e-9)
        assert 0 <= positions[0] <= 10.0


def test_tune_pass_at_target() -> None:
    from ..channel import Device, Waveguide

    p = _test_params()
    wg = Waveguide(20.0, 4.0, _np.array([10.0]))
    sc = Scenario((Device(10.0, 3.0),), wg)
    h = channel_vector(p, wg, sc.devices)[0]
    b = _math.sqrt(p.power_cap) * _np.conj(h) / abs(h)
    st = TransceiverState(wg.positions, [True], [b], 1.0)
    trace = SolveTrace()
    positions, _ = tune_pass(sc, p, st, SolverConfig(k_min=1), trace)
    assert _np.array_equal(positions, wg.positions)
    assert trace.placement_residuals[0] <= 1e-6 * norm_budget(p, sc, st)
    assert len(trace.placement_residuals) == 1


def test_tune_pass_monotone() -> None:
    p = _test_params()
    rng = _np.random.default_rng(3)
    cfg = SolverConfig(k_min=1, placement_iters=4)
    for _ in range(100):
        sc = _scenario(rng, 4, 8, 10.0)
        b = _np.sqrt(p.power_cap * rng.uniform(0.1, 1, size=4)) * _np.exp(
            1j * rng.uniform(0, 2 * _math.pi, size=4)
        )
        sched = rng.uniform(size=4) < 0.8
        sched[0] = True
        st = TransceiverState(sc.waveguide.positions, sched, b, 1.0)
        trace = SolveTrace()
        positions, _ = tune_pass(sc, p, st, cfg, trace)
        res = trace.placement_residuals
        assert all(later <= earlier for earlier, later in zip(res, res[1:]))
        assert sc.waveguide.with_positions(positions).is_feasible(p.min_spacing)


def test_tune_pass_empty_schedule() -> None:
    p = _test_params()
    sc = _scenario(_np.random.default_rng(4), 2, 4, 10.0)
    st = TransceiverState(sc.waveguide.positions, [False, False], [0.01, 0.01], 1.0)
    try:
        tune_pass(sc, p, st, SolverConfig(k_min=1))
    except DegenerateFailure as exc:
        assert str(exc) == "empty schedule"
    else:
        assert False
