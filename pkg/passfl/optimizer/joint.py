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

"""The outer alternating loop over scheduling, placement (or combining) and power scaling."""

import logging as _logging
import math as _math
import typing as _t

import numpy as _np

from ..channel import (
    MimoArray,
    Scenario,
    SystemParams,
    channel_matrix_mimo,
    channel_vector,
    random_feasible_positions,
)
from ..failure import DegenerateFailure, InfeasibleFailure, ScheduleFailure
from ..metrics import AirCompMetrics, TransceiverState, evaluate_state, pprime_objective
from .common import OuterRecord, SolverConfig, SolveTrace
from .placement import closed_form_target, norm_budget, tune_pass
from .power import tune_power
from .schedule import schedule_devices

_logger = _logging.getLogger("passfl.optimizer.joint")

Step = tuple[str, _t.Callable[[TransceiverState], TransceiverState]]
Objective = _t.Callable[[TransceiverState], float]


def energy_per_entry(objective: float, params: SystemParams) -> float:
    """Total transmission energy of one parameter entry, `R0 / B` times the objective."""
    return params.resolution / params.bandwidth * objective


def initial_state(
    scenario: Scenario,
    params: SystemParams,
    positions: _np.ndarray | None = None,
) -> TransceiverState:
    """Everyone scheduled at full real power, `rho` from the relaxed target."""
    k = scenario.device_count
    if positions is None:
        positions = _np.array(scenario.waveguide.positions)
    b = _np.full(k, _math.sqrt(params.power_cap), dtype=_np.complex128)
    state = TransceiverState(positions, _np.ones(k, dtype=bool), b, 1.0)
    budget = norm_budget(params, scenario, state)
    if budget == 0:
        raise DegenerateFailure("zero norm budget: no device reaches the server")
    rho = closed_form_target(scenario.weights, budget).rho
    return state.copy(receive_scale=rho)


def pass_objective(scenario: Scenario, params: SystemParams) -> Objective:
    def objective(state: TransceiverState) -> float:
        wg = scenario.waveguide.with_positions(state.positions)
        h = channel_vector(params, wg, scenario.devices)
        return pprime_objective(h, state, scenario.weights, params.noise_power)

    return objective


def pass_steps(
    scenario: Scenario, params: SystemParams, config: SolverConfig, trace: SolveTrace
) -> list[Step]:
    phi = scenario.weights

    def channel(state: TransceiverState) -> _np.ndarray:
        return channel_vector(
            params, scenario.waveguide.with_positions(state.positions), scenario.devices
        )

    def schedule(state: TransceiverState) -> TransceiverState:
        subset = schedule_devices(
            channel(state),
            state.power_scalings,
            state.receive_scale,
            phi,
            params.noise_power,
            config.k_min,
        )
        trace.schedules.append(subset)
        return state.with_schedule(subset)

    def placement(state: TransceiverState) -> TransceiverState:
        positions, rho = tune_pass(scenario, params, state, config, trace)
        return state.copy(positions=positions, receive_scale=rho)

    def power(state: TransceiverState) -> TransceiverState:
        b = tune_power(state, channel(state), phi, params, config, trace)
        return state.copy(power_scalings=b)

    return [("schedule", schedule), ("placement", placement), ("power", power)]


def _record(
    trace: SolveTrace,
    iteration: int,
    step: str,
    accepted: bool,
    state: TransceiverState,
    value: float,
    params: SystemParams,
) -> None:
    numerator = float(_np.sum(state.gamma * _np.abs(state.power_scalings) ** 2))
    denominator = numerator / value if _math.isfinite(value) and value > 0 else 0.0
    residual = trace.placement_residuals[-1] if step == "placement" else None
    trace.outer.append(
        OuterRecord(
            iteration,
            step,
            accepted,
            value,
            energy_per_entry(value, params),
            numerator,
            denominator,
            state.scheduled,
            residual,
        )
    )


def alternate(
    state: TransceiverState,
    objective: Objective,
    steps: list[Step],
    params: SystemParams,
    config: SolverConfig,
    trace: SolveTrace,
) -> tuple[TransceiverState, float]:
    """Run `steps` in turn, rolling back any step that increases `objective`."""
    value = objective(state)
    _record(trace, 0, "init", True, state, value, params)
    previous = energy_per_entry(value, params)
    for it in range(1, config.outer_iters + 1):
        for name, step in steps:
            try:
                cand = step(state)
            except (InfeasibleFailure, DegenerateFailure) as exc:
                _logger.debug("iteration %d: %s step failed: %s", it, name, exc)
                continue
            cand_value = objective(cand)
            accepted = cand_value <= value
            _record(trace, it, name, accepted, cand, cand_value, params)
            if accepted:
                state, value = cand, cand_value
            else:
                _logger.debug(
                    "iteration %d: rolled back %s step, %.6g > %.6g", it, name, cand_value, value
                )

        energy = energy_per_entry(value, params)
        _logger.debug("iteration %d: energy %.6g J", it, energy)
        if _math.isfinite(energy) and _math.isfinite(previous):
            if abs(previous - energy) <= config.tolerance * previous:
                break
        previous = energy
    return state, value


def _check_problem(scenario: Scenario, params: SystemParams, config: SolverConfig) -> None:
    if scenario.device_count < config.k_min:
        raise InfeasibleFailure(
            "%d devices cannot satisfy K_min = %d", scenario.device_count, config.k_min
        )
    scenario.waveguide.check_feasible(params.min_spacing)


def joint_optimize(
    scenario: Scenario, params: SystemParams, config: SolverConfig
) -> tuple[TransceiverState, AirCompMetrics, SolveTrace]:
    """Minimize the per-entry transmission energy over placement, schedule, power and `rho`."""
    _check_problem(scenario, params, config)
    wg = scenario.waveguide
    rng = _np.random.default_rng(config.seed)
    trace = SolveTrace()
    objective = pass_objective(scenario, params)
    steps = pass_steps(scenario, params, config, trace)

    failure: InfeasibleFailure | None = None
    for attempt in range(config.restarts + 1):
        if attempt == 0:
            positions = _np.array(wg.positions)
        else:
            positions = random_feasible_positions(
                wg.length, wg.element_count, params.min_spacing, rng
            )
        try:
            state = initial_state(scenario, params, positions)
            state, value = alternate(state, objective, steps, params, config, trace)
            if not _math.isfinite(value):
                raise ScheduleFailure("no feasible schedule")
            h = channel_vector(params, wg.with_positions(state.positions), scenario.devices)
            metrics = evaluate_state(h, state, scenario.weights, params)
        except InfeasibleFailure as exc:
            failure = exc
            trace.restarts += 1
            _logger.warning("solve attempt %d failed: %s", attempt, exc)
            continue

        _logger.info(
            "PASS solution: %d devices scheduled, SNR %.4g dB, energy %.6g J per entry",
            len(state.scheduled),
            metrics.snr_db,
            metrics.total_energy,
        )
        return state, metrics, trace

    assert failure is not None
    raise failure.elaborate("after %d restart(s)", config.restarts)


def _aligned_scale(
    channels: _np.ndarray,
    state: TransceiverState,
    phi: _np.ndarray,
    combiner: _np.ndarray,
    rho: float,
) -> float:
    # least-squares `rho` for the given combiner, kept as is when nothing aligns
    u = state.gamma * (combiner.conj() @ channels) * state.power_scalings
    pg = phi * state.gamma
    overlap = float(_np.sum(pg * u.real))
    if overlap > 0:
        return float(_np.sum(pg**2)) / overlap
    return rho


def combiner_update(
    channels: _np.ndarray, state: TransceiverState, phi: _np.ndarray, noise_power: float
) -> tuple[_np.ndarray, float]:
    """Regularized least-squares combiner, normalized, with the SNR-optimal `rho`.

    Returns a unit-norm combiner `f` and the receive scale to use with it.
    """
    gamma = state.gamma
    rho = state.receive_scale if state.receive_scale > 0 else 1.0
    a = rho * channels * (gamma * state.power_scalings)[None, :]
    m = channels.shape[0]
    gram = a @ a.conj().T + noise_power * rho**2 * _np.eye(m)
    f = _np.linalg.solve(gram, a @ (phi * gamma))
    scale = float(_np.linalg.norm(f))
    if scale == 0:
        raise DegenerateFailure("zero combiner")
    f = f / scale
    return f, _aligned_scale(channels, state, phi, f, rho * scale)


def matched_combiner(
    channels: _np.ndarray, state: TransceiverState, phi: _np.ndarray, noise_power: float
) -> tuple[_np.ndarray, float]:
    """Maximum-ratio combiner matched to the weighted sum of the scheduled signals."""
    del noise_power
    f = channels @ (phi * state.gamma * state.power_scalings)
    scale = float(_np.linalg.norm(f))
    if scale == 0:
        raise DegenerateFailure("zero combiner")
    f = f / scale
    rho = state.receive_scale if state.receive_scale > 0 else 1.0
    return f, _aligned_scale(channels, state, phi, f, rho)


COMBINERS = (("mmse", combiner_update), ("matched", matched_combiner))


def effective_channel(channels: _np.ndarray, combiner: _np.ndarray) -> _np.ndarray:
    """`g_k = f^H h_k`."""
    res: _np.ndarray = combiner.conj() @ channels
    return res


def mimo_objective(channels: _np.ndarray, phi: _np.ndarray, params: SystemParams) -> Objective:
    def objective(state: TransceiverState) -> float:
        assert state.combiner is not None
        return pprime_objective(
            effective_channel(channels, state.combiner), state, phi, params.noise_power
        )

    return objective


def mimo_steps(
    channels: _np.ndarray,
    phi: _np.ndarray,
    params: SystemParams,
    config: SolverConfig,
    trace: SolveTrace,
) -> list[Step]:
    objective = mimo_objective(channels, phi, params)

    def g_of(state: TransceiverState) -> _np.ndarray:
        assert state.combiner is not None
        return effective_channel(channels, state.combiner)

    def schedule(state: TransceiverState) -> TransceiverState:
        subset = schedule_devices(
            g_of(state),
            state.power_scalings,
            state.receive_scale,
            phi,
            params.noise_power,
            config.k_min,
        )
        trace.schedules.append(subset)
        return state.with_schedule(subset)

    def combine(state: TransceiverState) -> TransceiverState:
        best: TransceiverState | None = None
        best_value = _math.inf
        for name, update in COMBINERS:
            try:
                f, rho = update(channels, state, phi, params.noise_power)
            except DegenerateFailure as exc:
                _logger.debug("%s combiner: %s", name, exc)
                continue
            cand = state.copy(combiner=f, receive_scale=rho)
            value = objective(cand)
            if best is None or value < best_value:
                best, best_value = cand, value
        if best is None:
            raise DegenerateFailure("no usable combiner")
        return best

    def power(state: TransceiverState) -> TransceiverState:
        b = tune_power(state, g_of(state), phi, params, config, trace)
        return state.copy(power_scalings=b)

    return [("schedule", schedule), ("combiner", combine), ("power", power)]


def reference_antenna(element_count: int) -> int:
    """Index of the element sitting at the array center, see `MimoArray.element_positions`."""
    return (element_count - 1) // 2


def _mimo_starts(
    channels: _np.ndarray, phi: _np.ndarray, params: SystemParams, config: SolverConfig
) -> list[tuple[str, TransceiverState]]:
    m, k = channels.shape
    b = _np.full(k, _math.sqrt(params.power_cap), dtype=_np.complex128)
    base = TransceiverState(_np.zeros(0), _np.ones(k, dtype=bool), b, 1.0)
    res = []
    for name, update in COMBINERS:
        try:
            f, rho = update(channels, base, phi, params.noise_power)
        except DegenerateFailure as exc:
            _logger.debug("no %s start: %s", name, exc)
            continue
        res.append((name, base.copy(combiner=f, receive_scale=rho)))

    if m > 1:
        # the solution of the central antenna alone, so that adding antennas never hurts
        ref = reference_antenna(m)
        try:
            sub, _, _ = _mimo_solve(channels[ref : ref + 1], phi, params, config)
        except (InfeasibleFailure, DegenerateFailure) as exc:
            _logger.debug("no reference antenna start: %s", exc)
        else:
            assert sub.combiner is not None
            f = _np.zeros(m, dtype=_np.complex128)
            f[ref] = sub.combiner[0]
            res.append(("reference antenna", sub.copy(combiner=f)))
    return res


def _mimo_solve(
    channels: _np.ndarray, phi: _np.ndarray, params: SystemParams, config: SolverConfig
) -> tuple[TransceiverState, float, SolveTrace]:
    objective = mimo_objective(channels, phi, params)
    best: tuple[TransceiverState, float, SolveTrace] | None = None
    for name, start in _mimo_starts(channels, phi, params, config):
        trace = SolveTrace()
        steps = mimo_steps(channels, phi, params, config, trace)
        state, value = alternate(start, objective, steps, params, config, trace)
        _logger.debug("%d antenna(s), %s start: objective %.6g", channels.shape[0], name, value)
        if best is None or value < best[1]:
            best = (state, value, trace)
    if best is None:
        raise DegenerateFailure("no usable combiner start")
    if not _math.isfinite(best[1]):
        raise ScheduleFailure("no feasible schedule")
    return best


def optimize_mimo_baseline(
    scenario: Scenario, params: SystemParams, array: MimoArray, config: SolverConfig
) -> tuple[TransceiverState, AirCompMetrics, SolveTrace]:
    """Same outer loop with a linear receive combiner at a conventional array.

    Every combiner start runs to convergence and the lowest energy wins.
    """
    if scenario.device_count < config.k_min:
        raise InfeasibleFailure(
            "%d devices cannot satisfy K_min = %d", scenario.device_count, config.k_min
        )
    phi = scenario.weights
    channels = channel_matrix_mimo(params, array, scenario.devices)
    try:
        state, _, trace = _mimo_solve(channels, phi, params, config)
    except InfeasibleFailure as exc:
        raise exc.elaborate("MIMO baseline")
    assert state.combiner is not None
    metrics = evaluate_state(effective_channel(channels, state.combiner), state, phi, params)
    _logger.info(
        "MIMO solution, %d antennas: %d devices scheduled, SNR %.4g dB, energy %.6g J",
        array.element_count,
        len(state.scheduled),
        metrics.snr_db,
        metrics.total_energy,
    )
    return state, metrics, trace


def _params(**kwargs: _t.Any) -> SystemParams:
    from ..channel import SPEED_OF_LIGHT

    kwargs.setdefault("noise_power", 1e-12)
    kwargs.setdefault("power_cap", 1e-3)
    return SystemParams(SPEED_OF_LIGHT / 0.06, **kwargs)


def _scenario(rng: _np.random.Generator, k: int, n: int, edge: float) -> Scenario:
    from ..channel import Device, Waveguide

    phi = _np.full(k, 1 / k)
    devices = tuple(
        Device(float(rng.uniform(0, edge)), float(rng.uniform(-edge / 2, edge / 2)), 1.0, 1, w)
        for w in phi
    )
    return Scenario(devices, Waveguide.uniform(edge, 5.0, n))


def _assert_feasible(
    scenario: Scenario, params: SystemParams, state: TransceiverState, k_min: int
) -> None:
    assert state.violations(params.power_cap, k_min) == []
    if state.combiner is None:
        assert scenario.waveguide.with_positions(state.positions).is_feasible(params.min_spacing)


def test_joint_optimize_monotone() -> None:
    p = _params()
    rng = _np.random.default_rng(30)
    cfg = SolverConfig(k_min=3, outer_iters=4, placement_iters=2, power_iters=20)
    for _ in range(50):
        sc = _scenario(rng, 4, 6, 10.0)
        state, metrics, trace = joint_optimize(sc, p, cfg)
        energies = trace.energies
        assert all(later <= earlier for earlier, later in zip(energies, energies[1:]))
        _assert_feasible(sc, p, state, 3)
        assert len(trace.outer) >= 1 and trace.outer[0].step == "init"
        assert abs(metrics.total_energy - energies[-1]) <= 1e-9 * metrics.total_energy


def test_joint_optimize_single_device_grid() -> None:
    from ..channel import Device, Waveguide

    p = _params()
    length = 4.0
    sc = Scenario((Device(1.3, 2.0),), Waveguide.uniform(length, 5.0, 1))
    cfg = SolverConfig(k_min=1)
    state, metrics, _ = joint_optimize(sc, p, cfg)

    # dense grid over the element position at full phase-aligned power
    cap = _math.sqrt(p.power_cap)
    best = _math.inf
    for ell in _np.arange(0, length, p.wavelength / 64):
        wg = sc.waveguide.with_positions(_np.array([ell]))
        h = channel_vector(p, wg, sc.devices)
        b = cap * _np.conj(h) / _np.abs(h)
        st = TransceiverState(wg.positions, [True], b, 1.0)
        st = st.copy(receive_scale=closed_form_target(sc.weights, norm_budget(p, sc, st)).rho)
        best = min(best, pprime_objective(h, st, sc.weights, p.noise_power))
    assert metrics.total_energy <= 1.02 * energy_per_entry(best, p)


def test_joint_optimize_noise_monotone() -> None:
    rng = _np.random.default_rng(31)
    cfg = SolverConfig(k_min=2, outer_iters=5, placement_iters=3)
    for _ in range(20):
        sc = _scenario(rng, 3, 4, 10.0)
        _, m1, _ = joint_optimize(sc, _params(noise_power=1e-12), cfg)
        _, m2, _ = joint_optimize(sc, _params(noise_power=2e-12), cfg)
        assert m2.total_energy >= m1.total_energy * (1 - 1e-9)


def test_joint_optimize_infeasible() -> None:
    p = _params()
    sc = _scenario(_np.random.default_rng(0), 2, 4, 10.0)
    try:
        joint_optimize(sc, p, SolverConfig(k_min=3))
    except InfeasibleFailure as exc:
        assert "K_min = 3" in str(exc)
    else:
        assert False

    short = _scenario(_np.random.default_rng(0), 2, 40, 1.0)
    try:
        joint_optimize(short, p, SolverConfig(k_min=1))
    except InfeasibleFailure as exc:
        assert "waveguide too short" in str(exc)
    else:
        assert False


def test_mimo_single_antenna() -> None:
    from ..channel import Device

    p = _params()
    arr = MimoArray.centered(p, 5.0, 0.0, 5.0, 1)
    dev = Device(3.0, 4.0)
    channels = channel_matrix_mimo(p, arr, [dev])
    st = TransceiverState(_np.zeros(0), [True], [_math.sqrt(p.power_cap)], 1.0)
    f, rho = combiner_update(channels, st, _np.ones(1), p.noise_power)
    g = effective_channel(channels, f)
    assert abs(_np.linalg.norm(f) - 1) <= 1e-12
    assert abs(g[0].imag) <= 1e-12 * abs(g[0]) and g[0].real > 0
    assert rho > 0


def test_mimo_effective_channel_pipeline() -> None:
    p = _params()
    rng = _np.random.default_rng(32)
    sc = _scenario(rng, 4, 4, 20.0)
    arr = MimoArray.centered(p, 10.0, 0.0, 5.0, 4)
    cfg = SolverConfig(k_min=3, outer_iters=3)
    state, _, _ = optimize_mimo_baseline(sc, p, arr, cfg)
    assert state.combiner is not None

    channels = channel_matrix_mimo(p, arr, sc.devices)
    g = effective_channel(channels, state.combiner)
    steps = dict(mimo_steps(channels, sc.weights, p, cfg, SolveTrace()))
    via_steps = steps["power"](state).power_scalings
    direct = tune_power(state, g, sc.weights, p, cfg)
    assert _np.array_equal(via_steps, direct)

    subset = schedule_devices(
        g, state.power_scalings, state.receive_scale, sc.weights, p.noise_power, cfg.k_min
    )
    assert steps["schedule"](state).scheduled == subset


def test_mimo_more_antennas() -> None:
    p = _params()
    rng = _np.random.default_rng(33)
    cfg = SolverConfig(k_min=2, outer_iters=5)
    for _ in range(20):
        sc = _scenario(rng, 3, 4, 20.0)
        res = {}
        for m in [1, 2, 8]:
            arr = MimoArray.centered(p, 10.0, 0.0, 5.0, m)
            state, metrics, trace = optimize_mimo_baseline(sc, p, arr, cfg)
            _assert_feasible(sc, p, state, 2)
            energies = trace.energies
            assert all(later <= earlier for earlier, later in zip(energies, energies[1:]))
            res[m] = metrics.total_energy
        assert res[2] <= res[1] * (1 + 1e-9)
        assert res[8] <= res[1] * (1 + 1e-9)


def test_mimo_combiner_step_never_worse() -> None:
    p = _params()
    rng = _np.random.default_rng(34)
    for _ in range(30):
        sc = _scenario(rng, 4, 4, 20.0)
        channels = channel_matrix_mimo(p, MimoArray.centered(p, 10.0, 0.0, 5.0, 4), sc.devices)
        objective = mimo_objective(channels, sc.weights, p)
        b = _np.full(4, _math.sqrt(p.power_cap), dtype=_np.complex128)
        st = TransceiverState(_np.zeros(0), rng.integers(0, 2, size=4) | [1, 0, 0, 0], b, 1.0)
        steps = dict(mimo_steps(channels, sc.weights, p, SolverConfig(k_min=1), SolveTrace()))
        out = steps["combiner"](st)
        assert out.combiner is not None and abs(_np.linalg.norm(out.combiner) - 1) <= 1e-12
        for _name, update in COMBINERS:
            f, rho = update(channels, st, sc.weights, p.noise_power)
            assert objective(out) <= objective(st.copy(combiner=f, receive_scale=rho))


def test_matched_combiner_single_device() -> None:
    from ..channel import Device

    p = _params()
    arr = MimoArray.centered(p, 5.0, 0.0, 5.0, 4)
    channels = channel_matrix_mimo(p, arr, [Device(3.0, 4.0)])
    st = TransceiverState(_np.zeros(0), [True], [_math.sqrt(p.power_cap)], 1.0)
    f, rho = matched_combiner(channels, st, _np.ones(1), p.noise_power)
    # one device: matched filtering collects the whole channel norm
    g = effective_channel(channels, f)
    assert abs(g[0] - _np.linalg.norm(channels[:, 0])) <= 1e-12 * abs(g[0])
    assert abs(rho * g[0].real * _math.sqrt(p.power_cap) - 1) <= 1e-12

    try:
        matched_combiner(channels, st.copy(power_scalings=_np.zeros(1)), _np.ones(1), 1e-12)
    except DegenerateFailure:
        pass
    else:
        assert False
