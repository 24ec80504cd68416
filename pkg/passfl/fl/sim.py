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

"""FedAvg rounds whose uplink aggregation goes through the analog over-the-air channel.

Every device standardizes its local statistic with statistics pooled over
the scheduled set (shared over an error-free control channel), all
scheduled devices transmit every entry simultaneously, and the server
rescales the received superposition back.  The `ideal` backend runs the
very same pipeline with a noiseless, perfectly aligned superposition.
"""

import concurrent.futures as _cf
import dataclasses as _dc
import logging as _logging
import math as _math
import typing as _t

import numpy as _np
import torch as _torch

from ..channel import (
    MimoArray,
    Scenario,
    SystemParams,
    channel_matrix_mimo,
    channel_vector,
)
from ..failure import InfeasibleFailure, InvalidArgument, check_lengths
from ..metrics import AirCompMetrics, TransceiverState, ideal_aggregate, noisy_aggregate
from ..optimizer import SolverConfig, effective_channel, joint_optimize, optimize_mimo_baseline
from .data import Dataset
from .models import ARCHITECTURES, Model, build_model, evaluate

_logger = _logging.getLogger("passfl.fl.sim")

STD_FLOOR = 1e-8
BACKENDS = ["pass", "mimo", "ideal"]


def parse_backend(name: str) -> tuple[str, int | None]:
    """Split `mimo:M` into the backend and its antenna count, other names carry no count."""
    backend, sep, count = name.partition(":")
    if backend not in BACKENDS:
        raise InvalidArgument(
            "unknown backend `%s`, expected one of %s or `mimo:M`", name, BACKENDS
        )
    if not sep:
        return backend, None
    if backend != "mimo" or not count.isdigit() or int(count) < 1:
        raise InvalidArgument("bad backend `%s`, only `mimo:M` with M >= 1 takes a size", name)
    return backend, int(count)


LossFunction = _t.Callable[[_torch.nn.Module, _torch.Tensor, _torch.Tensor], _torch.Tensor]


@_dc.dataclass(frozen=True)
class NormalizationStats:
    mean: float
    std: float


def normalize(s: _np.ndarray) -> tuple[_np.ndarray, NormalizationStats]:
    """Zero mean and unit variance entries, the standard deviation floored at `STD_FLOOR`."""
    s = _np.asarray(s, dtype=_np.float64)
    stats = NormalizationStats(float(_np.mean(s)), max(float(_np.std(s)), STD_FLOOR))
    return standardize(s, stats), stats


def standardize(s: _np.ndarray, stats: NormalizationStats) -> _np.ndarray:
    res: _np.ndarray = (_np.asarray(s, dtype=_np.float64) - stats.mean) / stats.std
    return res


def pooled_stats(
    stats: _t.Sequence[NormalizationStats | None], phi: _np.ndarray, gamma: _np.ndarray
) -> NormalizationStats:
    """Mean and deviation of the `phi`-weighted mixture over the scheduled devices."""
    sched = [k for k in range(len(stats)) if gamma[k] != 0]
    if len(sched) == 0:
        raise InvalidArgument("no scheduled device to pool statistics over")
    if len(sched) == 1:
        single = stats[sched[0]]
        assert single is not None
        return single

    w = _np.array([phi[k] for k in sched], dtype=_np.float64)
    w = w / _np.sum(w)
    means = _np.array([_t.cast(NormalizationStats, stats[k]).mean for k in sched])
    stds = _np.array([_t.cast(NormalizationStats, stats[k]).std for k in sched])
    mean = float(w @ means)
    var = float(w @ (stds**2 + means**2)) - mean**2
    return NormalizationStats(mean, max(_math.sqrt(max(var, 0.0)), STD_FLOOR))


def denormalize(
    aggregate: _np.ndarray,
    stats: _t.Sequence[NormalizationStats | None],
    phi: _np.ndarray,
    gamma: _np.ndarray,
) -> _np.ndarray:
    """Rescale a received `sum_S phi_k z_k` to the renormalized weighted average."""
    pooled = pooled_stats(stats, phi, gamma)
    total = float(_np.sum(_np.asarray(phi) * _np.asarray(gamma)))
    if not total > 0:
        raise InvalidArgument("scheduled devices carry no weight")
    res: _np.ndarray = pooled.std * _np.asarray(aggregate) / total + pooled.mean
    return res


def aggregate_statistics(
    statistics: _np.ndarray,
    phi: _np.ndarray,
    state: TransceiverState,
    channel: _np.ndarray | None,
    noise_power: float,
    rng: _np.random.Generator,
) -> tuple[_np.ndarray, float]:
    """Weighted average of the scheduled rows of `statistics` as seen by the server.

    With `channel = None` the superposition is the noiseless `sum phi_k z_k`.
    Returns the estimate and the empirical per-entry error of the normalized
    aggregate.
    """
    statistics = _np.asarray(statistics, dtype=_np.float64)
    k = state.device_count
    check_lengths("aggregate_statistics", k, statistics=statistics, phi=phi)
    gamma = state.gamma
    stats: list[NormalizationStats | None] = [
        normalize(statistics[i])[1] if gamma[i] != 0 else None for i in range(k)
    ]
    pooled = pooled_stats(stats, phi, gamma)
    z = _np.zeros_like(statistics)
    for i in state.scheduled:
        z[i] = standardize(statistics[i], pooled)

    theta = ideal_aggregate(phi, gamma, z)
    if channel is None:
        received = theta
        mse = 0.0
    else:
        noisy = noisy_aggregate(channel, state, z, noise_power, rng)
        mse = float(_np.mean(_np.abs(noisy - theta) ** 2))
        received = noisy.real
    return denormalize(received, stats, phi, gamma), mse


def _cross_entropy(
    module: _torch.nn.Module, features: _torch.Tensor, labels: _torch.Tensor
) -> _torch.Tensor:
    res: _torch.Tensor = _torch.nn.functional.cross_entropy(module(features), labels)
    return res


def local_update(
    model: Model,
    dataset: Dataset,
    epochs: int,
    lr: float,
    seed: int,
    batch_size: int = 64,
    loss_fn: LossFunction | None = None,
) -> _np.ndarray:
    """Mini-batch SGD on a private copy of `model`, returns its flat parameters."""
    if len(dataset) == 0:
        raise InvalidArgument("empty local dataset")
    if epochs < 0 or lr < 0 or batch_size < 1:
        raise InvalidArgument(
            "need epochs >= 0, lr >= 0 and batch_size >= 1, got %r, %r and %r",
            epochs,
            lr,
            batch_size,
        )
    local = model.clone()
    if epochs == 0 or lr == 0:
        return local.get_flat()

    if loss_fn is None:
        loss_fn = _cross_entropy
    rng = _np.random.default_rng(seed)
    features = _torch.from_numpy(dataset.features)
    labels = _torch.from_numpy(dataset.labels)
    optimizer = _torch.optim.SGD(local.module.parameters(), lr=lr)
    local.module.train()
    n = len(dataset)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = _torch.from_numpy(order[start : start + batch_size])
            optimizer.zero_grad()
            loss = loss_fn(local.module, features[idx], labels[idx])
            loss.backward()
            optimizer.step()
    return local.get_flat()


@_dc.dataclass(frozen=True)
class TrainingConfig:
    architecture: str = "mlp"
    rounds: int = 20
    epochs: int = 2
    lr: float = 0.05
    batch_size: int = 64
    backend: str = "pass"
    # transmit `omega_k - omega` instead of `omega_k`
    delta_mode: bool = False
    # re-run the transceiver design every round with a fresh restart seed
    resolve_each_round: bool = False
    workers: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise InvalidArgument(
                "unknown architecture `%s`, expected one of %s", self.architecture, ARCHITECTURES
            )
        if self.backend not in BACKENDS:
            raise InvalidArgument(
                "unknown backend `%s`, expected one of %s", self.backend, BACKENDS
            )
        if self.rounds < 0 or self.epochs < 0 or self.batch_size < 1 or self.workers < 1:
            raise InvalidArgument("rounds, epochs, batch size and workers must be non-negative")
        if not self.lr >= 0:
            raise InvalidArgument("learning rate must be non-negative, got %r", self.lr)


@_dc.dataclass(frozen=True)
class Uplink:
    """A solved uplink: the transceiver state plus the scalar channels it sees."""

    backend: str
    state: TransceiverState
    channel: _np.ndarray | None
    metrics: AirCompMetrics | None


@_dc.dataclass(frozen=True)
class RoundReport:
    round: int
    backend: str
    schedule: tuple[int, ...]
    energy: float
    time: float
    snr: float
    accuracy: float
    mse: float

    @property
    def snr_db(self) -> float:
        return 10 * _math.log10(self.snr) if self.snr > 0 else -_math.inf


def prepare_uplink(
    backend: str,
    scenario: Scenario,
    params: SystemParams,
    solver: SolverConfig,
    array: MimoArray | None = None,
) -> Uplink:
    k = scenario.device_count
    if backend == "ideal":
        state = TransceiverState(
            _np.zeros(0), _np.ones(k, dtype=bool), scenario.weights.astype(_np.complex128), 1.0
        )
        return Uplink(backend, state, None, None)
    if backend == "pass":
        state, metrics, _ = joint_optimize(scenario, params, solver)
        wg = scenario.waveguide.with_positions(state.positions)
        return Uplink(backend, state, channel_vector(params, wg, scenario.devices), metrics)
    if backend == "mimo":
        if array is None:
            raise InvalidArgument("the `mimo` backend needs an antenna array")
        state, metrics, _ = optimize_mimo_baseline(scenario, params, array, solver)
        assert state.combiner is not None
        g = effective_channel(channel_matrix_mimo(params, array, scenario.devices), state.combiner)
        return Uplink(backend, state, g, metrics)
    raise InvalidArgument("unknown backend `%s`, expected one of %s", backend, BACKENDS)


def _seed(seed: int, *key: int) -> int:
    return int(_np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def run_round(
    index: int,
    model: Model,
    datasets: _t.Sequence[Dataset],
    uplink: Uplink,
    phi: _np.ndarray,
    noise_power: float,
    config: TrainingConfig,
    test_set: Dataset,
    pool: _cf.Executor | None = None,
) -> tuple[_np.ndarray, RoundReport]:
    """Local updates, one over-the-air aggregation and the global update of `model` in place."""
    state = uplink.state
    if uplink.metrics is not None and not uplink.metrics.snr > 1:
        raise InfeasibleFailure("infeasible: computation SNR <= 1")
    omega = model.get_flat()
    d = len(omega)
    sched = state.scheduled

    def work(k: int) -> _np.ndarray:
        return local_update(
            model,
            datasets[k],
            config.epochs,
            config.lr,
            _seed(config.seed, 1, index, k),
            config.batch_size,
        )

    if pool is None:
        updates = [work(k) for k in sched]
    else:
        updates = list(pool.map(work, sched))

    statistics = _np.zeros((state.device_count, d))
    for k, s in zip(sched, updates):
        statistics[k] = s - omega if config.delta_mode else s

    rng = _np.random.default_rng(_seed(config.seed, 2, index))
    estimate, mse = aggregate_statistics(statistics, phi, state, uplink.channel, noise_power, rng)
    new = omega + estimate if config.delta_mode else estimate
    model.set_flat(new)

    if uplink.metrics is None:
        energy, t, snr = 0.0, 0.0, _math.inf
    else:
        energy = d * uplink.metrics.total_energy
        t, snr = uplink.metrics.time, uplink.metrics.snr
    accuracy = evaluate(model, test_set)
    report = RoundReport(index, uplink.backend, sched, energy, t, snr, accuracy, mse)
    _logger.info(
        "round %d (%s): accuracy %.2f%%, energy %.6g J, empirical MSE %.6g",
        index,
        uplink.backend,
        report.accuracy,
        energy,
        mse,
    )
    return new, report


def train(
    scenario: Scenario,
    params: SystemParams,
    solver: SolverConfig,
    datasets: _t.Sequence[Dataset],
    test_set: Dataset,
    config: TrainingConfig,
    array: MimoArray | None = None,
) -> list[RoundReport]:
    """Run `config.rounds` FedAvg rounds over the configured uplink backend."""
    check_lengths("train", scenario.device_count, datasets=datasets)
    dims = {d.dimension for d in datasets} | {test_set.dimension}
    if len(dims) != 1:
        raise InvalidArgument("datasets disagree on the feature dimension: %s", sorted(dims))

    init_rng = _np.random.default_rng(_seed(config.seed, 0))
    model = build_model(config.architecture, dims.pop(), init_rng)
    _logger.info(
        "training %s (%d parameters) for %d rounds over the `%s` uplink",
        config.architecture,
        model.dimension,
        config.rounds,
        config.backend,
    )
    uplink = prepare_uplink(config.backend, scenario, params, solver, array)

    reports = []
    pool = _cf.ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for r in range(config.rounds):
            if r > 0 and config.resolve_each_round and config.backend != "ideal":
                refreshed = _dc.replace(solver, seed=solver.seed + r)
                uplink = prepare_uplink(config.backend, scenario, params, refreshed, array)
            _, report = run_round(
                r,
                model,
                datasets,
                uplink,
                scenario.weights,
                params.noise_power,
                config,
                test_set,
                pool,
            )
            reports.append(report)
    finally:
        if pool is not None:
            pool.shutdown()
    return reports


def test_normalize() -> None:
    z, stats = normalize(_np.full(5, 3.0))
    assert _np.all(z == 0) and stats.std == STD_FLOOR and stats.mean == 3.0

    rng = _np.random.default_rng(0)
    x = rng.normal(size=1000)
    x = (x - x.mean()) / x.std()
    z, _ = normalize(x)
    assert _np.max(_np.abs(z - x)) <= 1e-12

    z, _ = normalize(rng.normal(3.0, 7.0, size=1000))
    assert abs(z.mean()) <= 1e-9 and abs(z.var() - 1) <= 1e-6


def test_denormalize_single_device() -> None:
    s = _np.random.default_rng(1).normal(2.0, 5.0, size=100)
    z, stats = normalize(s)
    back = denormalize(z, [stats], _np.ones(1), _np.ones(1))
    assert _np.max(_np.abs(back - s)) <= 1e-9


def test_pooled_stats_weights_renormalized() -> None:
    rng = _np.random.default_rng(2)
    statistics = rng.normal(size=(4, 50)) * _np.array([[1.0], [2.0], [0.5], [3.0]])
    phi = _np.array([0.1, 0.2, 0.3, 0.4])
    st = TransceiverState(_np.zeros(0), [True, False, True, True], phi, 1.0)
    est, mse = aggregate_statistics(statistics, phi, st, None, 0.0, rng)
    w = phi * st.gamma / _np.sum(phi * st.gamma)
    assert abs(float(_np.sum(w)) - 1) <= 1e-15
    assert _np.max(_np.abs(est - w @ statistics)) <= 1e-9
    assert mse == 0.0


def test_local_update_quadratic() -> None:
    class Scalar(_torch.nn.Module):
        def __init__(self) -> None:
            super().__init__()
            self.w = _torch.nn.Parameter(_torch.zeros(1))

    def loss(module: _torch.nn.Module, _x: _torch.Tensor, _y: _torch.Tensor) -> _torch.Tensor:
        res: _torch.Tensor = ((module.w - 3) ** 2).sum()
        return res

    model = Model("custom", Scalar())
    data = Dataset(_np.zeros((4, 1)), _np.zeros(4))
    s = local_update(model, data, 1, 0.1, 0, batch_size=4, loss_fn=loss)
    assert abs(s[0] - 0.6) <= 1e-6
    assert model.get_flat()[0] == 0

    assert local_update(model, data, 0, 0.1, 0, loss_fn=loss)[0] == 0
    assert local_update(model, data, 3, 0.0, 0, loss_fn=loss)[0] == 0

    try:
        local_update(model, Dataset(_np.zeros((0, 1)), _np.zeros(0)), 1, 0.1, 0, loss_fn=loss)
    except InvalidArgument:
        pass
    else:
        assert False


def test_ota_matches_ideal_bitwise() -> None:
    rng = _np.random.default_rng(3)
    statistics = rng.normal(size=(3, 200))
    phi = _np.array([0.2, 0.3, 0.5])
    for mask in [[True, True, True], [True, False, True], [False, True, False]]:
        st = TransceiverState(_np.zeros(0), mask, phi, 1.0)
        ideal, _ = aggregate_statistics(statistics, phi, st, None, 0.0, rng)
        ota, mse = aggregate_statistics(statistics, phi, st, _np.ones(3), 0.0, rng)
        assert _np.array_equal(ideal, ota)
        assert mse == 0.0


def test_single_device_round() -> None:
    rng = _np.random.default_rng(4)
    statistics = _np.zeros((2, 30))
    statistics[1] = rng.normal(1.0, 0.2, size=30)
    phi = _np.array([0.5, 0.5])
    h = _np.array([0.3 + 0.1j, 0.7 - 0.4j])
    rho = 2.0
    b = phi / (rho * h)
    st = TransceiverState(_np.zeros(0), [False, True], b, rho)
    est, _ = aggregate_statistics(statistics, phi, st, h, 0.0, rng)
    assert _np.max(_np.abs(est - statistics[1])) <= 1e-9


def test_empirical_mse() -> None:
    from ..metrics import aggregation_mse

    rng = _np.random.default_rng(5)
    k, d = 4, 10_000
    h = rng.normal(size=k) + 1j * rng.normal(size=k)
    phi = rng.dirichlet(_np.ones(k))
    rho = 1.5
    b = phi / (rho * h) * rng.uniform(0.7, 1.3, size=k)
    st = TransceiverState(_np.zeros(0), _np.ones(k, dtype=bool), b, rho)
    sigma2 = 0.05
    statistics = rng.normal(size=(k, d))
    _, mse = aggregate_statistics(statistics, phi, st, h, sigma2, rng)
    expected = aggregation_mse(h, st, phi, sigma2)
    assert abs(mse - expected) <= 0.05 * expected


def test_mse_linear_in_noise() -> None:
    rng = _np.random.default_rng(6)
    h = _np.array([0.5 + 0.5j, -1.0j, 2.0])
    phi = _np.array([0.3, 0.3, 0.4])
    rho = 0.7
    st = TransceiverState(_np.zeros(0), [True] * 3, phi / (rho * h), rho)
    statistics = rng.normal(size=(3, 10_000))
    sigmas = _np.array([1e-3, 1e-2, 1e-1, 1.0])
    mses = [aggregate_statistics(statistics, phi, st, h, s2, rng)[1] for s2 in sigmas]
    slope = _np.polyfit(_np.log10(sigmas), _np.log10(mses), 1)[0]
    assert abs(slope - 1) <= 0.1


def test_training_config_validation() -> None:
    for bad in [{"backend": "wifi"}, {"architecture": "rnn"}, {"lr": -1.0}, {"workers": 0}]:
        try:
            TrainingConfig(**bad)  # type: ignore
        except InvalidArgument:
            pass
        else:
            assert False, bad


def _tiny_setup(
    backend: str, workers: int = 1
) -> tuple[Scenario, SystemParams, list[Dataset], Dataset, TrainingConfig]:
    from ..channel import SPEED_OF_LIGHT, Device, Waveguide
    from .data import synthetic_blobs, uniform_split

    rng = _np.random.default_rng(7)
    train_set, test_set = synthetic_blobs(rng, 400, 100, dim=16)
    parts = uniform_split(train_set, 3, rng)
    total = sum(len(p) for p in parts)
    devices = tuple(
        Device(float(rng.uniform(0, 10)), float(rng.uniform(-5, 5)), 1.0, len(p), len(p) / total)
        for p in parts
    )
    scenario = Scenario(devices, Waveguide.uniform(10.0, 5.0, 4))
    params = SystemParams(SPEED_OF_LIGHT / 0.06, 1e-12, 1e-3)
    config = TrainingConfig("logistic", 3, 1, 0.1, 32, backend, workers=workers, seed=11)
    return scenario, params, parts, test_set, config


def test_train_deterministic() -> None:
    solver = SolverConfig(k_min=2, outer_iters=3)
    sc, params, parts, test_set, config = _tiny_setup("ideal")
    first = train(sc, params, solver, parts, test_set, config)
    second = train(sc, params, solver, parts, test_set, config)
    assert first == second
    assert [r.round for r in first] == [0, 1, 2]
    assert all(r.energy == 0 and r.schedule == (0, 1, 2) for r in first)

    _, _, _, _, threaded = _tiny_setup("ideal", workers=3)
    assert train(sc, params, solver, parts, test_set, threaded) == first


def test_train_pass_backend() -> None:
    solver = SolverConfig(k_min=2, outer_iters=3)
    sc, params, parts, test_set, config = _tiny_setup("pass")
    reports = train(sc, params, solver, parts, test_set, config)
    assert len(reports) == 3
    for r in reports:
        assert r.energy > 0 and r.time > 0 and r.snr > 1
        assert 0 <= r.accuracy <= 100
        assert len(r.schedule) >= 2


def test_parse_backend() -> None:
    assert parse_backend("pass") == ("pass", None)
    assert parse_backend("mimo") == ("mimo", None)
    assert parse_backend("mimo:8") == ("mimo", 8)
    for bad in ["wifi", "mimo:", "mimo:0", "mimo:x", "pass:8", "mimo:-1", ""]:
        try:
            parse_backend(bad)
        except InvalidArgument:
            pass
        else:
            assert False, bad
