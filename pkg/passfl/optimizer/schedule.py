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

"""Device scheduling by step-wise select and reject on the marginal objective."""

import itertools as _itertools
import logging as _logging
import math as _math
import typing as _t

import numpy as _np

from ..failure import InvalidArgument, ScheduleFailure

_logger = _logging.getLogger("passfl.optimizer.schedule")


def marginal_G(
    subset: _t.Iterable[int],
    h: _np.ndarray,
    b: _np.ndarray,
    rho: float,
    phi: _np.ndarray,
    noise_power: float,
) -> float:
    """`sum_S |b_k|^2 / (log2(1 + sum_S C0_k) - log2(1 + sum_S C1_k))`, `inf` when infeasible."""
    if rho == 0:
        raise InvalidArgument("receive scale must be non-zero")
    idx = list(subset)
    if len(idx) == 0:
        raise InvalidArgument("empty device subset")
    hb = _np.asarray(h)[idx] * _np.asarray(b)[idx]
    c0 = float(_np.sum(_np.abs(hb) ** 2)) / noise_power
    c1 = float(_np.sum(_np.abs(hb - _np.asarray(phi)[idx] / rho) ** 2)) / noise_power
    den = _math.log2(1 + c0) - _math.log2(1 + c1)
    if not den > 0:
        return _math.inf
    return float(_np.sum(_np.abs(_np.asarray(b)[idx]) ** 2)) / den


def _best(moves: list[tuple[float, tuple[int, ...]]]) -> tuple[float, tuple[int, ...]]:
    # lowest value, then lowest device indices
    return min(moves, key=lambda m: (m[0], m[1]))


def schedule_devices(
    h: _np.ndarray,
    b: _np.ndarray,
    rho: float,
    phi: _np.ndarray,
    noise_power: float,
    k_min: int,
    exhaustive_fallback: bool = True,
) -> tuple[int, ...]:
    """Greedy drops while they strictly improve `G`, then strictly improving swaps.

    Swaps are also tried at `|S| = K_min`.  When the greedy result is
    infeasible, all subsets of size at least `K_min` are enumerated instead.
    """
    k = len(h)
    if not 1 <= k_min <= k:
        raise InvalidArgument("need 1 <= K_min <= K, got K_min = %d and K = %d", k_min, k)

    def G(s: _t.Iterable[int]) -> float:
        return marginal_G(s, h, b, rho, phi, noise_power)

    current = set(range(k))
    value = G(current)
    moved = True
    while moved:
        moved = False
        if len(current) > k_min:
            drop_value, (i,) = _best([(G(current - {i}), (i,)) for i in sorted(current)])
            if drop_value < value:
                _logger.debug("dropping device %d: G %.6g -> %.6g", i, value, drop_value)
                current.discard(i)
                value = drop_value
                moved = True
                continue

        outside = sorted(set(range(k)) - current)
        if outside:
            swaps = [
                (G((current - {i}) | {j}), (i, j)) for i in sorted(current) for j in outside
            ]
            swap_value, (i, j) = _best(swaps)
            if swap_value < value:
                _logger.debug("swapping device %d for %d: G %.6g -> %.6g", i, j, value, swap_value)
                current.discard(i)
                current.add(j)
                value = swap_value
                moved = True

    if not _math.isfinite(value):
        if not exhaustive_fallback:
            raise ScheduleFailure("no feasible schedule")
        _logger.info("greedy schedule is infeasible, enumerating all subsets")
        res, value = exhaustive_schedule(h, b, rho, phi, noise_power, k_min)
        return res
    return tuple(sorted(current))


def exhaustive_schedule(
    h: _np.ndarray,
    b: _np.ndarray,
    rho: float,
    phi: _np.ndarray,
    noise_power: float,
    k_min: int,
) -> tuple[tuple[int, ...], float]:
    """Best subset of size at least `K_min` by enumeration."""
    k = len(h)
    best: tuple[tuple[int, ...], float] | None = None
    for size in range(k, k_min - 1, -1):
        for subset in _itertools.combinations(range(k), size):
            value = marginal_G(subset, h, b, rho, phi, noise_power)
            if best is None or value < best[1]:
                best = (subset, value)
    if best is None or not _math.isfinite(best[1]):
        raise ScheduleFailure("no feasible schedule")
    return best


def _random(
    rng: _np.random.Generator, k: int
) -> tuple[_np.ndarray, _np.ndarray, float, _np.ndarray, float]:
    h = rng.normal(size=k) + 1j * rng.normal(size=k)
    rho = float(rng.uniform(0.5, 2))
    phi = rng.dirichlet(_np.ones(k))
    # near-inversion with random errors
    b = _np.conj(h) / _np.abs(h) ** 2 * phi / rho * rng.uniform(0.5, 1.5, size=k)
    b = b * _np.exp(1j * rng.normal(scale=0.3, size=k))
    return h, b, rho, phi, float(rng.uniform(0.01, 0.5))


def test_marginal_G_examples() -> None:
    h = _np.array([1.0 + 1j, 0.5, -2j])
    phi = _np.array([0.2, 0.3, 0.5])
    rho = 1.5
    b = phi / (rho * h)
    s = [0, 2]
    expected = float(_np.sum(_np.abs(b[s]) ** 2)) / _math.log2(
        1 + float(_np.sum(_np.abs(h[s] * b[s]) ** 2)) / 0.1
    )
    assert abs(marginal_G(s, h, b, rho, phi, 0.1) - expected) <= 1e-12 * expected

    assert marginal_G([0, 1, 2], h, _np.zeros(3), rho, phi, 0.1) == _math.inf

    try:
        marginal_G([0], h, b, 0.0, phi, 0.1)
    except InvalidArgument:
        pass
    else:
        assert False


def test_marginal_G_matches_objective() -> None:
    from ..metrics import TransceiverState, pprime_objective

    rng = _np.random.default_rng(21)
    for _ in range(100):
        h, b, rho, phi, sigma2 = _random(rng, 6)
        sched = rng.uniform(size=6) < 0.7
        sched[0] = True
        st = TransceiverState(_np.zeros(0), sched, b, rho)
        g = marginal_G(st.scheduled, h, b, rho, phi, sigma2)
        p = pprime_objective(h, st, phi, sigma2)
        if _math.isfinite(p):
            assert abs(g - p) <= 1e-10 * p
        else:
            assert g == _math.inf


def test_schedule_trivial() -> None:
    rng = _np.random.default_rng(0)
    h, b, rho, phi, sigma2 = _random(rng, 4)
    assert schedule_devices(h, b, rho, phi, sigma2, 4) == (0, 1, 2, 3)


def test_schedule_drops_weak_device() -> None:
    h = _np.array([1.0, 0.9j, 1e-6])
    phi = _np.array([0.4, 0.4, 0.2])
    rho = 1.0
    b = _np.array([0.4, -0.4j / 0.9, 1.0])
    sigma2 = 0.05
    res = schedule_devices(h, b, rho, phi, sigma2, 2)
    assert 2 not in res
    best, _ = exhaustive_schedule(h, b, rho, phi, sigma2, 2)
    assert res == best


def test_schedule_oracle() -> None:
    rng = _np.random.default_rng(8)
    good = 0
    for _ in range(100):
        h, b, rho, phi, sigma2 = _random(rng, 8)
        try:
            _, optimum = exhaustive_schedule(h, b, rho, phi, sigma2, 6)
        except ScheduleFailure:
            continue
        res = schedule_devices(h, b, rho, phi, sigma2, 6)
        assert len(res) >= 6
        value = marginal_G(res, h, b, rho, phi, sigma2)
        assert _math.isfinite(value)
        assert value <= marginal_G(range(8), h, b, rho, phi, sigma2)
        if value <= optimum * 1.05:
            good += 1
    assert good >= 95


def test_schedule_infeasible() -> None:
    h = _np.ones(3)
    phi = _np.array([0.3, 0.3, 0.4])
    try:
        schedule_devices(h, _np.zeros(3), 1.0, phi, 0.1, 2)
    except ScheduleFailure as exc:
        assert str(exc) == "no feasible schedule"
    else:
        assert False
