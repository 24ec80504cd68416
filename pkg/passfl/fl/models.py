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

"""Classifier architectures with flat parameter vectors, initialized from numpy generators."""

import copy as _copy
import dataclasses as _dc
import math as _math
import typing as _t

import numpy as _np
import torch as _torch
from torch import nn as _nn

from ..failure import DimensionFailure, InvalidArgument
from .data import Dataset

ARCHITECTURES = ["mlp", "cnn", "logistic"]
CLASSES = 10
MLP_HIDDEN = 64


@_dc.dataclass(eq=False)
class Model:
    """A `torch` module plus the architecture tag it was built from."""

    architecture: str
    module: _nn.Module

    @property
    def dimension(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    def get_flat(self) -> _np.ndarray:
        with _torch.no_grad():
            vec = _nn.utils.parameters_to_vector(self.module.parameters())
        res: _np.ndarray = vec.detach().to(_torch.float64).numpy()
        return res

    def set_flat(self, params: _np.ndarray) -> None:
        params = _np.asarray(params)
        if params.shape != (self.dimension,):
            raise DimensionFailure(
                "parameter vector of shape %s given to a model of dimension %d",
                params.shape,
                self.dimension,
            )
        if not _np.all(_np.isfinite(params)):
            raise InvalidArgument("non-finite model parameters")
        vec = _torch.from_numpy(params.astype(_np.float32))
        with _torch.no_grad():
            _nn.utils.vector_to_parameters(vec, self.module.parameters())

    def clone(self) -> "Model":
        return Model(self.architecture, _copy.deepcopy(self.module))


class _CNN(_nn.Module):
    def __init__(self, side: int) -> None:
        super().__init__()
        self.side = side
        self.features = _nn.Sequential(
            _nn.Conv2d(1, 16, 3, padding=1),
            _nn.ReLU(),
            _nn.MaxPool2d(2),
            _nn.Conv2d(16, 32, 3, padding=1),
            _nn.ReLU(),
            _nn.MaxPool2d(2),
        )
        flat = 32 * (side // 4) ** 2
        self.classifier = _nn.Sequential(
            _nn.Linear(flat, 128),
            _nn.ReLU(),
            _nn.Linear(128, CLASSES),
        )

    def forward(self, x: _torch.Tensor) -> _torch.Tensor:
        x = x.reshape(-1, 1, self.side, self.side)
        res: _torch.Tensor = self.classifier(_torch.flatten(self.features(x), 1))
        return res


def _initialize(module: _nn.Module, rng: _np.random.Generator) -> None:
    # uniform in +-1/sqrt(fan_in), in module order
    with _torch.no_grad():
        for layer in module.modules():
            if not isinstance(layer, (_nn.Linear, _nn.Conv2d)):
                continue
            fan_in = layer.weight[0].numel()
            bound = 1 / _math.sqrt(fan_in)
            for p in [layer.weight, layer.bias]:
                if p is None:
                    continue
                values = rng.uniform(-bound, bound, size=tuple(p.shape))
                p.copy_(_torch.from_numpy(values.astype(_np.float32)))


def build_model(architecture: str, input_dim: int, rng: _np.random.Generator) -> Model:
    module: _nn.Module
    if architecture == "mlp":
        module = _nn.Sequential(
            _nn.Linear(input_dim, MLP_HIDDEN), _nn.ReLU(), _nn.Linear(MLP_HIDDEN, CLASSES)
        )
    elif architecture == "logistic":
        module = _nn.Sequential(_nn.Linear(input_dim, CLASSES))
    elif architecture == "cnn":
        side = _math.isqrt(input_dim)
        if side * side != input_dim or side < 4:
            raise InvalidArgument(
                "`cnn` needs square images of side at least 4, got input dimension %d", input_dim
            )
        module = _CNN(side)
    else:
        raise InvalidArgument(
            "unknown architecture `%s`, expected one of %s", architecture, ARCHITECTURES
        )
    _initialize(module, rng)
    return Model(architecture, module)


def predict(model: Model, features: _np.ndarray) -> _np.ndarray:
    model.module.eval()
    with _torch.no_grad():
        logits = model.module(_torch.from_numpy(_np.asarray(features, dtype=_np.float32)))
    res: _np.ndarray = logits.argmax(dim=1).numpy()
    return res


def evaluate(model: Model, dataset: Dataset) -> float:
    """Classification accuracy in percent."""
    if len(dataset) == 0:
        raise InvalidArgument("cannot evaluate on an empty dataset")
    hits = predict(model, dataset.features) == dataset.labels
    return 100.0 * float(_np.mean(hits))


def test_parameter_counts() -> None:
    rng = _np.random.default_rng(0)
    expected: dict[tuple[str, int], int] = {
        ("logistic", 64): 650,
        ("mlp", 64): 64 * 64 + 64 + 64 * 10 + 10,
        ("mlp", 784): 784 * 64 + 64 + 64 * 10 + 10,
        ("cnn", 64): 160 + 4640 + 128 * 128 + 128 + 1290,
        ("cnn", 784): 160 + 4640 + 1568 * 128 + 128 + 1290,
    }
    for (arch, dim), count in expected.items():
        model = build_model(arch, dim, rng)
        assert model.dimension == count, (arch, dim)
        flat = model.get_flat()
        assert flat.shape == (count,) and _np.all(_np.isfinite(flat))


def test_initialization_deterministic() -> None:
    a = build_model("mlp", 64, _np.random.default_rng(5)).get_flat()
    b = build_model("mlp", 64, _np.random.default_rng(5)).get_flat()
    c = build_model("mlp", 64, _np.random.default_rng(6)).get_flat()
    assert _np.array_equal(a, b)
    assert not _np.array_equal(a, c)
    assert _np.max(_np.abs(a[: 64 * 64])) <= 1 / 8


def test_flat_round_trip() -> None:
    model = build_model("cnn", 64, _np.random.default_rng(1))
    params = _np.random.default_rng(2).normal(size=model.dimension).astype(_np.float32)
    model.set_flat(params.astype(_np.float64))
    assert _np.array_equal(model.get_flat(), params.astype(_np.float64))

    clone = model.clone()
    clone.set_flat(_np.zeros(model.dimension))
    assert _np.array_equal(model.get_flat(), params.astype(_np.float64))

    try:
        model.set_flat(_np.zeros(3))
    except DimensionFailure:
        pass
    else:
        assert False


def test_evaluate_pure() -> None:
    rng = _np.random.default_rng(3)
    data = Dataset(rng.normal(size=(50, 64)), rng.integers(0, 10, size=50))
    model = build_model("mlp", 64, rng)
    acc = evaluate(model, data)
    assert 0 <= acc <= 100
    assert evaluate(model, data) == acc

    try:
        build_model("resnet", 64, rng)
    except InvalidArgument as exc:
        assert "resnet" in str(exc)
    else:
        assert False
