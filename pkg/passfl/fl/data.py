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

"""Labelled datasets, the synthetic blob set and uniform splitting among devices."""

import dataclasses as _dc

import numpy as _np

from ..failure import DimensionFailure, InvalidArgument

CLASSES = 10


@_dc.dataclass(frozen=True, eq=False)
class Dataset:
    """Feature rows with integer class labels."""

    features: _np.ndarray
    labels: _np.ndarray

    def __post_init__(self) -> None:
        features = _np.asarray(self.features, dtype=_np.float32)
        labels = _np.asarray(self.labels, dtype=_np.int64)
        if features.ndim == 1:
            features = features.reshape(len(features), -1)
        if features.ndim != 2 or labels.ndim != 1 or len(features) != len(labels):
            raise DimensionFailure(
                "need `(n, dim)` features and `(n,)` labels, got shapes %s and %s",
                features.shape,
                labels.shape,
            )
        if len(labels) > 0 and (labels.min() < 0 or labels.max() >= CLASSES):
            raise InvalidArgument("labels must lie in [0, %d)", CLASSES)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: _np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices])


def synthetic_blobs(
    rng: _np.random.Generator,
    train_size: int = 8000,
    test_size: int = 2000,
    dim: int = 64,
    spread: float = 1.0,
) -> tuple[Dataset, Dataset]:
    """Ten Gaussian clusters with standard normal centers, as a train and a test split."""
    centers = rng.normal(size=(CLASSES, dim))
    total = train_size + test_size
    labels = rng.integers(0, CLASSES, size=total)
    features = centers[labels] + spread * rng.normal(size=(total, dim))
    data = Dataset(features, labels)
    return data.subset(_np.arange(train_size)), data.subset(_np.arange(train_size, total))


def uniform_split(dataset: Dataset, parts: int, rng: _np.random.Generator) -> list[Dataset]:
    """Shuffle, then cut into `parts` pieces whose sizes differ by at most one."""
    if parts < 1:
        raise InvalidArgument("need at least one part, got %d", parts)
    if len(dataset) < parts:
        raise InvalidArgument("cannot split %d samples among %d devices", len(dataset), parts)
    order = rng.permutation(len(dataset))
    return [dataset.subset(idx) for idx in _np.array_split(order, parts)]


def test_dataset_validation() -> None:
    data = Dataset(_np.zeros((3, 2)), [0, 9, 4])
    assert len(data) == 3 and data.dimension == 2
    assert data.features.dtype == _np.float32 and data.labels.dtype == _np.int64

    for features, labels in [(_np.zeros((3, 2)), [0, 1]), (_np.zeros((2, 2)), [0, 10])]:
        try:
            Dataset(features, labels)
        except (DimensionFailure, InvalidArgument):
            pass
        else:
            assert False


def test_synthetic_blobs() -> None:
    train, test = synthetic_blobs(_np.random.default_rng(0), 500, 100)
    assert len(train) == 500 and len(test) == 100
    assert train.dimension == 64
    assert set(_np.unique(train.labels)) <= set(range(CLASSES))

    again, _ = synthetic_blobs(_np.random.default_rng(0), 500, 100)
    assert _np.array_equal(train.features, again.features)


def test_uniform_split() -> None:
    data = Dataset(_np.arange(23, dtype=_np.float64), _np.arange(23) % 10)
    parts = uniform_split(data, 4, _np.random.default_rng(1))
    sizes = [len(p) for p in parts]
    assert sum(sizes) == 23 and max(sizes) - min(sizes) <= 1
    seen = _np.sort(_np.concatenate([p.features[:, 0] for p in parts]))
    assert _np.array_equal(seen, _np.arange(23, dtype=_np.float32))
