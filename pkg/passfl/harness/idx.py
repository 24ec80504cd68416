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

"""Reader for MNIST-style IDX image and label files, optionally gzip-compressed."""

import gzip as _gzip
import logging as _logging
import os as _os
import struct as _struct

import numpy as _np

from ..failure import ParsingFailure
from ..fl.data import Dataset

_logger = _logging.getLogger("passfl.harness.idx")

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
GZIP_PREFIX = b"\x1f\x8b"


class IDXFailure(ParsingFailure):
    pass


class WrongMagic(IDXFailure):
    pass


class TruncatedFile(IDXFailure):
    pass


class CountMismatch(IDXFailure):
    pass


def read_bytes(path: str | _os.PathLike[str]) -> bytes:
    with open(path, "rb") as f:
        data = f.read()
    if data.startswith(GZIP_PREFIX):
        data = _gzip.decompress(data)
    return data


def _header(data: bytes, magic: int, dims: int, what: str) -> tuple[int, ...]:
    if len(data) < 4:
        raise TruncatedFile("truncated %s header: %d bytes", what, len(data))
    (got,) = _struct.unpack(">I", data[:4])
    if got != magic:
        raise WrongMagic("wrong magic 0x%08x in %s file, expected 0x%08x", got, what, magic)
    size = 4 * (dims + 1)
    if len(data) < size:
        raise TruncatedFile("truncated %s header: %d bytes", what, len(data))
    return _struct.unpack(">%dI" % (dims,), data[4:size])


def _payload(data: bytes, offset: int, count: int, what: str) -> _np.ndarray:
    body = data[offset:]
    if len(body) < count:
        raise TruncatedFile("truncated %s file: expected %d bytes, got %d", what, count, len(body))
    if len(body) > count:
        raise IDXFailure("%d bytes of trailing data in %s file", len(body) - count, what)
    return _np.frombuffer(body, dtype=_np.uint8)


def parse_images(data: bytes) -> _np.ndarray:
    """Images as `(count, rows * cols)` floats in `[0, 1]`."""
    count, rows, cols = _header(data, IMAGES_MAGIC, 3, "images")
    pixels = _payload(data, 16, count * rows * cols, "images")
    res: _np.ndarray = pixels.reshape(count, rows * cols).astype(_np.float32) / 255
    return res


def parse_labels(data: bytes) -> _np.ndarray:
    (count,) = _header(data, LABELS_MAGIC, 1, "labels")
    labels = _payload(data, 8, count, "labels")
    if count > 0 and labels.max() > 9:
        raise IDXFailure("label %d out of range", int(labels.max()))
    return labels.astype(_np.int64)


def load_mnist_idx(
    images_path: str | _os.PathLike[str], labels_path: str | _os.PathLike[str]
) -> Dataset:
    try:
        images = parse_images(read_bytes(images_path))
    except IDXFailure as exc:
        raise exc.elaborate("while reading %s", images_path)
    try:
        labels = parse_labels(read_bytes(labels_path))
    except IDXFailure as exc:
        raise exc.elaborate("while reading %s", labels_path)
    if len(images) != len(labels):
        raise CountMismatch(
            "%s has %d images but %s has %d labels",
            images_path,
            len(images),
            labels_path,
            len(labels),
        )
    _logger.info("loaded %d images of dimension %d", len(images), images.shape[1])
    return Dataset(images, labels)


def _images_fixture(pixels: list[list[int]], rows: int, cols: int) -> bytes:
    res = _struct.pack(">IIII", IMAGES_MAGIC, len(pixels), rows, cols)
    for img in pixels:
        res += bytes(img)
    return res


def _labels_fixture(labels: list[int]) -> bytes:
    return _struct.pack(">II", LABELS_MAGIC, len(labels)) + bytes(labels)


def test_load_fixture() -> None:
    import tempfile as _tempfile

    first = [0, 255, 51, 102]
    second = [255, 0, 0, 1]
    with _tempfile.TemporaryDirectory() as tmp:
        images = _os.path.join(tmp, "images.idx")
        labels = _os.path.join(tmp, "labels.idx.gz")
        with open(images, "wb") as f:
            f.write(_images_fixture([first, second], 2, 2))
        with open(labels, "wb") as f:
            f.write(_gzip.compress(_labels_fixture([7, 0])))

        data = load_mnist_idx(images, labels)
        assert len(data) == 2 and data.dimension == 4
        assert _np.array_equal(data.features[0], _np.array(first, dtype=_np.float32) / 255)
        assert _np.array_equal(data.features[1], _np.array(second, dtype=_np.float32) / 255)
        assert list(data.labels) == [7, 0]

        try:
            load_mnist_idx(labels, labels)
        except WrongMagic as exc:
            assert "wrong magic" in str(exc) and "labels.idx.gz" in str(exc)
        else:
            assert False

        short = _os.path.join(tmp, "short.idx")
        with open(short, "wb") as f:
            f.write(_labels_fixture([1]))
        try:
            load_mnist_idx(images, short)
        except CountMismatch:
            pass
        else:
            assert False


def test_parse_edge_cases() -> None:
    empty = parse_images(_images_fixture([], 28, 28))
    assert empty.shape == (0, 784)
    assert len(parse_labels(_labels_fixture([]))) == 0

    for data in [_images_fixture([[1, 2, 3, 4]], 2, 2)[:-1], b"\x00\x00\x08"]:
        try:
            parse_images(data)
        except TruncatedFile:
            pass
        else:
            assert False

    # a short file of the other kind is still recognised by its magic
    for data in [_labels_fixture([1, 2, 3]), _labels_fixture([])]:
        try:
            parse_images(data)
        except WrongMagic:
            pass
        else:
            assert False
    try:
        parse_labels(_images_fixture([], 1, 1)[:6])
    except WrongMagic:
        pass
    else:
        assert False

    try:
        parse_labels(_labels_fixture([3, 12]))
    except IDXFailure as exc:
        assert not isinstance(exc, TruncatedFile)
    else:
        assert False
