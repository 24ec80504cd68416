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

"""Pretty, `diff`able Python-repr rendering of solver states and metrics."""

import dataclasses as _dc
import io as _io
import math as _math
import typing as _t

import numpy as _np


def _float(x: float) -> str:
    if _math.isnan(x):
        return "nan"
    if _math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.9g" % (x,)


class PyReprEncoder:
    """Writes nested values as indented Python literals.

    Containers with more than `inline` items are split one item per line.
    Dataclasses render as `Name(field=..., ...)`, `numpy` arrays as nested lists.
    """

    def __init__(self, fobj: _t.TextIO, indent: int = 2, width: int = 100, inline: int = 4) -> None:
        self.fobj = fobj
        self.indent = indent
        self.width = width
        self.inline = inline
        self.current = 0
        self.linelen = 0
        self.want_space = False
        self.want_ln = False

    def newline(self) -> None:
        if self.linelen != 0:
            self.fobj.write("\n")
            self.linelen = 0
            self.want_space = False
        self.want_ln = False

    def lexeme(self, token: str) -> None:
        if self.want_ln or (self.linelen > 0 and self.linelen + len(token) + 1 > self.width):
            self.newline()
        if self.linelen == 0:
            token = " " * self.current + token
        elif self.want_space:
            token = " " + token
        self.fobj.write(token)
        self.linelen += len(token)
        self.want_space = True

    def delim(self, token: str) -> None:
        self.want_space = False
        self.lexeme(token)

    def glue(self, token: str) -> None:
        # no space before and none after
        self.delim(token)
        self.want_space = False

    def sequence(
        self, opening: str, items: _t.Sequence[tuple[str | None, _t.Any]], closing: str
    ) -> None:
        large = len(items) > self.inline
        self.lexeme(opening)
        self.want_space = False
        self.current += self.indent
        for i, (key, value) in enumerate(items):
            if i > 0:
                self.delim(",")
            self.want_ln = large
            if key is not None:
                self.lexeme(key)
                self.glue("=" if opening.endswith("(") else ":")
                if not opening.endswith("("):
                    self.want_space = True
            self.encode(value)
        self.current -= self.indent
        self.want_ln = large
        if not large:
            self.want_space = False
            self.delim(closing)
        else:
            self.lexeme(closing)

    def encode(self, obj: _t.Any) -> None:
        if obj is None or isinstance(obj, (bool, str, bytes)):
            self.lexeme(repr(obj))
        elif isinstance(obj, (int, _np.integer)):
            self.lexeme(str(int(obj)))
        elif isinstance(obj, (float, _np.floating)):
            self.lexeme(_float(float(obj)))
        elif isinstance(obj, (complex, _np.complexfloating)):
            z = complex(obj)
            self.lexeme("complex(%s, %s)" % (_float(z.real), _float(z.imag)))
        elif isinstance(obj, _np.ndarray):
            self.encode(obj.tolist())
        elif _dc.is_dataclass(obj) and not isinstance(obj, type):
            items = [(f.name, getattr(obj, f.name)) for f in _dc.fields(obj) if f.repr]
            self.sequence(type(obj).__name__ + "(", items, ")")
        elif isinstance(obj, dict):
            self.sequence("{", [(repr(k), v) for k, v in obj.items()], "}")
        elif isinstance(obj, tuple):
            self.sequence("(", [(None, v) for v in obj], ",)" if len(obj) == 1 else ")")
        elif isinstance(obj, list):
            self.sequence("[", [(None, v) for v in obj], "]")
        else:
            self.lexeme(repr(obj))


def pyrepr_dumps(obj: _t.Any, **kwargs: _t.Any) -> str:
    buf = _io.StringIO()
    encoder = PyReprEncoder(buf, **kwargs)
    encoder.encode(obj)
    encoder.newline()
    return buf.getvalue()


def test_pyrepr_scalars() -> None:
    assert pyrepr_dumps(1) == "1\n"
    assert pyrepr_dumps(0.1) == "0.1\n"
    assert pyrepr_dumps(_math.inf) == "inf\n"
    assert pyrepr_dumps("a'b") == repr("a'b") + "\n"
    assert pyrepr_dumps(1 - 2j) == "complex(1, -2)\n"
    assert pyrepr_dumps(_np.float64(2.5)) == "2.5\n"


def test_pyrepr_containers() -> None:
    assert pyrepr_dumps([1, 2]) == "[1, 2]\n"
    assert pyrepr_dumps((1,)) == "(1,)\n"
    assert pyrepr_dumps({"a": 1}) == "{'a': 1}\n"
    assert pyrepr_dumps(_np.array([[1.0, 0.5]])) == "[[1, 0.5]]\n"
    assert pyrepr_dumps(list(range(6))) == "[\n  0,\n  1,\n  2,\n  3,\n  4,\n  5\n]\n"


def test_pyrepr_dataclass() -> None:
    @_dc.dataclass
    class Point:
        x: float
        y: float

    assert pyrepr_dumps(Point(1.0, 2.5)) == "Point(x=1, y=2.5)\n"
    text = pyrepr_dumps({"p": Point(0.0, 1.0), "n": [Point(1.0, 1.0)] * 5})
    assert text.startswith("{'p': Point(x=0, y=1), 'n': [\n    Point(x=1, y=1),\n")
    assert text.count("Point(x=1, y=1)") == 5
