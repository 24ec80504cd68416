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

"""A tiny regex-driven parser for the textual forms used on the command line."""

import re as _re
import typing as _t

from .failure import ParsingFailure

name_re = _re.compile(r"([A-Za-z_][A-Za-z0-9_]*)")
number_re = _re.compile(r"([-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][-+]?[0-9]+)?)")
opt_whitespace_re = _re.compile(r"(\s*)")


class Parser:
    """Consumes a string from the left, failing with the whole input in the message."""

    def __init__(self, data: str) -> None:
        self.buffer = data
        self.pos = 0

    @property
    def leftovers(self) -> str:
        return self.buffer[self.pos :]

    def at_eof(self) -> bool:
        return self.pos >= len(self.buffer)

    def eof(self) -> None:
        if self.at_eof():
            return
        raise ParsingFailure(
            "while parsing %s: expected EOF, got %s", repr(self.buffer), repr(self.leftovers)
        )

    def at_string(self, s: str) -> bool:
        return self.buffer.startswith(s, self.pos)

    def opt_string(self, s: str) -> bool:
        if self.at_string(s):
            self.pos += len(s)
            return True
        return False

    def string(self, s: str) -> None:
        if self.opt_string(s):
            return
        raise ParsingFailure(
            "while parsing %s: expected %s, got %s",
            repr(self.buffer),
            repr(s),
            repr(self.leftovers),
        )

    def regex(self, regexp: _re.Pattern[str], allow_empty: bool = False) -> tuple[_t.Any, ...]:
        m = regexp.match(self.buffer, self.pos)
        if m is None or (m.end() == self.pos and not allow_empty):
            raise ParsingFailure(
                "while parsing %s: expected %s, got %s",
                repr(self.buffer),
                repr(regexp.pattern),
                repr(self.leftovers),
            )
        self.pos = m.end()
        return m.groups()

    def opt_whitespace(self) -> None:
        self.regex(opt_whitespace_re, True)

    def lexeme(self, body_re: _re.Pattern[str]) -> str:
        self.opt_whitespace()
        grp = self.regex(body_re)
        self.opt_whitespace()
        res: str = grp[0]
        return res

    def name(self) -> str:
        return self.lexeme(name_re)

    def number(self) -> float:
        return float(self.lexeme(number_re))

    def separated(self, item: _t.Callable[[], _t.Any], separator: str) -> list[_t.Any]:
        """One or more `item`s separated by `separator`."""
        res = [item()]
        while self.opt_string(separator):
            res.append(item())
        return res


def test_parser_numbers() -> None:
    p = Parser(" 10, -20 ,1e-3,.5, +2.")
    assert p.separated(p.number, ",") == [10.0, -20.0, 1e-3, 0.5, 2.0]
    p.eof()


def test_parser_failures() -> None:
    for bad in ["", "abc", "1,,2", "1 2"]:
        p = Parser(bad)
        try:
            p.separated(p.number, ",")
            p.eof()
        except ParsingFailure as exc:
            assert repr(bad) in str(exc)
        else:
            assert False, bad


def test_parser_names() -> None:
    p = Parser("P_dBm = 3")
    assert p.name() == "P_dBm"
    p.string("=")
    assert p.number() == 3.0
    assert p.at_eof()
