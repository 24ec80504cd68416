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

"""`Exceptions` with printable and i18n-able descriptions."""

import typing as _t


class CatastrophicFailure(Exception):
    """An `Exception` with printable and i18n-able description."""

    info: list[tuple[str, tuple[_t.Any, ...]]]

    def __init__(self, what: _t.Any, *args: _t.Any) -> None:
        super().__init__()
        if isinstance(what, CatastrophicFailure):
            self.info = list(what.info)
        else:
            self.info = [(what, args)]

    def get_message(self, gettext: _t.Callable[[str], str], separator: str = ": ") -> str:
        res = []
        for what, args in self.info:
            try:
                t = gettext(what) % args
            except Exception:
                t = f"{repr(what)} % {repr(args)}"
            res.append(t)
        res.reverse()
        return separator.join(res)

    def __str__(self) -> str:
        return self.get_message(lambda x: x)

    def elaborate(self, what: str, *args: _t.Any) -> _t.Any:
        self.info.append((what, args))
        return self

    @property
    def kind(self) -> str:
        return type(self).__name__

    def as_record(self) -> dict[str, str]:
        """Machine-readable form, as printed by the CLI on failure."""
        return {"error": str(self), "kind": self.kind}


class Failure(CatastrophicFailure):
    """A non-catastrophic `CatastrophicFailure`."""


class AssertionFailure(CatastrophicFailure, AssertionError):
    """`AssertionError`-equivalent `CatastrophicFailure`."""


class ParsingFailure(Failure, ValueError):
    """A `Failure` of parsing something."""


class ConfigFailure(ParsingFailure):
    """Experiment configuration does not satisfy its schema."""


class InvalidArgument(Failure, ValueError):
    """An argument is out of its domain."""


class DimensionFailure(InvalidArgument):
    """Vector lengths disagree."""


class InfeasibleFailure(Failure):
    """A state or problem instance violates a feasibility condition."""


class ScheduleFailure(InfeasibleFailure):
    """No device subset satisfies the scheduling constraints."""


class DegenerateFailure(Failure):
    """The problem instance collapses, e.g. zero weights or an empty schedule."""


def check_lengths(what: str, expected: int, **arrays: _t.Sized) -> None:
    """Raise `DimensionFailure` unless all `arrays` have `expected` length."""
    for name, value in arrays.items():
        if len(value) != expected:
            raise DimensionFailure(
                "%s: `%s` has length %d, expected %d", what, name, len(value), expected
            )


def test_elaborate() -> None:
    try:
        try:
            raise InfeasibleFailure("computation SNR is %.3f", 0.5)
        except CatastrophicFailure as exc:
            raise exc.elaborate("while solving cell %s", "D=50")
    except InfeasibleFailure as exc:
        assert str(exc) == "while solving cell D=50: computation SNR is 0.500"
        assert exc.as_record() == {
            "error": "while solving cell D=50: computation SNR is 0.500",
            "kind": "InfeasibleFailure",
        }


def test_check_lengths() -> None:
    check_lengths("ok", 2, h=[1, 2], phi=(3, 4))
    try:
        check_lengths("aggregation_mse", 3, h=[1, 2, 3], phi=[1])
    except DimensionFailure as exc:
        assert isinstance(exc, ValueError)
        assert "`phi` has length 1, expected 3" in str(exc)
    else:
        assert False


def test_hierarchy() -> None:
    assert issubclass(ScheduleFailure, InfeasibleFailure)
    assert issubclass(ConfigFailure, ParsingFailure)
    assert issubclass(ConfigFailure, ValueError)
    assert not issubclass(DegenerateFailure, InfeasibleFailure)
