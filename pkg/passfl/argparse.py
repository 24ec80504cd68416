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

"""An `argparse.ArgumentParser` whose `--help` documents every subcommand at once."""

import argparse as _argparse
import json as _json
import shutil as _shutil
import sys as _sys
import textwrap as _textwrap
import typing as _t
from gettext import gettext as _

USAGE_EXIT_CODE = 2

ArgumentTypeError = _argparse.ArgumentTypeError


def _wrap(text: str, width: int) -> list[str]:
    # keeps explicit line breaks and blank lines
    res: list[str] = []
    for line in text.splitlines():
        res += _textwrap.wrap(line, width) if line else [""]
    return res


class BetterHelpFormatter(_argparse.HelpFormatter):
    """Like `argparse.HelpFormatter`, but respects line breaks in descriptions and help."""

    def _fill_text(self, text: str, width: int, indent: str) -> str:
        lines = _wrap(text, width - len(indent))
        return "\n".join(indent + line if line else line for line in lines)

    def _split_lines(self, text: str, width: int) -> list[str]:
        return _wrap(text, width)


class BetterArgumentParser(_argparse.ArgumentParser):
    """`--help` and `--version` on the root parser only, with `--help` covering
    all subcommands, and usage errors reported as a JSON line on `stderr`.
    """

    def __init__(
        self,
        *args: _t.Any,
        prog: str | None = None,
        version: str | None = None,
        add_version: bool = False,
        add_help: bool = False,
        formatter_class: type[_argparse.HelpFormatter] = BetterHelpFormatter,
        **kwargs: _t.Any,
    ) -> None:
        super().__init__(
            *args, prog=prog, formatter_class=formatter_class, add_help=False, **kwargs
        )

        if version is None:
            version = "dev"
            if prog is not None:
                import importlib.metadata as meta

                try:
                    version = meta.version(prog)
                except meta.PackageNotFoundError:
                    pass
        self.version = version

        if add_version:
            self.add_argument("--version", action="version", version="%(prog)s " + version)
        if add_help:
            self.add_argument(
                "-h",
                "--help",
                action="help",
                default=_argparse.SUPPRESS,
                help=_("show this help message and exit"),
            )

    def subcommands(self) -> list[_argparse.ArgumentParser]:
        res: list[_argparse.ArgumentParser] = []
        for action in self._actions:
            if isinstance(action, _argparse._SubParsersAction):  # pylint: disable=protected-access
                for sub in action.choices.values():
                    if sub not in res:
                        res.append(sub)
        return res

    def format_help(self, width: int | None = None) -> str:
        if width is None:
            width = _shutil.get_terminal_size().columns - 2
        formatter = self.formatter_class(prog=self.prog, width=width)
        formatter.add_usage(self.usage, self._actions, self._mutually_exclusive_groups)
        formatter.add_text(self.description)
        for group in self._action_groups:
            formatter.start_section(group.title)
            formatter.add_text(group.description)
            formatter.add_arguments(group._group_actions)  # pylint: disable=protected-access
            formatter.end_section()
        formatter.add_text(self.epilog)

        res = formatter.format_help()
        for sub in self.subcommands():
            sub.formatter_class = self.formatter_class
            res += "\n" + sub.format_help()
        return res

    def error(self, message: str) -> _t.NoReturn:
        self.print_usage(_sys.stderr)
        _sys.stderr.write(_json.dumps({"error": message, "kind": "UsageError"}) + "\n")
        _sys.stderr.flush()
        _sys.exit(USAGE_EXIT_CODE)


def test_help_lists_subcommands() -> None:
    parser = BetterArgumentParser(
        prog="demo", description="Top.\n\nSecond paragraph.", add_help=True
    )
    sub = parser.add_subparsers(dest="command")
    one = sub.add_parser("one", description="First command.")
    one.add_argument("--alpha", type=int, help="the alpha")
    sub.add_parser("two", description="Second command.")

    text = parser.format_help(width=80)
    assert "Second paragraph." in text
    assert "First command." in text and "Second command." in text and "--alpha" in text
    assert text.count("usage:") == 3


def test_usage_error_is_json() -> None:
    import contextlib as _contextlib
    import io as _io

    parser = BetterArgumentParser(prog="demo")
    parser.add_argument("--n", type=int)
    err = _io.StringIO()
    with _contextlib.redirect_stderr(err):
        try:
            parser.parse_args(["--n", "x"])
        except SystemExit as exc:
            assert exc.code == USAGE_EXIT_CODE
        else:
            assert False
    record = _json.loads(err.getvalue().splitlines()[-1])
    assert record["kind"] == "UsageError" and "--n" in record["error"]
