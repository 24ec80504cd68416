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

"""Extensions for the standard `logging` module."""

import logging as _logging
import sys as _sys
import typing as _t


class CounterHandler(_logging.NullHandler):
    errors: int
    warnings: int
    infos: int
    debugs: int

    def __init__(self, level: int = _logging.DEBUG) -> None:
        super().__init__(level)
        self.errors = 0
        self.warnings = 0
        self.infos = 0
        self.debugs = 0

    def handle(self, record: _logging.LogRecord) -> bool:
        if record.levelno >= _logging.ERROR:
            self.errors += 1
        elif record.levelno >= _logging.WARNING:
            self.warnings += 1
        elif record.levelno >= _logging.INFO:
            self.infos += 1
        elif record.levelno >= _logging.DEBUG:
            self.debugs += 1
        return True

    def summary(self) -> str:
        return f"{self.errors} error(s), {self.warnings} warning(s)"


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def verbosity_level(verbosity: int) -> int:
    """Map `-v`/`-q` counts to a `logging` level, `0` being `WARNING`."""
    levels = [_logging.ERROR, _logging.WARNING, _logging.INFO, _logging.DEBUG]
    return levels[max(0, min(len(levels) - 1, verbosity + 1))]


def setup_logging(
    verbosity: int = 0, stream: _t.TextIO | None = None, logger_name: str = "passfl"
) -> CounterHandler:
    """Install a stream handler and a `CounterHandler` on the `passfl` logger tree."""
    logger = _logging.getLogger(logger_name)
    logger.setLevel(verbosity_level(verbosity))
    for h in list(logger.handlers):
        logger.removeHandler(h)

    sh = _logging.StreamHandler(_sys.stderr if stream is None else stream)
    sh.setFormatter(_logging.Formatter(LOG_FORMAT))
    logger.addHandler(sh)

    counter = CounterHandler()
    logger.addHandler(counter)
    logger.propagate = False
    return counter


def test_counter_handler() -> None:
    import io

    out = io.StringIO()
    counter = setup_logging(1, out, "passfl.test_logging")
    logger = _logging.getLogger("passfl.test_logging.child")
    logger.debug("hidden")
    logger.info("round %d", 1)
    logger.warning("fallback at device %d", 3)
    logger.error("infeasible")

    assert counter.debugs == 0
    assert counter.infos == 1
    assert counter.warnings == 1
    assert counter.errors == 1
    assert counter.summary() == "1 error(s), 1 warning(s)"
    assert "fallback at device 3" in out.getvalue()


def test_verbosity_level() -> None:
    assert verbosity_level(-5) == _logging.ERROR
    assert verbosity_level(0) == _logging.WARNING
    assert verbosity_level(1) == _logging.INFO
    assert verbosity_level(7) == _logging.DEBUG
