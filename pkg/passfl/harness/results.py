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

"""CSV tables and run manifests, written atomically."""

import csv as _csv
import io as _io
import json as _json
import logging as _logging
import math as _math
import os as _os
import sys as _sys
import typing as _t

from ..failure import Failure
from ..fl.sim import RoundReport
from .config import ExperimentConfig
from .sweep import SweepRow

_posix = _sys.platform != "win32"
if _posix:
    import fcntl as _fcntl

_logger = _logging.getLogger("passfl.harness.results")

ROUND_HEADER = ["round", "backend", "accuracy", "energy_total_J", "snr_dB", "time_s", "mse"]
SWEEP_HEADER = ["axis", "value", "backend", "repetitions", "accuracy", "energy_J", "infeasible"]
MANIFEST_VERSION = 1


class OutputFailure(Failure):
    pass


def format_float(x: float) -> str:
    return "%.6g" % (x,)


def round_rows(reports: _t.Iterable[RoundReport]) -> list[list[str]]:
    return [
        [
            str(r.round),
            r.backend,
            format_float(r.accuracy),
            format_float(r.energy),
            format_float(r.snr_db),
            format_float(r.time),
            format_float(r.mse),
        ]
        for r in reports
    ]


def sweep_rows(rows: _t.Iterable[SweepRow]) -> list[list[str]]:
    return [
        [
            r.axis,
            format_float(r.value),
            r.backend,
            str(r.repetitions),
            format_float(r.accuracy),
            format_float(r.energy),
            str(r.infeasible),
        ]
        for r in rows
    ]


def render_csv(header: list[str], rows: list[list[str]]) -> str:
    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n", quoting=_csv.QUOTE_MINIMAL)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def atomic_write(data: bytes, dst_path: str) -> None:
    """Write `data` to a `.part` file, `fsync` it, then `os.replace` it to `dst_path`.

    The target directory is `flock`ed around the replace, if possible.
    """
    dirname = _os.path.dirname(dst_path) or "."
    dst_part = dst_path + ".part"
    with open(dst_part, "wb") as f:
        f.write(data)
        f.flush()
        _os.fsync(f.fileno())

    if _posix:
        dirfd = _os.open(dirname, _os.O_RDONLY | _os.O_DIRECTORY)
        _fcntl.flock(dirfd, _fcntl.LOCK_EX)
    try:
        _os.replace(dst_part, dst_path)
        if _posix:
            _os.fsync(dirfd)
    finally:
        if _posix:
            _fcntl.flock(dirfd, _fcntl.LOCK_UN)
            _os.close(dirfd)


def make_manifest(
    config: ExperimentConfig, command: str, seeds: _t.Sequence[int], **extra: _t.Any
) -> dict[str, _t.Any]:
    """Everything needed to repeat a run: the fully resolved config, the command and the seeds."""
    res: dict[str, _t.Any] = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "seeds": list(seeds),
        "config": config.model_dump(mode="json"),
    }
    res.update(extra)
    return res


def emit_results(
    table: _t.Sequence[RoundReport] | _t.Sequence[SweepRow],
    directory: str,
    formats: _t.Sequence[str],
    manifest: dict[str, _t.Any] | None = None,
    name: str = "rounds",
) -> list[str]:
    """Write `<name>.csv` and `<name>.manifest.json` into `directory`, returns the paths."""
    if len(table) > 0 and isinstance(table[0], SweepRow):
        text = render_csv(SWEEP_HEADER, sweep_rows(_t.cast(_t.Sequence[SweepRow], table)))
    else:
        text = render_csv(ROUND_HEADER, round_rows(_t.cast(_t.Sequence[RoundReport], table)))

    written = []
    try:
        _os.makedirs(directory, exist_ok=True)
        if "csv" in formats:
            path = _os.path.join(directory, name + ".csv")
            atomic_write(text.encode("utf-8"), path)
            written.append(path)
        if "json" in formats and manifest is not None:
            path = _os.path.join(directory, name + ".manifest.json")
            data = _json.dumps(manifest, indent=2, sort_keys=True, allow_nan=True) + "\n"
            atomic_write(data.encode("utf-8"), path)
            written.append(path)
    except OSError as exc:
        raise OutputFailure("cannot write results to %s: %s", directory, exc.strerror) from exc

    for path in written:
        _logger.info("wrote %s", path)
    return written


def _report(i: int) -> RoundReport:
    return RoundReport(i, "pass", (0, 2), 1.5e-3 * (i + 1), 3.2e-5, 1234.5678, 91.25, 1e-4 / 3)


def test_round_csv() -> None:
    text = render_csv(ROUND_HEADER, round_rows([_report(0), _report(1)]))
    lines = text.split("\n")
    assert lines[0] == "round,backend,accuracy,energy_total_J,snr_dB,time_s,mse"
    assert len(lines) == 4 and lines[-1] == ""
    assert lines[1] == "0,pass,91.25,0.0015,30.9151,3.2e-05,3.33333e-05"
    for line in lines[1:3]:
        values = [float(x) for x in line.split(",")[2:]]
        assert all(_math.isfinite(v) for v in values)


def test_sweep_csv_quoting() -> None:
    row = SweepRow("D", 10.0, "pass", 3, 84.5, 1e-7, 0)
    text = render_csv(SWEEP_HEADER, sweep_rows([row]))
    assert text == (
        "axis,value,backend,repetitions,accuracy,energy_J,infeasible\nD,10,pass,3,84.5,1e-07,0\n"
    )
    assert render_csv(["a,b"], [['x"y']]) == '"a,b"\n"x""y"\n'


def test_emit_results() -> None:
    import tempfile as _tempfile

    from .config import load_config

    config = ExperimentConfig().updated("fl", rounds=2)
    with _tempfile.TemporaryDirectory() as tmp:
        out = _os.path.join(tmp, "out")
        manifest = make_manifest(config, "train", [0])
        paths = emit_results([_report(0), _report(1)], out, ["csv", "json"], manifest)
        assert [_os.path.basename(p) for p in paths] == ["rounds.csv", "rounds.manifest.json"]
        with open(paths[0], "rb") as f:
            data = f.read()
        assert data.count(b"\n") == 3 and b"\r" not in data
        assert not _os.path.exists(paths[0] + ".part")
        assert load_config(paths[1]) == config

        blocker = _os.path.join(tmp, "file")
        with open(blocker, "w", encoding="utf-8") as f:
            f.write("x")
        try:
            emit_results([_report(0)], _os.path.join(blocker, "sub"), ["csv"])
        except OutputFailure as exc:
            assert "cannot write results" in str(exc)
        else:
            assert False
