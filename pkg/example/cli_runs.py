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

"""End-to-end `passfl-sim` runs on a small scenario."""

import contextlib as _contextlib
import io as _io
import json as _json
import os as _os
import tempfile as _tempfile
import typing as _t

from passfl.harness import load_config
from passfl_bin.passfl_sim import main

SMALL_CONFIG = """
[scenario]
devices = 4
k_min = 3
elements = 8
edge = 20.0

[solver]
outer_iters = 3
placement_iters = 3

[fl]
architecture = "logistic"
rounds = 2
epochs = 1
antennas = 4
"""


def _run(argv: list[str]) -> tuple[int, str, str]:
    out = _io.StringIO()
    err = _io.StringIO()
    code: _t.Any = 0
    with _contextlib.redirect_stdout(out), _contextlib.redirect_stderr(err):
        try:
            main(argv)
        except SystemExit as exc:
            code = exc.code
    return code, out.getvalue(), err.getvalue()


def _small_config(tmp: str) -> str:
    path = _os.path.join(tmp, "small.toml")
    with open(path, "w", encoding="utf-8") as f:
        f.write(SMALL_CONFIG)
    return path


def _read(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def test_sweep_is_deterministic() -> None:
    with _tempfile.TemporaryDirectory() as tmp:
        cfg = _small_config(tmp)
        outputs = []
        for name in ["a", "b"]:
            out = _os.path.join(tmp, name)
            argv = ["--config", cfg, "--seed", "7", "--out", out, "sweep"]
            argv += ["--sweep", "D=10,40", "--backends", "pass,ideal", "--repetitions", "1"]
            code, _, _ = _run(argv)
            assert code == 0
            outputs.append(_read(_os.path.join(out, "sweep_D.csv")))
        assert outputs[0] == outputs[1]
        lines = outputs[0].decode("utf-8").split("\n")
        assert lines[0] == "axis,value,backend,repetitions,accuracy,energy_J,infeasible"
        assert len(lines) == 6 and lines[-1] == ""


def test_sweep_over_array_sizes() -> None:
    with _tempfile.TemporaryDirectory() as tmp:
        out = _os.path.join(tmp, "out")
        argv = ["--config", _small_config(tmp), "--out", out, "sweep", "--sweep", "D=20"]
        code, _, _ = _run(argv + ["--backends", "mimo:1,mimo:4", "--repetitions", "1"])
        assert code == 0
        lines = _read(_os.path.join(out, "sweep_D.csv")).decode("utf-8").split("\n")
        assert [line.split(",")[2] for line in lines[1:3]] == ["mimo:1", "mimo:4"]


def test_train_writes_round_table_and_manifest() -> None:
    with _tempfile.TemporaryDirectory() as tmp:
        cfg = _small_config(tmp)
        out = _os.path.join(tmp, "out")
        code, _, _ = _run(["--config", cfg, "--out", out, "train", "--backend", "pass"])
        assert code == 0

        lines = _read(_os.path.join(out, "train.csv")).decode("utf-8").split("\n")
        assert lines[0] == "round,backend,accuracy,energy_total_J,snr_dB,time_s,mse"
        assert len(lines) == 4
        for line in lines[1:3]:
            fields = line.split(",")
            assert fields[1] == "pass"
            assert all(float(x) == float(x) and abs(float(x)) != float("inf") for x in fields[2:])

        manifest = _os.path.join(out, "train.manifest.json")
        with open(manifest, "rb") as f:
            data = _json.load(f)
        assert data["seeds"] == [0] and data["backend"] == "pass"
        config = load_config(manifest)
        assert config.fl.rounds == 2 and config.output.directory == out

        # the manifest is a config in its own right
        again = _os.path.join(tmp, "again")
        code, _, _ = _run(["--config", manifest, "--out", again, "train", "--backend", "pass"])
        assert code == 0
        assert _read(_os.path.join(again, "train.csv")) == _read(_os.path.join(out, "train.csv"))


def test_solve_prints_state() -> None:
    with _tempfile.TemporaryDirectory() as tmp:
        code, out, _ = _run(["--config", _small_config(tmp), "solve"])
        assert code == 0
        assert out.startswith("{")
        assert "'receive_scale':" in out and "AirCompMetrics(" in out


def test_failures_are_json_lines() -> None:
    with _tempfile.TemporaryDirectory() as tmp:
        bad = _os.path.join(tmp, "bad.toml")
        with open(bad, "w", encoding="utf-8") as f:
            f.write("[scenario]\ndevices = 2\nk_min = 3\n")
        code, _, err = _run(["--config", bad, "train"])
        assert code == 1
        record = _json.loads(err.splitlines()[-1])
        assert record["kind"] == "ConfigFailure"

        code, _, err = _run(["--config", _small_config(tmp), "sweep", "--sweep", "K=1,2"])
        assert code == 1
        assert _json.loads(err.splitlines()[-1])["kind"] == "InvalidArgument"

        for backends in ["pass,wifi", "pass,mimo:0", "ideal:4"]:
            code, _, err = _run(["sweep", "--sweep", "D=10", "--backends", backends])
            assert code == 2, backends
            assert _json.loads(err.splitlines()[-1])["kind"] == "UsageError"
