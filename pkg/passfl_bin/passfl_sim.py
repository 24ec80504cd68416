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

"""Simulate federated learning over pinching-antenna and MIMO analog uplinks.

Subcommands:

- `solve` designs the transceiver for one scenario and prints the state and its metrics;
- `train` runs federated averaging over one uplink backend;
- `sweep` repeats `train` over a grid of one parameter, e.g. `--sweep "D=10,50,400"`;
- `fig1` trains over the ideal, pinching-antenna and MIMO uplinks side by side.

Round and sweep tables are written as CSV into `--out`, next to a JSON manifest
that `--config` accepts back."""

import json as _json
import logging as _logging
import sys as _sys
import typing as _t

import passfl.argparse as _argparse
from passfl.failure import CatastrophicFailure, InvalidArgument
from passfl.fl.sim import parse_backend
from passfl.harness import (
    ExperimentConfig,
    emit_results,
    load_config,
    make_manifest,
    parse_sweep_spec,
    run_experiment,
    run_sweep,
    solve,
)
from passfl.logging import setup_logging
from passfl.pyrepr import pyrepr_dumps

_logger = _logging.getLogger("passfl.cli")

FIG1_BACKENDS = ["ideal", "pass", "mimo:8", "mimo:32"]
FAILURE_EXIT_CODE = 1


def _config(args: _t.Any) -> ExperimentConfig:
    config = ExperimentConfig() if args.config is None else load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.out is not None:
        config = config.updated("output", directory=args.out)
    return config


def _backend(text: str) -> str:
    try:
        parse_backend(text)
    except InvalidArgument as exc:
        raise _argparse.ArgumentTypeError(str(exc)) from exc
    return text


def _backends(text: str) -> list[str]:
    return [_backend(b.strip()) for b in text.split(",") if b.strip()]



def cmd_solve(config: ExperimentConfig, args: _t.Any) -> None:
    uplink = solve(config, config.scenario.seed, args.backend)
    state = uplink.state
    out = {
        "backend": uplink.backend if args.backend is None else args.backend,
        "schedule": state.scheduled,
        "positions": state.positions,
        "power_scalings": state.power_scalings,
        "receive_scale": state.receive_scale,
        "metrics": uplink.metrics,
    }
    _sys.stdout.write(pyrepr_dumps(out))
    _sys.stdout.flush()


def cmd_train(config: ExperimentConfig, args: _t.Any) -> None:
    seed = config.scenario.seed
    reports = run_experiment(config, seed, args.backend)
    manifest = make_manifest(config, args.command_line, [seed], backend=args.backend)
    emit_results(reports, config.output.directory, config.output.formats, manifest, "train")


def cmd_sweep(config: ExperimentConfig, args: _t.Any) -> None:
    repetitions = config.fl.repetitions if args.repetitions is None else args.repetitions
    spec = parse_sweep_spec(args.sweep, repetitions)
    rows = run_sweep(config, spec, args.backends, args.jobs)
    seed = config.scenario.seed
    manifest = make_manifest(
        config,
        args.command_line,
        [seed + r for r in range(spec.repetitions)],
        sweep={"axis": spec.axis, "values": list(spec.values), "backends": args.backends},
    )
    name = "sweep_" + spec.axis
    emit_results(rows, config.output.directory, config.output.formats, manifest, name)


def cmd_fig1(config: ExperimentConfig, args: _t.Any) -> None:
    config = config.updated("fl", rounds=args.rounds)
    seed = config.scenario.seed
    reports = []
    for backend in args.backends:
        reports += run_experiment(config, seed, backend)
    manifest = make_manifest(config, args.command_line, [seed], backends=args.backends)
    emit_results(reports, config.output.directory, config.output.formats, manifest, "fig1")


def make_parser() -> _argparse.BetterArgumentParser:
    parser = _argparse.BetterArgumentParser(
        prog="passfl-sim", description=__doc__, add_help=True, add_version=True
    )
    parser.add_argument("--config", metavar="PATH", help="TOML or JSON config, or a run manifest")
    parser.add_argument("--seed", type=int, help="override `scenario.seed`")
    parser.add_argument("--out", metavar="DIR", help="override `output.directory`")
    parser.add_argument("-v", "--verbose", dest="verbosity", action="count", default=0)
    parser.add_argument(
        "-q", "--quiet", dest="verbosity", action="store_const", const=-1, help="errors only"
    )

    sub = parser.add_subparsers(title="subcommands", dest="command", required=True)

    cmd = sub.add_parser("solve", description="Design the transceiver and print its metrics.")
    cmd.add_argument(
        "--backend", type=_backend, help="`pass`, `mimo` or `mimo:M`; default: `fl.backend`"
    )
    cmd.set_defaults(func=cmd_solve)

    cmd = sub.add_parser("train", description="Run federated averaging over one backend.")
    cmd.add_argument(
        "--backend",
        type=_backend,
        help="`pass`, `mimo`, `mimo:M` or `ideal`; default: `fl.backend`",
    )
    cmd.set_defaults(func=cmd_train)

    cmd = sub.add_parser("sweep", description="Train over a grid of one parameter.")
    cmd.add_argument(
        "--sweep", required=True, metavar="AXIS=V,...", help="e.g. `D=10,50,400` or `P_dBm=0,10`"
    )
    cmd.add_argument(
        "--backends",
        type=_backends,
        default=["pass", "mimo"],
        help="comma-separated, `mimo:M` picks the array size; default: `pass,mimo`",
    )
    cmd.add_argument("--repetitions", type=int, help="default: `fl.repetitions`")
    cmd.add_argument("--jobs", type=int, default=1, help="worker processes; default: `1`")
    cmd.set_defaults(func=cmd_sweep)

    cmd = sub.add_parser("fig1", description="Accuracy per round against the ideal link.")
    cmd.add_argument("--rounds", type=int, default=40, help="default: `40`")
    cmd.add_argument(
        "--backends",
        type=_backends,
        default=FIG1_BACKENDS,
        help="default: `%s`" % (",".join(FIG1_BACKENDS),),
    )
    cmd.set_defaults(func=cmd_fig1)

    return parser


def main(argv: list[str] | None = None) -> None:
    if argv is None:
        argv = _sys.argv[1:]
    args = make_parser().parse_args(argv)
    args.command_line = " ".join(["passfl-sim"] + argv)

    counter = setup_logging(args.verbosity)
    failure = None
    try:
        args.func(_config(args), args)
    except CatastrophicFailure as exc:
        _logger.error("%s", exc)
        failure = exc

    if counter.errors + counter.warnings > 0:
        _sys.stderr.write("passfl-sim: finished with %s\n" % (counter.summary(),))
    if failure is not None:
        _sys.stderr.write(_json.dumps(failure.as_record()) + "\n")
        _sys.stderr.flush()
        _sys.exit(FAILURE_EXIT_CODE)


if __name__ == "__main__":
    main()
