import argparse
import sys

import wbml.out as out
from wbml.experiment import WorkingDirectory

from .config import STRATEGIES, load_config
from .report import (
    FORMATS,
    load_checkpoint,
    save_checkpoint,
    write_json,
    write_report,
)
from .simulation import (
    build_state,
    compare,
    convergence,
    run_simulation,
    synthetic_traces,
)
from .traces import load_traces, write_traces
from .util import ValidationError

__all__ = ["UsageError", "build_parser", "main"]


class UsageError(ValidationError):
    """The command line is invalid.

    Args:
        usage (str): Usage text.
        message (str): What is wrong.
    """

    def __init__(self, usage, message):
        ValidationError.__init__(self, message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(self.format_usage(), message)


def _add_common(parser, out_default):
    parser.add_argument(
        "--config", required=True, help="Path to the YAML configuration file."
    )
    parser.add_argument("--seed", type=int, help="Override the master seed.")
    parser.add_argument(
        "--out", default=out_default, help="Directory to write the output to."
    )


def _add_traces(parser):
    parser.add_argument(
        "--traces",
        help="Path to a trace file. Defaults to synthetic traces described by the "
        "configuration.",
    )
    parser.add_argument(
        "--format", choices=FORMATS, default="json", help="Format of the reports."
    )


def build_parser():
    """Construct the parser of the command line.

    Returns:
        :class:`argparse.ArgumentParser`: Parser.
    """
    parser = _Parser(
        prog="ptmarket",
        description="Simulate prospect-theory peer-to-peer energy trading.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Simulate one strategy.")
    _add_common(run, "_ptmarket/run")
    _add_traces(run)
    run.add_argument("--strategy", choices=STRATEGIES, help="Override the strategy.")
    run.add_argument("--checkpoint", help="Save the final state to this path.")
    run.add_argument("--resume", help="Continue from a saved state.")

    comp = commands.add_parser(
        "compare", help="Simulate DEbATE with PQR and the rule baseline."
    )
    _add_common(comp, "_ptmarket/compare")
    _add_traces(comp)

    conv = commands.add_parser(
        "convergence", help="Trace the convergence of DEbATE for various sizes."
    )
    _add_common(conv, "_ptmarket/convergence")
    conv.add_argument(
        "--sizes",
        type=int,
        nargs="+",
        default=[5, 10, 15],
        help="Numbers of buyers, which equal the numbers of sellers.",
    )
    conv.add_argument(
        "--seeds",
        type=int,
        nargs="+",
        default=list(range(10)),
        help="Seeds to average over.",
    )
    conv.add_argument("--g-max", type=int, help="Override the number of generations.")

    synth = commands.add_parser("synth", help="Generate synthetic traces.")
    _add_common(synth, "_ptmarket/synth")

    return parser


def _inputs(args, config):
    if args.traces is None:
        out.kv("Traces", "synthetic")
        return synthetic_traces(config), "synthetic"
    out.kv("Traces", args.traces)
    return load_traces(args.traces), args.traces


def _run(args, config, wd):
    config = config.override(strategy=args.strategy)
    traces, source = _inputs(args, config)
    if args.resume:
        state = load_checkpoint(args.resume)
        out.kv("Resuming at period", state.t)
    else:
        state = build_state(config, traces.ids)
    report = run_simulation(config, traces, state=state, trace=True, source=source)
    for path in write_report(report, wd.file(f"report.{args.format}"), args.format):
        out.kv("Wrote", path)
    if args.checkpoint:
        save_checkpoint(state, args.checkpoint)
        out.kv("Checkpoint", args.checkpoint)
    with out.Section("Totals"):
        for k, v in report.totals.items():
            out.kv(k, v)


def _compare(args, config, wd):
    traces, source = _inputs(args, config)
    comparison = compare(config, traces, trace=True, source=source)
    for strategy in ["debate_pqr", "rule"]:
        path = wd.file(f"{strategy}.{args.format}")
        write_report(getattr(comparison, strategy), path, args.format)
    summary = comparison.summary()
    write_json(summary, wd.file("comparison.json"))
    with out.Section("Percentage improvement over the baseline"):
        out.kv("Buyer value", summary["deltas"]["buyer_value"])
        out.kv("Seller reward", summary["deltas"]["seller_reward"])


def _convergence(args, config, wd):
    if args.g_max is not None and args.g_max < 2:
        raise ValidationError("The number of generations must be at least two.")
    frame = convergence(config, args.sizes, args.seeds, g_max=args.g_max, trace=True)
    frame.to_csv(wd.file("convergence.csv"), index=False)
    half = len(frame) // 2 - 1
    with out.Section("Normalised fitness after half of the generations"):
        for column in frame.columns[1:]:
            out.kv(column, frame[column].iloc[max(half, 0)])


def _synth(args, config, wd):
    traces = synthetic_traces(config)
    write_traces(traces, wd.file("traces.csv"))
    out.kv("Prosumers", len(traces))
    out.kv("Horizon", traces.horizon)


_COMMANDS = {
    "run": _run,
    "compare": _compare,
    "convergence": _convergence,
    "synth": _synth,
}


def main(argv=None):
    """Entry point of the command line.

    Args:
        argv (list[str], optional): Arguments. Defaults to `sys.argv[1:]`.

    Returns:
        int: Exit code: `0` on success, `1` on invalid input, and `2` on any other
            error.
    """
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config).override(seed=args.seed)
        out.report_time = True
        wd = WorkingDirectory(args.out, log="log.txt")
        out.kv("Command", args.command)
        out.kv("Seed", config.seed)
        _COMMANDS[args.command](args, config, wd)
    except UsageError as e:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"ptmarket: error: {e}\n")
        return 1
    except ValidationError as e:
        sys.stderr.write(f"ptmarket: invalid input: {e}\n")
        return 1
    except Exception as e:
        sys.stderr.write(f"ptmarket: {type(e).__name__}: {e}\n")
        return 2
    return 0
