from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections.abc import Sequence
from typing import Any, NoReturn

from igelite.cli import commands
from igelite.cli.context import CommandContext, RunSettings
from igelite.cli.problem import LoadedProblem, ProblemError, load_problem, schema
from igelite.cli.report import ExitCode, Outcome, Report, to_document_json, write_csv, write_json
from igelite.logging import configure_logging
from igelite.utils import DEFAULT_SEED, SEED_ENV_VAR, default_seed

logger = logging.getLogger("igelite.cli")

__all__ = ["ExitCode", "main"]


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(ExitCode.USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(value: str) -> int:
    number = int(value)
    if number <= 0:
        raise argparse.ArgumentTypeError(f"{value} is not a positive integer")
    return number


def _positive_float(value: str) -> float:
    number = float(value)
    if not number > 0.0:
        raise argparse.ArgumentTypeError(f"{value} is not a positive number")
    return number


def _alpha(value: str) -> float:
    number = float(value)
    if not number > 1.0:
        raise argparse.ArgumentTypeError("alpha must exceed 1")
    return number


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="ige", description="set-inclusive generalized equations toolkit")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    for item in commands.get_commands():
        sub = subparsers.add_parser(item.name, help=item.help, description=item.help)
        sub.add_argument("file")
        sub.add_argument("--alpha", type=_alpha)
        sub.add_argument("--delta", type=_positive_float)
        sub.add_argument("--samples", type=_positive_int)
        sub.add_argument("--probe-dirs", type=_positive_int)
        sub.add_argument("--seed", type=int)
        sub.add_argument("--json-out", metavar="PATH")
        sub.add_argument("--csv-out", metavar="PATH")
        sub.add_argument("--timings", action="store_true", help="add wall-clock timings to the report")
        if "mode" in item.options:
            sub.add_argument("--mode", choices=commands.TANGENT_MODES, default="exact")
    subparsers.add_parser("schema", help="print the problem file JSON schema")
    return parser


def resolve_seed(flag: int | None, loaded: LoadedProblem) -> int:
    """Flag, then the environment, then the problem file, then the default."""
    if flag is not None:
        return flag
    if os.environ.get(SEED_ENV_VAR, "").strip():
        return default_seed()
    if loaded.source.settings.seed is not None:
        return loaded.source.settings.seed
    return DEFAULT_SEED


def resolve_settings(args: argparse.Namespace, loaded: LoadedProblem) -> RunSettings:
    defaults = RunSettings()
    file = loaded.source.settings
    values: dict[str, Any] = {}
    for name in ("alpha", "delta", "samples", "probe_dirs"):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
        elif getattr(file, name) is not None:
            values[name] = getattr(file, name)
        else:
            values[name] = getattr(defaults, name)
    values["mode"] = getattr(args, "mode", None) or defaults.mode
    return RunSettings(**values)


def run(args: argparse.Namespace) -> Report:
    loaded = load_problem(args.file)
    seed = resolve_seed(args.seed, loaded)
    ctx = CommandContext(args.command, loaded, resolve_settings(args, loaded), seed)
    ctx.log(f"{loaded.path} seed={seed}")
    item = commands.get_command(args.command)
    try:
        result = item.func(ctx)
    except commands.HYPOTHESIS_ERRORS as e:
        ctx.log(str(e), logging.WARNING)
        result = commands.CommandResult(
            Outcome.HYPOTHESES_NOT_MET, {"error": type(e).__name__, "message": str(e)}
        )
    if args.csv_out and result.csv_rows:
        write_csv(result.csv_rows, args.csv_out)
    return Report(
        command=args.command,
        input_digest=loaded.digest,
        seed=seed,
        status=result.outcome,
        hypotheses=result.hypotheses,
        results=result.results,
        timings=dict(ctx.timings) if args.timings else None,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(show_time=False, level=args.log_level)

    if args.command == "schema":
        sys.stdout.write(json.dumps(schema(), sort_keys=True, indent=2) + "\n")
        return ExitCode.OK

    try:
        report = run(args)
    except (ProblemError, OSError) as e:
        logger.error("%s", e)  # noqa: TRY400
        return ExitCode.USAGE
    except ValueError as e:
        # invalid IGE_SEED or settings rejected by the analyses
        logger.error("%s", e)  # noqa: TRY400
        return ExitCode.USAGE

    if args.json_out:
        write_json(report, args.json_out)
    else:
        sys.stdout.write(to_document_json(report))
    logger.info("%s: %s", args.command, report.status.value)
    return report.exit_code
