#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
mlproc - command-line front end of the toolchain.

    mlproc check        <input>
    mlproc fmt          <input> [-o <output>] [--check]
    mlproc export-bpmn  <input> [-o <output>] [--no-gateways] [--namespace <uri>]
    mlproc export-html  <input> [-o <dir>] [--single-file | --multi-file]
    mlproc run          <input> [--script <file>] [--log <path>]
    mlproc replay       <input> [--log <path>]

Exit codes: 0 success, 1 model or trace errors, 2 I/O or usage errors.
Diagnostics and command results go to stdout; I/O and usage errors go to
stderr; log records (MLPROC_LOG_LEVEL) go to stderr.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

import enactment
import syntax
from bpmn_export import ExportOptions, export_bpmn
from diagnostics import MlprocError, render_all
from docgen_html import generate_html
from output_config import OutputPaths, Settings, get_settings
from pipeline_runner import PipelineResult, PipelineRunner, Stage
from run_session import RunSession, interactive_lines, script_lines
from utils import write_atomic

logger = logging.getLogger("mlproc")

EXIT_OK = 0
EXIT_MODEL_ERRORS = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad flag values the parser itself cannot catch."""


# ---------- helpers ----------

def _print_diagnostics(result: PipelineResult) -> None:
    for line in render_all(result.diagnostics, result.source_name):
        print(line)


def _print_summary(result: PipelineResult) -> None:
    mark = "✅" if result.ok else "❌"
    print(f"{mark} {result.source_name}: {result.error_count} error(s), "
          f"{result.warning_count} warning(s)")


def _load_valid(path: Path) -> Optional[PipelineResult]:
    """Full pipeline; prints diagnostics and returns None unless the model is valid."""
    result = PipelineRunner.from_file(path).run()
    if not result.ok:
        _print_diagnostics(result)
        _print_summary(result)
        return None
    return result


# ---------- commands ----------

def cmd_check(args: argparse.Namespace, settings: Settings) -> int:
    result = PipelineRunner.from_file(args.input).run()
    _print_diagnostics(result)
    _print_summary(result)
    return EXIT_OK if result.ok else EXIT_MODEL_ERRORS


def cmd_fmt(args: argparse.Namespace, settings: Settings) -> int:
    result = PipelineRunner.from_file(args.input).run_until(Stage.PARSE)
    if result.has_errors:
        _print_diagnostics(result)
        return EXIT_MODEL_ERRORS
    canonical = syntax.print_canonical(result.tree)
    if args.check:
        if canonical != result.text:
            print(f"❌ {result.source_name}: not canonically formatted")
            return EXIT_MODEL_ERRORS
        return EXIT_OK
    if args.output:
        write_atomic(args.output, canonical)
        logger.info("wrote %s", args.output)
    else:
        sys.stdout.write(canonical)
    return EXIT_OK


def cmd_export_bpmn(args: argparse.Namespace, settings: Settings) -> int:
    try:
        opts = ExportOptions(
            target_namespace=args.namespace if args.namespace is not None else settings.namespace,
            insert_gateways=not args.no_gateways,
        )
    except ValidationError as exc:
        raise UsageError(f"--namespace: {exc.errors()[0]['msg']}") from None
    result = _load_valid(args.input)
    if result is None:
        return EXIT_MODEL_ERRORS
    xml = export_bpmn(result.model, opts)
    target = Path(args.output) if args.output else OutputPaths(args.input, settings.output_dir).bpmn
    write_atomic(target, xml)
    print(f"✅ BPMN written: {target}")
    return EXIT_OK


def cmd_export_html(args: argparse.Namespace, settings: Settings) -> int:
    single_file = settings.html_single_file if args.single_file is None else args.single_file
    result = _load_valid(args.input)
    if result is None:
        return EXIT_MODEL_ERRORS
    pages = generate_html(result.model, single_file=single_file)
    out_dir = Path(args.output) if args.output else OutputPaths(args.input, settings.output_dir).html_dir
    for page in pages:
        write_atomic(out_dir / page.relative_path, page.body)
        logger.info("wrote %s", out_dir / page.relative_path)
    print(f"✅ {len(pages)} HTML page(s) written to {out_dir}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    result = _load_valid(args.input)
    if result is None:
        return EXIT_MODEL_ERRORS
    lines = script_lines(args.script) if args.script else interactive_lines()
    session = RunSession(result.model)
    session.run(lines)
    log_path = Path(args.log) if args.log else OutputPaths(args.input).event_log
    session.save_log(log_path)
    print(f"💾 {len(session.instance.log)} event(s) saved to {log_path}")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace, settings: Settings) -> int:
    result = _load_valid(args.input)
    if result is None:
        return EXIT_MODEL_ERRORS
    log_path = Path(args.log) if args.log else OutputPaths(args.input).event_log
    events = enactment.parse_log(log_path.read_text(encoding="utf-8"))
    instance = enactment.replay(result.model, events)
    sys.stdout.write(enactment.status(instance).render())
    print(f"✅ {log_path}: {len(events)} event(s), legal trace")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "fmt": cmd_fmt,
    "export-bpmn": cmd_export_bpmn,
    "export-html": cmd_export_html,
    "run": cmd_run,
    "replay": cmd_replay,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlproc",
        description="Compile, export, document and enact ML engineering process models.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="<command>")

    p = sub.add_parser("check", help="report parse and validation diagnostics")
    p.add_argument("input", type=Path)

    p = sub.add_parser("fmt", help="print the canonical formatting of a model")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, help="write here instead of stdout")
    p.add_argument("--check", action="store_true",
                   help="exit 1 when the file is not canonically formatted")

    p = sub.add_parser("export-bpmn", help="export BPMN 2.0 XML")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--no-gateways", action="store_true",
                   help="no parallel gateways for fan-out/fan-in")
    p.add_argument("--namespace", help="BPMN targetNamespace")

    p = sub.add_parser("export-html", help="generate HTML documentation")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, help="output directory")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--single-file", dest="single_file", action="store_const", const=True,
                      default=None, help="one index.html (default)")
    mode.add_argument("--multi-file", dest="single_file", action="store_const", const=False,
                      help="index.html plus one page per activity")

    p = sub.add_parser("run", help="enact the process, one line command at a time")
    p.add_argument("input", type=Path)
    p.add_argument("--script", type=Path, help="read commands from a file instead of stdin")
    p.add_argument("--log", type=Path, help="event log path (default: <input>.log)")

    p = sub.add_parser("replay", help="check an event log against the model")
    p.add_argument("input", type=Path)
    p.add_argument("--log", type=Path, help="event log path (default: <input>.log)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage or help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        settings = get_settings()
    except ValidationError as exc:
        print(f"mlproc: configuration error: {exc.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=settings.log_level, format='[%(levelname)s] %(message)s')

    try:
        return COMMANDS[args.command](args, settings)
    except UsageError as exc:
        print(f"mlproc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mlproc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MlprocError as exc:
        print(f"error {exc.code}: {exc.message}")
        return EXIT_MODEL_ERRORS
    except Exception:
        logger.exception("unexpected failure in '%s'", args.command)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
