#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Line-command session over one process instance (`mlproc run`).

Commands, one per line:
    status              per-activity states and the Ready set
    start <id>          Ready -> Running
    complete <id>       Running -> Completed
    skip <id>           optional activity -> Skipped
    log                 the full event log so far
    quit                end the session

Blank lines and lines starting with '#' are ignored, so a scripted session
can carry comments. Every command that changes the instance prints the
events it appended. An illegal command prints its error code and the
session goes on.
"""

import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, TextIO

import enactment
from diagnostics import MlprocError, UnknownElementError
from metamodel import Method
from utils import suggest, write_atomic

logger = logging.getLogger(__name__)

# `verb` or `verb argument`, surrounding whitespace ignored
COMMAND_RE = re.compile(r"^\s*([A-Za-z]+)(?:\s+(\S+))?\s*$")

ACTIVITY_COMMANDS: Dict[str, Callable[[enactment.InstanceState, str], enactment.InstanceState]] = {
    "start": enactment.start,
    "complete": enactment.complete,
    "skip": enactment.skip,
}
PLAIN_COMMANDS = ("status", "log", "quit")
COMMAND_WORDS = list(ACTIVITY_COMMANDS) + list(PLAIN_COMMANDS)

PROMPT = "mlproc> "


class CommandError(ValueError):
    """A line that is not a well-formed session command."""


@dataclass(frozen=True)
class SessionCommand:
    verb: str
    argument: Optional[str] = None


def parse_command(line: str) -> Optional[SessionCommand]:
    """
    One input line -> command. Returns None for blank and comment lines;
    raises CommandError for anything else that is not a known command.
    """
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    m = COMMAND_RE.match(text)
    if not m:
        raise CommandError(f"cannot parse command {text!r}")
    verb, argument = m.group(1).lower(), m.group(2)
    if verb not in COMMAND_WORDS:
        hint = suggest(verb, COMMAND_WORDS)
        extra = f"; did you mean '{hint}'?" if hint else ""
        raise CommandError(f"unknown command '{verb}'{extra}")
    if verb in ACTIVITY_COMMANDS and argument is None:
        raise CommandError(f"'{verb}' needs an activity id")
    if verb in PLAIN_COMMANDS and argument is not None:
        raise CommandError(f"'{verb}' takes no argument")
    return SessionCommand(verb, argument)


class RunSession:
    def __init__(self, model: Method, out: Optional[TextIO] = None):
        self.model = model
        self.out = out or sys.stdout
        self.instance = enactment.create_instance(model)
        self.finished = False
        self._shown = 0
        self.print_new_events()

    # ---- output ----

    def emit(self, text: str) -> None:
        self.out.write(text if text.endswith("\n") else text + "\n")

    def print_new_events(self) -> None:
        for event in self.instance.log[self._shown:]:
            self.emit(event.render())
        self._shown = len(self.instance.log)

    def report_error(self, code: Optional[str], message: str) -> None:
        self.emit(f"error {code}: {message}" if code else f"error: {message}")

    # ---- commands ----

    def execute(self, line: str) -> bool:
        """Run one line; False once the session should end."""
        try:
            command = parse_command(line)
        except CommandError as exc:
            self.report_error(None, str(exc))
            return True
        if command is None:
            return True
        logger.debug("command %s %s", command.verb, command.argument or "")

        if command.verb == "quit":
            self.finished = True
            return False
        if command.verb == "status":
            self.emit(enactment.status(self.instance).render().rstrip("\n"))
            return True
        if command.verb == "log":
            self.emit(enactment.render_log(self.instance.log).rstrip("\n") or "(empty)")
            return True

        try:
            ACTIVITY_COMMANDS[command.verb](self.instance, command.argument)
        except UnknownElementError as exc:
            ids = [a.id for a in self.model.iter_activities()]
            hint = suggest(command.argument, ids)
            extra = f"; did you mean '{hint}'?" if hint else ""
            self.report_error(exc.code, f"no activity with id '{command.argument}'{extra}")
        except MlprocError as exc:
            self.report_error(exc.code, exc.message)
        self.print_new_events()
        return True

    def run(self, lines: Iterable[str]) -> None:
        for line in lines:
            if not self.execute(line):
                break
        self.finished = True

    # ---- persistence ----

    @property
    def log_text(self) -> str:
        return enactment.render_log(self.instance.log)

    def save_log(self, path: Path) -> Path:
        written = write_atomic(path, self.log_text)
        logger.info("wrote %d event(s) -> %s", len(self.instance.log), written)
        return written


# ---- input sources ----

# Simple input wrapper (tests replace it)
session_input = input


def interactive_lines(prompt: str = PROMPT) -> Iterator[str]:
    """Lines typed at the terminal until EOF (Ctrl-D) or Ctrl-C."""
    while True:
        try:
            yield session_input(prompt)
        except (EOFError, KeyboardInterrupt):
            return


def script_lines(path: Path) -> List[str]:
    """Lines of a command script, read up front. OSError propagates to the caller."""
    with open(path, "r", encoding="utf-8") as f:
        return f.read().splitlines()
