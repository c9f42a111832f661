#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# mlproc Pipeline Runner
#
# Drives one .mlproc source through the front-end stages:
# 1. lex      - syntax.tokenize
# 2. parse    - syntax.parse (error-recovering, lexer diagnostics included)
# 3. resolve  - semantics.resolve (names -> Method)
# 4. validate - semantics.validate (rule table)
#
# Every stage logs one line. The pipeline stops early when a stage leaves
# nothing for the next one to work on: a tree with lexer or parse errors is
# never resolved, and an unresolved tree is never validated.
#
# Usage:
#     result = PipelineRunner.from_file("data/tdsp.mlproc").run()
#     result = PipelineRunner(text).run_until(Stage.PARSE)

import logging
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import semantics
import syntax
from diagnostics import Diagnostic, has_errors
from metamodel import Method

logger = logging.getLogger(__name__)


class Stage(str, Enum):
    LEX = "lex"
    PARSE = "parse"
    RESOLVE = "resolve"
    VALIDATE = "validate"


STAGES = [Stage.LEX, Stage.PARSE, Stage.RESOLVE, Stage.VALIDATE]


@dataclass
class PipelineResult:
    """What the stages produced; fields stay None past the last stage that ran."""
    source_name: str
    text: str
    tokens: Optional[List[syntax.Token]] = None
    tree: Optional[syntax.AstMethod] = None
    model: Optional[Method] = None
    diagnostics: List[Diagnostic] = field(default_factory=list)
    # last stage that ran
    reached: Optional[Stage] = None

    @property
    def has_errors(self) -> bool:
        return has_errors(self.diagnostics)

    @property
    def ok(self) -> bool:
        """A valid model came out of the validate stage."""
        return self.reached is Stage.VALIDATE and self.model is not None and not self.has_errors

    @property
    def error_count(self) -> int:
        return sum(1 for d in self.diagnostics if d.is_error)

    @property
    def warning_count(self) -> int:
        return sum(1 for d in self.diagnostics if not d.is_error)


class PipelineRunner:
    def __init__(self, text: Union[str, bytes], source_name: str = "<input>"):
        if isinstance(text, bytes):
            text = syntax.decode_source(text)
        self.text = text
        self.source_name = source_name

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "PipelineRunner":
        """Read `path` as UTF-8. OSError propagates to the caller."""
        path = Path(path)
        return cls(path.read_bytes(), source_name=str(path))

    # ---- stages ----

    def _lex(self, result: PipelineResult) -> bool:
        result.tokens, found = syntax.tokenize(result.text)
        # parse re-reports these, so they are only kept when lexing is the last stage
        result.diagnostics = list(found)
        logger.info("lex: %d token(s), %d diagnostic(s)", len(result.tokens), len(found))
        return True

    def _parse(self, result: PipelineResult) -> bool:
        result.tree, found = syntax.parse(result.text)
        result.diagnostics = list(found)
        activities = len(result.tree.of_type(syntax.AstActivity))
        logger.info("parse: %d top-level activit(ies), %d error(s)",
                    activities, len(result.tree.errors))
        return not has_errors(found)

    def _resolve(self, result: PipelineResult) -> bool:
        resolution = semantics.resolve(result.tree)
        result.diagnostics.extend(resolution.diagnostics)
        result.model = resolution.model
        logger.info("resolve: %s, %d diagnostic(s)",
                    "model built" if resolution.ok else "no model", len(resolution.diagnostics))
        return resolution.ok

    def _validate(self, result: PipelineResult) -> bool:
        found = semantics.validate(result.model)
        result.diagnostics.extend(found)
        logger.info("validate: %d error(s), %d warning(s)",
                    sum(1 for d in found if d.is_error), sum(1 for d in found if not d.is_error))
        return not has_errors(found)

    # ---- drivers ----

    def run_until(self, last: Stage) -> PipelineResult:
        """Run stages up to (and including) `last`, stopping early on a blocking failure."""
        start_time = datetime.now()
        result = PipelineResult(source_name=self.source_name, text=self.text)
        handlers = {
            Stage.LEX: self._lex,
            Stage.PARSE: self._parse,
            Stage.RESOLVE: self._resolve,
            Stage.VALIDATE: self._validate,
        }
        for stage in STAGES:
            result.reached = stage
            proceed = handlers[stage](result)
            if stage is last or not proceed:
                break
        logger.info("%s: stopped after %s in %s", self.source_name, result.reached.value,
                    datetime.now() - start_time)
        return result

    def run(self) -> PipelineResult:
        return self.run_until(Stage.VALIDATE)


def load_model(path: Union[str, Path]) -> PipelineResult:
    """Full pipeline over one file; the result's `model` is set iff it resolved."""
    return PipelineRunner.from_file(path).run()
