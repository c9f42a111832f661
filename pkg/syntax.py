#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Textual concrete syntax of .mlproc files: lexer, parser and canonical printer.

    method "TDSP" {
      role ds "Data scientist" : DataScientist
      activity bu "Business understanding" : BusinessActivity {
        output charter
        participant ds as Responsible
      }
      flow bu -> modeling
    }

tokenize() and parse() are total: malformed input produces diagnostics,
never an exception. The parser recovers at block boundaries so one pass
reports every problem of a file. print_canonical() is the normative
formatter; parse(print_canonical(a)) is structurally equal to a.

The full grammar lives in docs/grammar.md.
"""

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Set, Tuple, Union

import diagnostics as diag
from diagnostics import Diagnostic, PrintError, SourceSpan
from metamodel import (ActivityKind, ArtifactKind, CriterionKind, DataType, DatasetKind,
                       DeploymentPattern, DeploymentStrategy, Direction, GoalKind,
                       InferenceMode, RequirementKind, ResourceKind, ResponsibilityKind,
                       RoleKind)
from utils import suggest

KEYWORDS = frozenset({
    "method", "role", "technique", "artifact", "resource", "activity", "flow",
    "participant", "input", "output", "uses", "applies", "goal", "criterion",
    "requirement", "hyperparameter", "deployment", "monitoring", "metric", "flaw",
    "optional", "requiresAll", "description", "location", "template", "baseline",
    "target", "dataType", "pattern", "strategy", "inference", "min", "max",
    "selected", "external", "ranking", "attribute", "correlatedTo", "expertIn", "as",
    # fields the list above cannot spell
    "evaluates", "threshold", "direction", "performance", "relatedTo", "unit",
    "platform", "scripts", "interpreter", "requirements", "collectedFrom",
    "derivedFrom", "datasetKind", "semanticType", "feature", "searchSpace", "optimal",
})

PUNCTUATION = "{}:,"
MAX_NESTING = 64


# ----------------------- Tokens -----------------------

class TokenKind(str, Enum):
    KEYWORD = "Keyword"
    IDENTIFIER = "Identifier"
    STRING = "String"
    NUMBER = "Number"
    ARROW = "Arrow"
    PUNCT = "Punct"
    EOF = "Eof"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: SourceSpan
    # whitespace, comments and skipped characters right before the token
    trivia: str = ""

    @property
    def value(self) -> str:
        """Decoded content of a string literal; the raw text otherwise."""
        if self.kind is not TokenKind.STRING:
            return self.text
        out: List[str] = []
        i = 1
        while i < len(self.text):
            ch = self.text[i]
            if ch == '"':
                break
            if ch == "\\" and i + 1 < len(self.text):
                nxt = self.text[i + 1]
                out.append({"n": "\n", "t": "\t", "r": "\r"}.get(nxt, nxt))
                i += 2
                continue
            out.append(ch)
            i += 1
        return "".join(out)

    def describe(self) -> str:
        if self.kind is TokenKind.EOF:
            return "end of input"
        text = "".join(f"\\x{ord(c) - 0xDC00:02x}" if _is_escaped_byte(c) else c
                       for c in self.text)
        return f"{self.kind.value.lower()} '{text}'"


def _is_ident_start(ch: str) -> bool:
    return ("a" <= ch <= "z") or ("A" <= ch <= "Z") or ch == "_"


def _is_digit(ch: str) -> bool:
    return "0" <= ch <= "9"


def _is_escaped_byte(ch: str) -> bool:
    """A byte that was not valid UTF-8, kept by decode_source as a lone surrogate."""
    return "\udc80" <= ch <= "\udcff"


def decode_source(data: bytes) -> str:
    """UTF-8 decode that keeps every undecodable byte, one character per byte."""
    return data.decode("utf-8", errors="surrogateescape")


class _Positions:
    """Maps text offsets to UTF-8 byte offsets and 1-based line/column."""

    def __init__(self, text: str):
        self.byte_at = [0] * (len(text) + 1)
        self.line_starts = [0]
        total = 0
        for i, ch in enumerate(text):
            total += 1 if _is_escaped_byte(ch) else len(ch.encode("utf-8", "surrogatepass"))
            self.byte_at[i + 1] = total
            if ch == "\n":
                self.line_starts.append(i + 1)

    def span(self, start: int, end: int) -> SourceSpan:
        line = bisect.bisect_right(self.line_starts, start)
        column = start - self.line_starts[line - 1] + 1
        return SourceSpan(self.byte_at[start], self.byte_at[end], line, column)


def tokenize(text: Union[str, bytes]) -> Tuple[List[Token], List[Diagnostic]]:
    """
    Split `text` into tokens. Always ends with an Eof token; concatenating
    each token's trivia and text reconstructs the input exactly.
    Bytes that are not valid UTF-8 are reported as P002 wherever they occur,
    comments and string literals included.
    """
    if isinstance(text, bytes):
        text = decode_source(text)
    pos_map = _Positions(text)
    tokens: List[Token] = []
    diagnostics: List[Diagnostic] = []
    n = len(text)
    pos = 0
    trivia_start = 0

    def emit(kind: TokenKind, start: int, end: int) -> None:
        nonlocal trivia_start
        tokens.append(Token(kind, text[start:end], pos_map.span(start, end),
                            text[trivia_start:start]))
        trivia_start = end

    while pos < n:
        ch = text[pos]
        nxt = text[pos + 1] if pos + 1 < n else ""
        if ch in " \t\r\n":
            pos += 1
        elif ch == "/" and nxt == "/":
            end = text.find("\n", pos)
            pos = n if end == -1 else end
        elif ch == '"':
            start = pos
            pos += 1
            closed = False
            while pos < n and text[pos] != "\n":
                if text[pos] == "\\" and pos + 1 < n and text[pos + 1] != "\n":
                    pos += 2
                    continue
                if text[pos] == '"':
                    pos += 1
                    closed = True
                    break
                pos += 1
            if not closed:
                diagnostics.append(diag.make("P001", "unterminated string literal",
                                             pos_map.span(start, pos)))
            emit(TokenKind.STRING, start, pos)
        elif ch == "-" and nxt == ">":
            emit(TokenKind.ARROW, pos, pos + 2)
            pos += 2
        elif _is_digit(ch) or (ch == "-" and _is_digit(nxt)):
            start = pos
            pos += 1
            while pos < n and _is_digit(text[pos]):
                pos += 1
            if pos + 1 < n and text[pos] == "." and _is_digit(text[pos + 1]):
                pos += 1
                while pos < n and _is_digit(text[pos]):
                    pos += 1
            emit(TokenKind.NUMBER, start, pos)
        elif _is_ident_start(ch):
            start = pos
            while pos < n and (_is_ident_start(text[pos]) or _is_digit(text[pos])):
                pos += 1
            word = text[start:pos]
            emit(TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENTIFIER, start, pos)
        elif ch in PUNCTUATION:
            emit(TokenKind.PUNCT, pos, pos + 1)
            pos += 1
        elif _is_escaped_byte(ch):
            pos += 1
        else:
            diagnostics.append(diag.make("P002", f"invalid character {ch!r}",
                                         pos_map.span(pos, pos + 1)))
            pos += 1

    tokens.append(Token(TokenKind.EOF, "", pos_map.span(n, n), text[trivia_start:n]))
    bad_bytes = [i for i, ch in enumerate(text) if _is_escaped_byte(ch)]
    for i in bad_bytes:
        byte = ord(text[i]) - 0xDC00
        diagnostics.append(diag.make("P002", f"invalid UTF-8 byte 0x{byte:02X}",
                                     pos_map.span(i, i + 1)))
    if bad_bytes:
        diagnostics.sort(key=lambda d: d.span.byte_start)
    return tokens, diagnostics


# ----------------------- AST -----------------------
# Mirrors the metamodel with unresolved references. Spans never take part in
# equality, so two trees compare equal when their structure is equal.

def _span():
    return field(default=None, compare=False, repr=False)


@dataclass
class Ref:
    name: str
    span: Optional[SourceSpan] = _span()


@dataclass
class AstError:
    message: str
    span: Optional[SourceSpan] = _span()


@dataclass
class AstTechnique:
    id: str
    display_name: Optional[str] = None
    description: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstRole:
    id: str
    kind: str
    display_name: Optional[str] = None
    custom_label: Optional[str] = None
    description: Optional[str] = None
    expert_in: List[Ref] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()


@dataclass
class AstDataAttribute:
    name: str
    semantic_type: Optional[str] = None
    is_feature: bool = False
    correlated_to: List[Ref] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()


@dataclass
class AstHyperparameter:
    name: str
    search_space: Optional[str] = None
    optimal_value: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstArtifact:
    id: str
    kind: str
    display_name: Optional[str] = None
    description: Optional[str] = None
    location: Optional[str] = None
    template: Optional[Ref] = None
    collected_from: List[Ref] = field(default_factory=list)
    attributes: List[AstDataAttribute] = field(default_factory=list)
    hyperparameters: List[AstHyperparameter] = field(default_factory=list)
    ranking: Optional[str] = None
    dataset_kind: Optional[str] = None
    derived_from: Optional[Ref] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstResource:
    id: str
    kind: str
    display_name: Optional[str] = None
    description: Optional[str] = None
    location: Optional[str] = None
    is_external: bool = False
    selected: bool = False
    requirements: List[Ref] = field(default_factory=list)
    interpreter: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstGoal:
    id: str
    kind: str
    statement: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstRequirement:
    id: str
    kind: str
    statement: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstCriterion:
    id: str
    kind: str
    evaluates: Optional[Ref] = None
    baseline: Optional[str] = None
    target: Optional[str] = None
    data_type: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstPerformance:
    id: str
    metric_name: Optional[str] = None
    threshold: Optional[str] = None
    direction: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstFlaw:
    id: str
    description: Optional[str] = None
    related_to: Optional[Ref] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstMetric:
    id: str
    name: Optional[str] = None
    min_threshold: Optional[str] = None
    max_threshold: Optional[str] = None
    unit: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class AstDeployment:
    pattern: Optional[str] = None
    strategy: Optional[str] = None
    inference: Optional[str] = None
    platform: Optional[Ref] = None
    scripts: List[Ref] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()


@dataclass
class AstMonitoring:
    flaws: List[AstFlaw] = field(default_factory=list)
    metrics: List[AstMetric] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()


@dataclass
class AstParticipant:
    role: Ref
    responsibility: str
    span: Optional[SourceSpan] = _span()


@dataclass
class AstFlow:
    source: Ref
    target: Ref
    span: Optional[SourceSpan] = _span()


@dataclass
class AstActivity:
    id: str
    display_name: Optional[str] = None
    kind: Optional[str] = None
    description: Optional[str] = None
    is_optional: bool = False
    requires_all: bool = False
    inputs: List[Ref] = field(default_factory=list)
    outputs: List[Ref] = field(default_factory=list)
    uses: List[Ref] = field(default_factory=list)
    applies: List[Ref] = field(default_factory=list)
    participants: List[AstParticipant] = field(default_factory=list)
    deployment: Optional[AstDeployment] = None
    monitoring: Optional[AstMonitoring] = None
    # nested declarations in source order: activities, flows, goals,
    # criteria, requirements, performance criteria
    items: List[object] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()

    def of_type(self, cls) -> List:
        return [it for it in self.items if isinstance(it, cls)]


@dataclass
class AstMethod:
    name: str
    description: Optional[str] = None
    # roles, techniques, artifacts, resources, activities, flows in source order
    items: List[object] = field(default_factory=list)
    # placeholders left where the parser reported an error
    errors: List[AstError] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()

    def of_type(self, cls) -> List:
        return [it for it in self.items if isinstance(it, cls)]


Ast = AstMethod


# ----------------------- Parser -----------------------

_KIND_NAMES = {
    "role": [k.value for k in RoleKind],
    "artifact": [k.value for k in ArtifactKind],
    "resource": [k.value for k in ResourceKind],
    "activity": [k.value for k in ActivityKind],
    "goal": [k.value for k in GoalKind],
    "requirement": [k.value for k in RequirementKind],
    "criterion": [k.value for k in CriterionKind],
    "responsibility": [k.value for k in ResponsibilityKind],
    "dataType": [k.value for k in DataType],
    "direction": [k.value for k in Direction],
    "pattern": [k.value for k in DeploymentPattern],
    "strategy": [k.value for k in DeploymentStrategy],
    "inference": [k.value for k in InferenceMode],
    "datasetKind": [k.value for k in DatasetKind],
}

# attributes reserved to one artifact / resource kind
_ARTIFACT_ONLY = {
    "template": ArtifactKind.DOCUMENT.value,
    "collectedFrom": ArtifactKind.DATA.value,
    "attribute": ArtifactKind.DATA.value,
    "hyperparameter": ArtifactKind.AI_MODEL.value,
    "ranking": ArtifactKind.AI_MODEL.value,
    "datasetKind": ArtifactKind.AI_MODEL_DATASET.value,
    "derivedFrom": ArtifactKind.AI_MODEL_DATASET.value,
}
_RESOURCE_ONLY = {
    "external": ResourceKind.DATA_SOURCE.value,
    "selected": ResourceKind.DATA_SOURCE.value,
    "requirements": ResourceKind.DATA_SOURCE.value,
    "interpreter": ResourceKind.SCRIPT.value,
}


class _SyntaxFailure(Exception):
    """Unwinds to the innermost block loop, which then recovers."""


class _Parser:
    def __init__(self, tokens: List[Token], diagnostics: List[Diagnostic]):
        self.toks = tokens
        self.i = 0
        self.diagnostics = diagnostics
        self.errors: List[AstError] = [AstError(d.message, d.span) for d in diagnostics]
        self.depth = 0

    # --- token helpers ---

    def peek(self) -> Token:
        return self.toks[min(self.i, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind is not TokenKind.EOF:
            self.i += 1
        return tok

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind is TokenKind.KEYWORD and tok.text == word

    def at_punct(self, p: str) -> bool:
        tok = self.peek()
        return tok.kind is TokenKind.PUNCT and tok.text == p

    def report(self, code: str, message: str, span: Optional[SourceSpan]) -> None:
        self.diagnostics.append(diag.make(code, message, span))
        self.errors.append(AstError(message, span))

    def fail(self, expected: str) -> "_SyntaxFailure":
        tok = self.peek()
        self.report("P010", f"expected {expected}, found {tok.describe()}", tok.span)
        return _SyntaxFailure()

    def expect(self, kind: TokenKind, expected: str) -> Token:
        if self.peek().kind is not kind:
            raise self.fail(expected)
        return self.advance()

    def expect_punct(self, p: str) -> Token:
        if not self.at_punct(p):
            raise self.fail(f"'{p}'")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        return self.expect(TokenKind.IDENTIFIER, what)

    def string(self, what: str = "string") -> str:
        return self.expect(TokenKind.STRING, what).value

    def number(self, what: str = "number") -> str:
        return self.expect(TokenKind.NUMBER, what).text

    def integer(self, what: str) -> str:
        tok = self.peek()
        if tok.kind is not TokenKind.NUMBER or "." in tok.text:
            raise self.fail(what)
        return self.advance().text

    def text_value(self, what: str) -> str:
        """A string or a bare number, kept as text."""
        if self.peek().kind is TokenKind.NUMBER:
            return self.advance().text
        return self.string(what)

    def optional_string(self) -> Optional[str]:
        if self.peek().kind is TokenKind.STRING:
            return self.advance().value
        return None

    def ref(self, what: str = "identifier") -> Ref:
        tok = self.ident(what)
        return Ref(tok.text, tok.span)

    def ref_list(self, what: str) -> List[Ref]:
        refs = [self.ref(what)]
        while self.at_punct(","):
            self.advance()
            refs.append(self.ref(what))
        return refs

    def kind_name(self, family: str) -> str:
        """A kind literal of a closed set; unknown literals are P011 but kept."""
        tok = self.ident(f"{family} kind")
        allowed = _KIND_NAMES[family]
        if tok.text not in allowed:
            hint = suggest(tok.text, allowed)
            extra = f"; did you mean '{hint}'?" if hint else ""
            self.report("P011", f"unknown {family} kind '{tok.text}'{extra}", tok.span)
        return tok.text

    def once(self, seen: Set[str], tok: Token) -> bool:
        """Track single-valued attributes; True the first time one is seen."""
        if tok.text in seen:
            self.report("P012", f"duplicate attribute '{tok.text}' in block", tok.span)
            return False
        seen.add(tok.text)
        return True

    def missing(self, what: str, owner: str, span: Optional[SourceSpan]) -> None:
        self.report("P013", f"{owner} is missing mandatory '{what}'", span)

    # --- blocks and recovery ---

    def recover(self) -> None:
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind is TokenKind.EOF:
                return
            if self.at_punct("{"):
                depth += 1
            elif self.at_punct("}"):
                if depth == 0:
                    return
                depth -= 1
                self.advance()
                if depth == 0:
                    return
                continue
            self.advance()

    def block(self, handle: Callable[[Token], None]) -> None:
        """Parse `{ item* }`; the opening brace is the current token."""
        open_tok = self.expect_punct("{")
        if self.depth >= MAX_NESTING:
            self.report("P010", "blocks nested too deeply", open_tok.span)
            self.recover()
            if self.at_punct("}"):
                self.advance()
            return
        self.depth += 1
        try:
            while True:
                tok = self.peek()
                if self.at_punct("}"):
                    self.advance()
                    return
                if tok.kind is TokenKind.EOF:
                    self.report("P010", "expected '}' before end of input", tok.span)
                    return
                try:
                    handle(tok)
                except _SyntaxFailure:
                    self.recover()
        finally:
            self.depth -= 1

    def optional_block(self, handle: Callable[[Token], None]) -> None:
        if self.at_punct("{"):
            self.block(handle)

    def header(self, with_kind: Optional[str]) -> Tuple[Token, Optional[str], Optional[str]]:
        """`id "Display"? (: Kind)?` following a declaration keyword."""
        id_tok = self.ident()
        display = self.optional_string()
        kind = None
        if with_kind and self.at_punct(":"):
            self.advance()
            kind = self.kind_name(with_kind)
        return id_tok, display, kind

    # --- method ---

    def parse_method(self) -> AstMethod:
        start = self.peek()
        if not self.at_kw("method"):
            self.report("P010", f"expected 'method', found {start.describe()}", start.span)
            while not self.at_kw("method") and self.peek().kind is not TokenKind.EOF:
                self.advance()
            if not self.at_kw("method"):
                return AstMethod(name="", errors=self.errors, span=start.span)
        kw = self.advance()
        method = AstMethod(name="", errors=self.errors, span=kw.span)
        try:
            method.name = self.string("method name")
            seen: Set[str] = set()

            def item(tok: Token) -> None:
                if tok.kind is not TokenKind.KEYWORD:
                    raise self.fail("a declaration")
                if tok.text == "description":
                    self.advance()
                    value = self.string()
                    if self.once(seen, tok):
                        method.description = value
                elif tok.text == "role":
                    method.items.append(self.parse_role())
                elif tok.text == "technique":
                    method.items.append(self.parse_technique())
                elif tok.text == "artifact":
                    method.items.append(self.parse_artifact())
                elif tok.text == "resource":
                    method.items.append(self.parse_resource())
                elif tok.text == "activity":
                    method.items.append(self.parse_activity())
                elif tok.text == "flow":
                    method.items.append(self.parse_flow())
                else:
                    raise self.fail("a method-level declaration")

            self.block(item)
        except _SyntaxFailure:
            self.recover()
            if self.at_punct("}"):
                self.advance()
        trailing = self.peek()
        if trailing.kind is not TokenKind.EOF:
            self.report("P010", f"unexpected {trailing.describe()} after the method block; "
                                "exactly one method per file", trailing.span)
        return method

    # --- declarations ---

    def parse_technique(self) -> AstTechnique:
        kw = self.advance()
        id_tok, display, _ = self.header(None)
        node = AstTechnique(id=id_tok.text, display_name=display, span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("description"):
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.description = value
            else:
                raise self.fail("a technique attribute")

        self.optional_block(item)
        return node

    def parse_role(self) -> AstRole:
        kw = self.advance()
        id_tok, display, kind = self.header("role")
        if kind is None:
            self.missing("kind", f"role '{id_tok.text}'", id_tok.span)
            kind = ""
        node = AstRole(id=id_tok.text, kind=kind, display_name=display, span=kw.span)
        if kind == RoleKind.CUSTOM.value:
            node.custom_label = self.optional_string()
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("description"):
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.description = value
            elif self.at_kw("expertIn"):
                self.advance()
                node.expert_in.extend(self.ref_list("technique id"))
            else:
                raise self.fail("a role attribute")

        self.optional_block(item)
        return node

    def parse_artifact(self) -> AstArtifact:
        kw = self.advance()
        id_tok, display, kind = self.header("artifact")
        if kind is None:
            self.missing("kind", f"artifact '{id_tok.text}'", id_tok.span)
            kind = ""
        node = AstArtifact(id=id_tok.text, kind=kind, display_name=display, span=kw.span)
        seen: Set[str] = set()
        known = kind in _KIND_NAMES["artifact"]

        def item(tok: Token) -> None:
            word = tok.text if tok.kind is TokenKind.KEYWORD else ""
            owner = _ARTIFACT_ONLY.get(word)
            if owner and known and owner != kind:
                self.report("P010", f"'{word}' is not an attribute of a {kind} artifact", tok.span)
            if word == "description":
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.description = value
            elif word == "location":
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.location = value
            elif word == "template":
                self.advance()
                value = self.ref("template id")
                if self.once(seen, tok):
                    node.template = value
            elif word == "collectedFrom":
                self.advance()
                node.collected_from.extend(self.ref_list("data source id"))
            elif word == "attribute":
                node.attributes.append(self.parse_data_attribute())
            elif word == "hyperparameter":
                node.hyperparameters.append(self.parse_hyperparameter())
            elif word == "ranking":
                self.advance()
                value = self.integer("integer ranking")
                if self.once(seen, tok):
                    node.ranking = value
            elif word == "datasetKind":
                self.advance()
                value = self.kind_name("datasetKind")
                if self.once(seen, tok):
                    node.dataset_kind = value
            elif word == "derivedFrom":
                self.advance()
                value = self.ref("data artifact id")
                if self.once(seen, tok):
                    node.derived_from = value
            else:
                raise self.fail("an artifact attribute")

        self.optional_block(item)
        return node

    def parse_data_attribute(self) -> AstDataAttribute:
        kw = self.advance()
        node = AstDataAttribute(name=self.ident("attribute name").text, span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("semanticType"):
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.semantic_type = value
            elif self.at_kw("feature"):
                self.advance()
                if self.once(seen, tok):
                    node.is_feature = True
            elif self.at_kw("correlatedTo"):
                self.advance()
                node.correlated_to.extend(self.ref_list("attribute name"))
            else:
                raise self.fail("a data attribute property")

        self.optional_block(item)
        return node

    def parse_hyperparameter(self) -> AstHyperparameter:
        kw = self.advance()
        node = AstHyperparameter(name=self.ident("hyperparameter name").text, span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("searchSpace"):
                self.advance()
                value = self.text_value("search space")
                if self.once(seen, tok):
                    node.search_space = value
            elif self.at_kw("optimal"):
                self.advance()
                value = self.text_value("optimal value")
                if self.once(seen, tok):
                    node.optimal_value = value
            else:
                raise self.fail("a hyperparameter property")

        self.optional_block(item)
        return node

    def parse_resource(self) -> AstResource:
        kw = self.advance()
        id_tok, display, kind = self.header("resource")
        if kind is None:
            self.missing("kind", f"resource '{id_tok.text}'", id_tok.span)
            kind = ""
        node = AstResource(id=id_tok.text, kind=kind, display_name=display, span=kw.span)
        seen: Set[str] = set()
        known = kind in _KIND_NAMES["resource"]

        def item(tok: Token) -> None:
            word = tok.text if tok.kind is TokenKind.KEYWORD else ""
            owner = _RESOURCE_ONLY.get(word)
            if owner and known and owner != kind:
                self.report("P010", f"'{word}' is not an attribute of a {kind} resource", tok.span)
            if word == "description":
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.description = value
            elif word == "location":
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.location = value
            elif word == "external":
                self.advance()
                if self.once(seen, tok):
                    node.is_external = True
            elif word == "selected":
                self.advance()
                if self.once(seen, tok):
                    node.selected = True
            elif word == "requirements":
                self.advance()
                node.requirements.extend(self.ref_list("requirement id"))
            elif word == "interpreter":
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.interpreter = value
            else:
                raise self.fail("a resource attribute")

        self.optional_block(item)
        return node

    def parse_flow(self) -> AstFlow:
        kw = self.advance()
        source = self.ref("activity id")
        if self.peek().kind is not TokenKind.ARROW:
            raise self.fail("'->'")
        self.advance()
        target = self.ref("activity id")
        return AstFlow(source=source, target=target, span=kw.span)

    def parse_activity(self) -> AstActivity:
        kw = self.advance()
        id_tok, display, kind = self.header("activity")
        node = AstActivity(id=id_tok.text, display_name=display, kind=kind, span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            word = tok.text if tok.kind is TokenKind.KEYWORD else ""
            if word == "description":
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.description = value
            elif word == "optional":
                self.advance()
                if self.once(seen, tok):
                    node.is_optional = True
            elif word == "requiresAll":
                self.advance()
                if self.once(seen, tok):
                    node.requires_all = True
            elif word == "input":
                self.advance()
                node.inputs.extend(self.ref_list("artifact id"))
            elif word == "output":
                self.advance()
                node.outputs.extend(self.ref_list("artifact id"))
            elif word == "uses":
                self.advance()
                node.uses.extend(self.ref_list("resource id"))
            elif word == "applies":
                self.advance()
                node.applies.extend(self.ref_list("technique id"))
            elif word == "participant":
                node.participants.append(self.parse_participant())
            elif word == "deployment":
                value = self.parse_deployment()
                if self.once(seen, tok):
                    node.deployment = value
            elif word == "monitoring":
                value = self.parse_monitoring()
                if self.once(seen, tok):
                    node.monitoring = value
            elif word == "activity":
                node.items.append(self.parse_activity())
            elif word == "flow":
                node.items.append(self.parse_flow())
            elif word == "goal":
                node.items.append(self.parse_goal())
            elif word == "requirement":
                node.items.append(self.parse_requirement())
            elif word == "criterion":
                node.items.append(self.parse_criterion())
            elif word == "performance":
                node.items.append(self.parse_performance())
            else:
                raise self.fail("an activity attribute or declaration")

        self.optional_block(item)
        return node

    def parse_participant(self) -> AstParticipant:
        kw = self.advance()
        role = self.ref("role id")
        if not self.at_kw("as"):
            raise self.fail("'as'")
        self.advance()
        responsibility = self.kind_name("responsibility")
        return AstParticipant(role=role, responsibility=responsibility, span=kw.span)

    def _statement_decl(self, family: str):
        kw = self.advance()
        id_tok = self.ident()
        self.expect_punct(":")
        kind = self.kind_name(family)
        statement = self.optional_string()
        if statement is None:
            self.missing("statement", f"{family} '{id_tok.text}'", id_tok.span)
        return kw, id_tok.text, kind, statement

    def parse_goal(self) -> AstGoal:
        kw, gid, kind, statement = self._statement_decl("goal")
        return AstGoal(id=gid, kind=kind, statement=statement, span=kw.span)

    def parse_requirement(self) -> AstRequirement:
        kw, rid, kind, statement = self._statement_decl("requirement")
        return AstRequirement(id=rid, kind=kind, statement=statement, span=kw.span)

    def parse_criterion(self) -> AstCriterion:
        kw = self.advance()
        id_tok = self.ident()
        self.expect_punct(":")
        node = AstCriterion(id=id_tok.text, kind=self.kind_name("criterion"), span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("evaluates"):
                self.advance()
                value = self.ref("goal id")
                if self.once(seen, tok):
                    node.evaluates = value
            elif self.at_kw("baseline"):
                self.advance()
                value = self.text_value("baseline")
                if self.once(seen, tok):
                    node.baseline = value
            elif self.at_kw("target"):
                self.advance()
                value = self.text_value("target")
                if self.once(seen, tok):
                    node.target = value
            elif self.at_kw("dataType"):
                self.advance()
                value = self.kind_name("dataType")
                if self.once(seen, tok):
                    node.data_type = value
            else:
                raise self.fail("a criterion attribute")

        self.optional_block(item)
        for attr, value in (("evaluates", node.evaluates), ("baseline", node.baseline),
                            ("target", node.target), ("dataType", node.data_type)):
            if value is None:
                self.missing(attr, f"criterion '{node.id}'", id_tok.span)
        return node

    def parse_performance(self) -> AstPerformance:
        kw = self.advance()
        id_tok = self.ident()
        node = AstPerformance(id=id_tok.text, metric_name=self.optional_string(), span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("threshold"):
                self.advance()
                value = self.number("threshold")
                if self.once(seen, tok):
                    node.threshold = value
            elif self.at_kw("direction"):
                self.advance()
                value = self.kind_name("direction")
                if self.once(seen, tok):
                    node.direction = value
            else:
                raise self.fail("a performance criterion attribute")

        self.optional_block(item)
        for attr, value in (("metric name", node.metric_name), ("threshold", node.threshold),
                            ("direction", node.direction)):
            if value is None:
                self.missing(attr, f"performance criterion '{node.id}'", id_tok.span)
        return node

    def parse_deployment(self) -> AstDeployment:
        kw = self.advance()
        node = AstDeployment(span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            word = tok.text if tok.kind is TokenKind.KEYWORD else ""
            if word in ("pattern", "strategy", "inference"):
                self.advance()
                value = self.kind_name(word)
                if self.once(seen, tok):
                    setattr(node, word, value)
            elif word == "platform":
                self.advance()
                value = self.ref("platform id")
                if self.once(seen, tok):
                    node.platform = value
            elif word == "scripts":
                self.advance()
                node.scripts.extend(self.ref_list("script id"))
            else:
                raise self.fail("a deployment attribute")

        self.block(item)
        for attr in ("pattern", "strategy", "inference"):
            if getattr(node, attr) is None:
                self.missing(attr, "deployment", kw.span)
        return node

    def parse_monitoring(self) -> AstMonitoring:
        kw = self.advance()
        node = AstMonitoring(span=kw.span)

        def item(tok: Token) -> None:
            if self.at_kw("flaw"):
                node.flaws.append(self.parse_flaw())
            elif self.at_kw("metric"):
                node.metrics.append(self.parse_metric())
            else:
                raise self.fail("'flaw' or 'metric'")

        self.block(item)
        return node

    def parse_flaw(self) -> AstFlaw:
        kw = self.advance()
        id_tok = self.ident()
        node = AstFlaw(id=id_tok.text, description=self.optional_string(), span=kw.span)
        if node.description is None:
            self.missing("description", f"flaw '{node.id}'", id_tok.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("relatedTo"):
                self.advance()
                value = self.ref("requirement id")
                if self.once(seen, tok):
                    node.related_to = value
            else:
                raise self.fail("'relatedTo'")

        self.optional_block(item)
        return node

    def parse_metric(self) -> AstMetric:
        kw = self.advance()
        id_tok = self.ident()
        node = AstMetric(id=id_tok.text, name=self.optional_string(), span=kw.span)
        seen: Set[str] = set()

        def item(tok: Token) -> None:
            if self.at_kw("min"):
                self.advance()
                value = self.number("minimum threshold")
                if self.once(seen, tok):
                    node.min_threshold = value
            elif self.at_kw("max"):
                self.advance()
                value = self.number("maximum threshold")
                if self.once(seen, tok):
                    node.max_threshold = value
            elif self.at_kw("unit"):
                self.advance()
                value = self.string()
                if self.once(seen, tok):
                    node.unit = value
            else:
                raise self.fail("a metric attribute")

        self.optional_block(item)
        for attr, value in (("name", node.name), ("min", node.min_threshold),
                            ("max", node.max_threshold)):
            if value is None:
                self.missing(attr, f"metric '{node.id}'", id_tok.span)
        return node


def parse(text: Union[str, bytes]) -> Tuple[AstMethod, List[Diagnostic]]:
    """Parse one .mlproc file. Never raises; problems come back as diagnostics."""
    tokens, diagnostics = tokenize(text)
    parser = _Parser(tokens, diagnostics)
    method = parser.parse_method()
    return method, diagnostics


# ----------------------- Canonical printer -----------------------

def quote(value: str) -> str:
    escaped = (value.replace("\\", "\\\\").replace('"', '\\"')
               .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))
    return f'"{escaped}"'


def _names(refs: List[Ref]) -> str:
    return ", ".join(r.name for r in refs)


class _Printer:
    def __init__(self):
        self.lines: List[str] = []
        self.level = 0

    def line(self, text: str) -> None:
        self.lines.append("  " * self.level + text)

    def element(self, head: str, attrs: List[str], body: Optional[Callable[[], None]] = None) -> None:
        """`head` alone, or `head {` + attributes + nested body + `}`."""
        if not attrs and body is None:
            self.line(head)
            return
        self.line(head + " {")
        self.level += 1
        for attr in attrs:
            self.line(attr)
        if body is not None:
            body()
        self.level -= 1
        self.line("}")

    @staticmethod
    def decl(keyword: str, ident: str, display: Optional[str], kind: Optional[str] = None) -> str:
        head = f"{keyword} {ident}"
        if display is not None:
            head += f" {quote(display)}"
        if kind is not None:
            head += f" : {kind}"
        return head

    def method(self, m: AstMethod) -> None:
        self.line(f"method {quote(m.name)} {{")
        self.level += 1
        if m.description is not None:
            self.line(f"description {quote(m.description)}")
        for it in m.items:
            self.item(it)
        self.level -= 1
        self.line("}")

    def item(self, it) -> None:
        handler = getattr(self, "print_" + type(it).__name__)
        handler(it)

    def print_AstTechnique(self, t: AstTechnique) -> None:
        attrs = [f"description {quote(t.description)}"] if t.description is not None else []
        self.element(self.decl("technique", t.id, t.display_name), attrs)

    def print_AstRole(self, r: AstRole) -> None:
        head = self.decl("role", r.id, r.display_name, r.kind)
        if r.custom_label is not None:
            head += f" {quote(r.custom_label)}"
        attrs = []
        if r.description is not None:
            attrs.append(f"description {quote(r.description)}")
        if r.expert_in:
            attrs.append(f"expertIn {_names(r.expert_in)}")
        self.element(head, attrs)

    def print_AstArtifact(self, a: AstArtifact) -> None:
        attrs = []
        if a.description is not None:
            attrs.append(f"description {quote(a.description)}")
        if a.location is not None:
            attrs.append(f"location {quote(a.location)}")
        if a.template is not None:
            attrs.append(f"template {a.template.name}")
        if a.collected_from:
            attrs.append(f"collectedFrom {_names(a.collected_from)}")

        def body() -> None:
            for at in a.attributes:
                sub = []
                if at.semantic_type is not None:
                    sub.append(f"semanticType {quote(at.semantic_type)}")
                if at.is_feature:
                    sub.append("feature")
                if at.correlated_to:
                    sub.append(f"correlatedTo {_names(at.correlated_to)}")
                self.element(f"attribute {at.name}", sub)
            for hp in a.hyperparameters:
                sub = []
                if hp.search_space is not None:
                    sub.append(f"searchSpace {quote(hp.search_space)}")
                if hp.optimal_value is not None:
                    sub.append(f"optimal {quote(hp.optimal_value)}")
                self.element(f"hyperparameter {hp.name}", sub)
            if a.ranking is not None:
                self.line(f"ranking {a.ranking}")
            if a.dataset_kind is not None:
                self.line(f"datasetKind {a.dataset_kind}")
            if a.derived_from is not None:
                self.line(f"derivedFrom {a.derived_from.name}")

        has_body = bool(a.attributes or a.hyperparameters or a.ranking is not None
                        or a.dataset_kind is not None or a.derived_from is not None)
        self.element(self.decl("artifact", a.id, a.display_name, a.kind), attrs,
                     body if has_body else None)

    def print_AstResource(self, r: AstResource) -> None:
        attrs = []
        if r.description is not None:
            attrs.append(f"description {quote(r.description)}")
        if r.location is not None:
            attrs.append(f"location {quote(r.location)}")
        if r.is_external:
            attrs.append("external")
        if r.selected:
            attrs.append("selected")
        if r.requirements:
            attrs.append(f"requirements {_names(r.requirements)}")
        if r.interpreter is not None:
            attrs.append(f"interpreter {quote(r.interpreter)}")
        self.element(self.decl("resource", r.id, r.display_name, r.kind), attrs)

    def print_AstFlow(self, f: AstFlow) -> None:
        self.line(f"flow {f.source.name} -> {f.target.name}")

    def print_AstGoal(self, g: AstGoal) -> None:
        self.line(f"goal {g.id} : {g.kind} {quote(g.statement or '')}")

    def print_AstRequirement(self, r: AstRequirement) -> None:
        self.line(f"requirement {r.id} : {r.kind} {quote(r.statement or '')}")

    def print_AstCriterion(self, c: AstCriterion) -> None:
        attrs = [
            f"evaluates {c.evaluates.name}",
            f"baseline {quote(c.baseline)}",
            f"target {quote(c.target)}",
            f"dataType {c.data_type}",
        ]
        self.element(f"criterion {c.id} : {c.kind}", attrs)

    def print_AstPerformance(self, p: AstPerformance) -> None:
        attrs = [f"threshold {p.threshold}", f"direction {p.direction}"]
        self.element(f"performance {p.id} {quote(p.metric_name)}", attrs)

    def print_AstFlaw(self, f: AstFlaw) -> None:
        attrs = [f"relatedTo {f.related_to.name}"] if f.related_to is not None else []
        self.element(f"flaw {f.id} {quote(f.description)}", attrs)

    def print_AstMetric(self, m: AstMetric) -> None:
        attrs = [f"min {m.min_threshold}", f"max {m.max_threshold}"]
        if m.unit is not None:
            attrs.append(f"unit {quote(m.unit)}")
        self.element(f"metric {m.id} {quote(m.name)}", attrs)

    def print_AstActivity(self, a: AstActivity) -> None:
        attrs = []
        if a.description is not None:
            attrs.append(f"description {quote(a.description)}")
        if a.is_optional:
            attrs.append("optional")
        if a.requires_all:
            attrs.append("requiresAll")
        for keyword, refs in (("input", a.inputs), ("output", a.outputs),
                              ("uses", a.uses), ("applies", a.applies)):
            if refs:
                attrs.append(f"{keyword} {_names(refs)}")
        for p in a.participants:
            attrs.append(f"participant {p.role.name} as {p.responsibility}")

        def body() -> None:
            if a.deployment is not None:
                d = a.deployment
                sub = [f"pattern {d.pattern}", f"strategy {d.strategy}", f"inference {d.inference}"]
                if d.platform is not None:
                    sub.append(f"platform {d.platform.name}")
                if d.scripts:
                    sub.append(f"scripts {_names(d.scripts)}")
                self.line("deployment {")
                self.level += 1
                for s in sub:
                    self.line(s)
                self.level -= 1
                self.line("}")
            if a.monitoring is not None:
                self.line("monitoring {")
                self.level += 1
                for fl in a.monitoring.flaws:
                    self.print_AstFlaw(fl)
                for me in a.monitoring.metrics:
                    self.print_AstMetric(me)
                self.level -= 1
                self.line("}")
            for it in a.items:
                self.item(it)

        has_body = a.deployment is not None or a.monitoring is not None or bool(a.items)
        self.element(self.decl("activity", a.id, a.display_name, a.kind), attrs,
                     body if has_body else None)


def print_canonical(ast: AstMethod) -> str:
    """Normative formatting: 2-space indent, one attribute per line."""
    if ast.errors:
        first = ast.errors[0]
        raise PrintError("P020", f"tree holds {len(ast.errors)} error placeholder(s), "
                                 f"first: {first.message}")
    printer = _Printer()
    printer.method(ast)
    return "\n".join(printer.lines) + "\n"
