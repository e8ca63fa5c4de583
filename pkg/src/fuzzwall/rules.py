"""Plain-text rule language for fuzzy rule bases.

Example::

    # comments run to end of line
    samples 2001;

    var source [0, 1] {
        Low    gauss(0.0, 0.07);
        Medium gauss(0.5, 0.07);
        High   gauss(1.0, 0.07);
    }
    var security [0, 1] { ... }

    if source is Low and destination is Medium-High then security is MediumSecured;

The output variable is the one named in ``then`` clauses; every other
declared variable is an input, in declaration order. Identifiers are
case-sensitive. ``A-B`` in a term position names the set midway between
adjacent terms A and B.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from fuzzwall.fuzzy import (
    HEDGE_SEP,
    FuzzyError,
    FuzzyRule,
    GaussianMF,
    LinguisticTerm,
    LinguisticVariable,
    RuleBase,
)

__all__ = [
    "ParseDiagnostic",
    "RuleSyntaxError",
    "parse_rules",
    "check_rules",
    "format_rules",
    "load_rules",
    "default_rules_path",
]

KEYWORDS = frozenset({"var", "if", "and", "then", "is", "gauss", "samples"})
DEFAULT_SAMPLES = 2001

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[\[\]{}(),;\-])
    """,
    re.VERBOSE,
)
_NUMBER_TAIL = re.compile(r"[A-Za-z0-9_.]+")


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class RuleSyntaxError(ValueError):
    """Raised by :func:`parse_rules`; carries every diagnostic found."""

    def __init__(self, diagnostics: list[ParseDiagnostic], source: str = "<rules>"):
        self.diagnostics = diagnostics
        self.source = source
        lines = "\n".join(f"{source}:{d}" for d in diagnostics)
        super().__init__(f"invalid rule file\n{lines}")


@dataclass(frozen=True)
class _Tok:
    kind: str  # ident | keyword | number | punct | eof
    text: str
    line: int
    col: int


class _Bail(Exception):
    pass


def _tokenize(text: str, diags: list[ParseDiagnostic]) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            diags.append(ParseDiagnostic("error", f"unexpected character `{text[pos]}`", line, col))
            pos += 1
            continue
        kind = m.lastgroup
        end = m.end()
        if kind == "nl":
            line += 1
            line_start = end
        elif kind == "number":
            tail = _NUMBER_TAIL.match(text, end)
            if tail:
                end = tail.end()
                diags.append(
                    ParseDiagnostic("error", f"malformed number `{text[pos:end]}`", line, col)
                )
                toks.append(_Tok("badnumber", text[pos:end], line, col))
            else:
                toks.append(_Tok("number", m.group(), line, col))
        elif kind == "ident":
            word = m.group()
            toks.append(_Tok("keyword" if word in KEYWORDS else "ident", word, line, col))
        elif kind == "punct":
            toks.append(_Tok("punct", m.group(), line, col))
        pos = end
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# --- syntax tree (positions kept for semantic diagnostics) -------------------


@dataclass
class _TermDecl:
    name: _Tok
    center: float
    width: float
    width_tok: _Tok


@dataclass
class _VarDecl:
    name: _Tok
    lo: float
    hi: float
    lo_tok: _Tok
    terms: list[_TermDecl]


@dataclass
class _Label:
    parts: list[_Tok]

    @property
    def text(self) -> str:
        return HEDGE_SEP.join(p.text for p in self.parts)


@dataclass
class _RuleDecl:
    start: _Tok
    conds: list[tuple[_Tok, _Label]]
    out_var: _Tok
    out_label: _Label


class _Parser:
    def __init__(self, toks: list[_Tok], diags: list[ParseDiagnostic]):
        self.toks = toks
        self.i = 0
        self.diags = diags
        self.vars: list[_VarDecl] = []
        self.rules: list[_RuleDecl] = []
        self.samples: list[tuple[_Tok, int]] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg: str, tok: _Tok | None = None) -> _Bail:
        tok = tok or self.tok
        self.diags.append(ParseDiagnostic("error", msg, tok.line, tok.col))
        return _Bail()

    @staticmethod
    def _show(tok: _Tok) -> str:
        return "end of input" if tok.kind == "eof" else f"`{tok.text}`"

    def expect(self, text: str) -> _Tok:
        if self.tok.text == text and self.tok.kind in ("punct", "keyword"):
            return self.advance()
        raise self.error(f"expected `{text}`, found {self._show(self.tok)}")

    def ident(self, what: str) -> _Tok:
        if self.tok.kind == "ident":
            return self.advance()
        if self.tok.kind == "keyword":
            raise self.error(f"keyword `{self.tok.text}` cannot be used as {what}")
        raise self.error(f"expected {what}, found {self._show(self.tok)}")

    def number(self) -> tuple[float, _Tok]:
        start = self.tok
        neg = False
        if self.tok.kind == "punct" and self.tok.text == "-":
            neg = True
            self.advance()
        if self.tok.kind == "badnumber":
            self.advance()
            raise _Bail()  # already reported by the tokenizer
        if self.tok.kind != "number":
            raise self.error(f"expected a number, found {self._show(self.tok)}")
        tok = self.advance()
        value = float(tok.text)
        if not math.isfinite(value):
            raise self.error(f"number `{tok.text}` is out of range", tok)
        if neg:
            return -value, _Tok("number", "-" + tok.text, start.line, start.col)
        return value, tok

    def label(self) -> _Label:
        parts = [self.ident("a term name")]
        while self.tok.kind == "punct" and self.tok.text == "-":
            self.advance()
            parts.append(self.ident("a term name after `-`"))
        return _Label(parts)

    # statements

    def parse(self) -> None:
        while self.tok.kind != "eof":
            start = self.i
            try:
                self.statement()
            except _Bail:
                self.recover(start)

    def recover(self, start: int) -> None:
        # Resynchronise on the next statement keyword.
        if self.i == start:
            self.advance()
        while self.tok.kind != "eof":
            if self.tok.kind == "keyword" and self.tok.text in ("var", "if", "samples"):
                return
            self.advance()

    def statement(self) -> None:
        t = self.tok
        if t.kind == "keyword" and t.text == "var":
            self.var_decl()
        elif t.kind == "keyword" and t.text == "if":
            self.rule()
        elif t.kind == "keyword" and t.text == "samples":
            self.advance()
            value, tok = self.number()
            if value != int(value):
                raise self.error(f"sample count `{tok.text}` must be an integer", tok)
            self.expect(";")
            self.samples.append((tok, int(value)))
        else:
            raise self.error(f"expected `var`, `if` or `samples`, found {self._show(t)}")

    def var_decl(self) -> None:
        self.expect("var")
        name = self.ident("a variable name")
        self.expect("[")
        lo, lo_tok = self.number()
        self.expect(",")
        hi, _ = self.number()
        self.expect("]")
        self.expect("{")
        terms = []
        while not (self.tok.kind == "punct" and self.tok.text == "}"):
            if self.tok.kind == "eof":
                raise self.error(f"unterminated block for variable `{name.text}`")
            tname = self.ident("a term name")
            self.expect("gauss")
            self.expect("(")
            center, _ = self.number()
            self.expect(",")
            width, wtok = self.number()
            self.expect(")")
            self.expect(";")
            terms.append(_TermDecl(tname, center, width, wtok))
        self.expect("}")
        self.vars.append(_VarDecl(name, lo, hi, lo_tok, terms))

    def rule(self) -> None:
        start = self.expect("if")
        conds = []
        while True:
            var = self.ident("a variable name")
            self.expect("is")
            conds.append((var, self.label()))
            if self.tok.kind == "keyword" and self.tok.text == "and":
                self.advance()
                continue
            break
        self.expect("then")
        out_var = self.ident("the output variable name")
        self.expect("is")
        out_label = self.label()
        self.expect(";")
        self.rules.append(_RuleDecl(start, conds, out_var, out_label))


def _build(p: _Parser, diags: list[ParseDiagnostic], partial: bool = False) -> RuleBase | None:
    """Semantic checks and RuleBase construction.

    ``partial`` is set after syntax errors: statements were skipped, so
    whole-file checks (output/input presence) would only add noise.
    """
    def err(msg: str, tok: _Tok) -> None:
        diags.append(ParseDiagnostic("error", msg, tok.line, tok.col))

    variables: dict[str, LinguisticVariable] = {}
    order: list[str] = []
    for v in p.vars:
        ok = True
        if v.name.text in variables or v.name.text in order:
            err(f"duplicate variable `{v.name.text}`", v.name)
            continue
        order.append(v.name.text)
        if v.lo >= v.hi:
            err(f"empty universe [{v.lo:g}, {v.hi:g}] for variable `{v.name.text}`", v.lo_tok)
            ok = False
        if len(v.terms) < 2:
            err(f"variable `{v.name.text}` needs at least 2 terms, has {len(v.terms)}", v.name)
            ok = False
        seen: set[str] = set()
        for t in v.terms:
            if t.name.text in seen:
                err(f"duplicate term `{t.name.text}` in variable `{v.name.text}`", t.name)
                ok = False
            seen.add(t.name.text)
            if t.width <= 0:
                err(f"non-positive width `{t.width_tok.text}` for term `{t.name.text}`", t.width_tok)
                ok = False
            if v.lo < v.hi and not v.lo <= t.center <= v.hi:
                err(
                    f"centre {t.center:g} of term `{t.name.text}` lies outside "
                    f"[{v.lo:g}, {v.hi:g}]",
                    t.name,
                )
                ok = False
        if ok:
            try:
                variables[v.name.text] = LinguisticVariable(
                    v.name.text,
                    v.lo,
                    v.hi,
                    tuple(LinguisticTerm(t.name.text, GaussianMF(t.center, t.width)) for t in v.terms),
                )
            except FuzzyError as exc:  # pragma: no cover - checks above mirror these
                err(str(exc), v.name)

    declared = set(order)
    outputs = []
    for r in p.rules:
        if r.out_var.text not in outputs:
            outputs.append(r.out_var.text)
    if not outputs:
        if not partial:
            tok = p.toks[0]
            diags.append(ParseDiagnostic("error", "no output variable declared", tok.line, tok.col))
        return None
    if len(outputs) > 1:
        for r in p.rules:
            if r.out_var.text != outputs[0]:
                err(
                    f"rules conclude on both `{outputs[0]}` and `{r.out_var.text}`; "
                    "exactly one output variable is allowed",
                    r.out_var,
                )
                break
    out_name = outputs[0]

    def check_label(var: LinguisticVariable, label: _Label, allow_hedge: bool) -> bool:
        for part in label.parts:
            if part.text not in var.term_names:
                err(f"variable `{var.name}` has no term `{part.text}`", part)
                return False
        if len(label.parts) > 1:
            if not allow_hedge:
                err(f"compound term `{label.text}` not allowed in a conclusion", label.parts[0])
                return False
            try:
                var.mf_for(label.text)
            except FuzzyError:
                err(f"`{label.text}` must join two adjacent terms of `{var.name}`", label.parts[0])
                return False
        return True

    rules = []
    for r in p.rules:
        ok = True
        used = set()
        for vtok, label in r.conds:
            name = vtok.text
            if name not in declared:
                err(f"unknown variable `{name}`", vtok)
                ok = False
                continue
            if name == out_name:
                err(f"output variable `{name}` cannot appear in a condition", vtok)
                ok = False
                continue
            if name in used:
                err(f"variable `{name}` tested twice in one rule", vtok)
                ok = False
            used.add(name)
            if name in variables:
                ok = check_label(variables[name], label, True) and ok
        if r.out_var.text not in declared:
            err(f"unknown variable `{r.out_var.text}`", r.out_var)
            ok = False
        elif r.out_var.text in variables:
            ok = check_label(variables[r.out_var.text], r.out_label, False) and ok
        if ok:
            rules.append(
                FuzzyRule(
                    tuple((v.text, lab.text) for v, lab in r.conds),
                    (r.out_var.text, r.out_label.text),
                )
            )

    samples = DEFAULT_SAMPLES
    if len(p.samples) > 1:
        err("`samples` declared more than once", p.samples[1][0])
    if p.samples:
        tok, samples = p.samples[0]
        if samples < 101:
            err(f"sample count `{tok.text}` must be at least 101", tok)

    inputs = [n for n in order if n != out_name]
    if not inputs and not partial:
        diags.append(ParseDiagnostic("error", "no input variables declared", 1, 1))
    referenced = {v.text for r in p.rules for v, _ in r.conds}
    for v in p.vars:
        if v.name.text in inputs and v.name.text not in referenced:
            diags.append(
                ParseDiagnostic(
                    "warning",
                    f"variable `{v.name.text}` is never used in a rule",
                    v.name.line,
                    v.name.col,
                )
            )

    if any(d.severity == "error" for d in diags):
        return None
    try:
        return RuleBase(
            tuple(variables[n] for n in inputs), variables[out_name], tuple(rules), samples
        )
    except FuzzyError as exc:  # pragma: no cover - defensive; _build mirrors RuleBase checks
        diags.append(ParseDiagnostic("error", str(exc), 1, 1))
        return None


def _compile(text: str) -> tuple[RuleBase | None, list[ParseDiagnostic]]:
    diags: list[ParseDiagnostic] = []
    parser = _Parser(_tokenize(text, diags), diags)
    parser.parse()
    if any(d.severity == "error" for d in diags):
        # Still run semantic checks so one pass reports as much as possible.
        _build(parser, diags, partial=True)
        return None, diags
    rb = _build(parser, diags)
    return rb, diags


def check_rules(text: str) -> list[ParseDiagnostic]:
    """All diagnostics (errors and warnings) for ``text``, without raising."""
    return _compile(text)[1]


def parse_rules(text: str, source: str = "<rules>") -> RuleBase:
    """Parse rule-language ``text``; raises :class:`RuleSyntaxError` on any error."""
    rb, diags = _compile(text)
    if rb is None:
        raise RuleSyntaxError([d for d in diags if d.severity == "error"], source)
    return rb


def _num(x: float) -> str:
    return repr(float(x))


def _format_var(var: LinguisticVariable) -> Iterator[str]:
    yield f"var {var.name} [{_num(var.lo)}, {_num(var.hi)}] {{"
    pad = max(len(t.name) for t in var.terms)
    for t in var.terms:
        yield f"    {t.name.ljust(pad)} gauss({_num(t.mf.center)}, {_num(t.mf.width)});"
    yield "}"


def format_rules(rb: RuleBase) -> str:
    """Canonical text for ``rb``; parsing it yields an equal RuleBase."""
    lines = [f"samples {rb.defuzz_samples};", ""]
    for var in (*rb.inputs, rb.output):
        lines.extend(_format_var(var))
        lines.append("")
    for rule in rb.rules:
        lines.append(f"{rule};")
    return "\n".join(lines) + "\n"


def default_rules_path() -> Path:
    return Path(__file__).with_name("data") / "tableI.rules"


def load_rules(path: str | Path) -> RuleBase:
    path = Path(path)
    return parse_rules(path.read_text(encoding="utf-8"), source=str(path))
