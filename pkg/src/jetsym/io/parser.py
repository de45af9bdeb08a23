"""Parser for expressions and equation-spec files.

Expression grammar (whitespace-insensitive)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" ["-"] INT)?
    atom   := INT | NAME | "(" expr ")"

Names resolve to u-jets (``u``, ``u_x``, ``u_xx``, ``u_5``), jets of declared
functions (``h``, ``h'``, ``h''``, ``h_3``, ``h_xx``), the coordinates ``x`` and
``t``, or declared parameters.  Division and negative powers are allowed only
on jet-free operands.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from ..algebra import NonzeroSet, ParamElem
from ..jet import (
    T_KEY, X_KEY, AuxFunction, DiffPoly, EvolutionEquation, JetError, Substitution,
    aux_key, register_family, u_key,
)

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<int>\d+)
  | (?P<name>[a-z][a-z0-9_]*'*)
  | (?P<op>[-+*/^()=])
""", re.VERBOSE)

_JET_SUFFIX = re.compile(r"^(?:x+|\d+)$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line0: int = 1, col0: int = 1) -> list[_Tok]:
    toks = []
    pos = 0
    line, col = line0, col0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, col))
        for ch in m.group():
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class Context:
    """Symbol environment for expression parsing."""

    def __init__(self, params=(), functions: dict[str, str] | None = None):
        self.params = set(params)
        self.functions = dict(functions or {})
        for name, base in self.functions.items():
            register_family(name, base)

    def resolve(self, name: str, tok: _Tok) -> DiffPoly:
        primes = len(name) - len(name.rstrip("'"))
        base = name.rstrip("'")
        if base in ("x", "t") and not primes:
            return DiffPoly.var(X_KEY if base == "x" else T_KEY)
        if base == "u" or base.startswith("u_"):
            if primes:
                raise ParseError("primes are not allowed on u; write u_x", tok.line, tok.col)
            if base == "u":
                return DiffPoly.u(0)
            suffix = base[2:]
            if suffix == "t":
                raise ParseError("u_t may only appear on the left-hand side", tok.line, tok.col)
            if not _JET_SUFFIX.match(suffix):
                raise ParseError(f"bad jet spelling {name!r}", tok.line, tok.col)
            k = len(suffix) if suffix[0] == "x" else int(suffix)
            return DiffPoly.var(u_key(k))
        if base in self.functions:
            return DiffPoly.var(aux_key(base, primes))
        head, sep, suffix = base.rpartition("_")
        if sep and head in self.functions and not primes:
            coord = self.functions[head]
            if re.fullmatch(r"\d+", suffix):
                return DiffPoly.var(aux_key(head, int(suffix)))
            if re.fullmatch(f"{coord}+", suffix):
                return DiffPoly.var(aux_key(head, len(suffix)))
        if base in self.params and not primes:
            return DiffPoly.param(base)
        raise ParseError(f"undeclared symbol {name!r}", tok.line, tok.col)


class _Parser:
    def __init__(self, toks: list[_Tok], ctx: Context):
        self.toks = toks
        self.i = 0
        self.ctx = ctx

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self, text: str | None = None) -> _Tok:
        t = self.tok
        if text is not None and t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        self.i += 1
        return t

    def expr(self) -> DiffPoly:
        out = self.term()
        while self.tok.text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            out = out + rhs if op == "+" else out - rhs
        return out

    def term(self) -> DiffPoly:
        out = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.take()
            rhs = self.unary()
            if op.text == "*":
                out = out * rhs
            else:
                if not rhs.is_constant():
                    raise ParseError("division by a jet-dependent expression", op.line, op.col)
                c = rhs.constant_term()
                if not c:
                    raise ParseError("division by zero", op.line, op.col)
                out = out.scale(1 / c)
        return out

    def unary(self) -> DiffPoly:
        if self.tok.text == "-":
            self.take()
            return -self.unary()
        if self.tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> DiffPoly:
        base = self.atom()
        if self.tok.text == "^":
            op = self.take()
            neg = False
            if self.tok.text == "-":
                self.take()
                neg = True
            t = self.take()
            if t.kind != "int":
                raise ParseError("exponent must be an integer literal", t.line, t.col)
            k = int(t.text)
            if neg:
                if not base.is_constant():
                    raise ParseError("negative power of a jet-dependent expression", op.line, op.col)
                c = base.constant_term()
                if not c:
                    raise ParseError("division by zero", op.line, op.col)
                return DiffPoly.const(c ** (-k))
            return base ** k
        return base

    def atom(self) -> DiffPoly:
        t = self.tok
        if t.kind == "int":
            self.take()
            return DiffPoly.const(int(t.text))
        if t.kind == "name":
            self.take()
            return self.ctx.resolve(t.text, t)
        if t.text == "(":
            self.take()
            out = self.expr()
            self.take(")")
            return out
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col)


def parse_expr(text: str, ctx: Context | None = None, *, line: int = 1, col: int = 1) -> DiffPoly:
    """Parse an expression into a DiffPoly."""
    p = _Parser(_tokenize(text, line, col), ctx or Context())
    out = p.expr()
    if p.tok.kind != "eof":
        raise ParseError(f"unexpected {p.tok.text!r}", p.tok.line, p.tok.col)
    return out


def parse_param_expr(text: str, params, *, line: int = 1, col: int = 1) -> ParamElem:
    p = parse_expr(text, Context(params), line=line, col=col)
    if not p.is_constant():
        raise ParseError("expected a parameter expression", line, col)
    return ParamElem.coerce(p.constant_term())


# -- equation-spec files ------------------------------------------------------

_NAME = r"[a-z][a-z0-9_]*"


def _split_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def parse_equation(text: str, *, name: str = "equation", verify_checksum: bool = True
                   ) -> EvolutionEquation:
    """Parse an equation-spec document or a bare ``u_t = <expr>`` line."""
    params: list[str] = []
    nonzero: list[str] = []
    functions: dict[str, str] = {}
    scenario_src: list[tuple[str, str, int]] = []
    eq_src: tuple[str, int, int] | None = None
    checksum: tuple[str, int] | None = None
    title = name

    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i]
        lineno = i + 1
        i += 1
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        s = stripped.strip()
        # continuation lines (indented) belong to the preceding entry
        while i < len(lines) and lines[i][:1] in (" ", "\t") and lines[i].split("#", 1)[0].strip():
            s += " " + lines[i].split("#", 1)[0].strip()
            i += 1
        key, sep, rest = s.partition(":")
        key = key.strip()
        if sep and key == "name":
            title = rest.strip()
        elif sep and key == "params":
            for item in _split_list(rest):
                flag = item.endswith("!")
                sym = item.rstrip("!").strip()
                if not re.fullmatch(_NAME, sym) or sym in ("x", "t", "u") or sym.startswith("u_"):
                    raise ParseError(f"bad parameter name {sym!r}", lineno)
                params.append(sym)
                if flag:
                    nonzero.append(sym)
        elif sep and key == "functions":
            for item in _split_list(rest):
                m = re.fullmatch(rf"({_NAME})\s*\(\s*([xt])\s*\)", item)
                if not m:
                    raise ParseError(f"bad function declaration {item!r}", lineno)
                functions[m.group(1)] = m.group(2)
        elif sep and key.startswith("scenario"):
            m = re.fullmatch(rf"scenario\s+({_NAME})", key)
            if not m:
                raise ParseError(f"bad scenario header {key!r}", lineno)
            scenario_src.append((m.group(1), rest, lineno))
        elif sep and key == "checksum":
            checksum = (rest.strip(), lineno)
        elif sep and key == "equation":
            eq_src = (rest, lineno, raw.index(":") + 2)
        elif "=" in s:
            eq_src = (s, lineno, 1)
        else:
            raise ParseError(f"unrecognized line {s!r}", lineno)

    if eq_src is None:
        raise ParseError("missing equation 'u_t = ...'", len(lines) or 1)
    body, lineno, col = eq_src
    lhs, eqsign, rhs_text = body.partition("=")
    if not eqsign:
        raise ParseError("expected '='", lineno, col)
    if lhs.strip() != "u_t":
        raise ParseError(f"left-hand side must be u_t, found {lhs.strip()!r}", lineno, col)
    ctx = Context(params, functions)
    rhs = parse_expr(rhs_text, ctx, line=lineno, col=col + len(lhs) + 1)
    for k in rhs.variables():
        if k == T_KEY:
            raise ParseError("explicit t-dependence in the right-hand side", lineno, col)

    scenarios = {}
    for sname, src, sline in scenario_src:
        scenarios[sname] = tuple(_parse_substitutions(src, params, functions, sline))

    eq = EvolutionEquation(
        rhs=rhs, params=tuple(params), nonzero=NonzeroSet(nonzero),
        aux={f: AuxFunction(f, b) for f, b in functions.items()},
        scenarios=scenarios, name=title)
    if checksum is not None and verify_checksum:
        want = checksum[0].removeprefix("sha256:")
        got = canonical_checksum(eq)
        if want != got:
            raise ParseError(f"checksum mismatch: file says {want}, canonical form gives {got}",
                             checksum[1])
    return eq


def _parse_substitutions(src: str, params, functions, line: int) -> list[Substitution]:
    out = []
    for item in [x.strip() for x in src.split(";") if x.strip()]:
        lhs, eqsign, rhs = item.partition("=")
        lhs, rhs = lhs.strip(), rhs.strip()
        if not eqsign:
            raise ParseError(f"bad substitution {item!r}", line)
        base = lhs.rstrip("'")
        if base in functions:
            if lhs.endswith("'") and rhs == "0":
                out.append(Substitution("aux_const", base))
            elif lhs == base:
                out.append(Substitution("aux_value", base, parse_param_expr(rhs, params, line=line)))
            else:
                raise ParseError(f"unsupported substitution {item!r}", line)
        elif lhs in params:
            out.append(Substitution("param", lhs, parse_param_expr(rhs, params, line=line)))
        else:
            raise ParseError(f"substitution target {lhs!r} is not declared", line)
    return out


# -- printing -----------------------------------------------------------------


def _subst_text(s: Substitution) -> str:
    from .render import render_param
    if s.kind == "aux_const":
        return f"{s.target}' = 0"
    return f"{s.target} = {render_param(s.value)}"


def canonical_text(eq: EvolutionEquation) -> str:
    """Canonical equation-spec text (without the checksum line)."""
    from .render import render
    nz = set(eq.nonzero)
    lines = [f"name: {eq.name}"]
    if eq.params:
        lines.append("params: " + ", ".join(p + ("!" if p in nz else "") for p in eq.params))
    xt = [f for f in eq.aux.values()]
    if xt:
        lines.append("functions: " + ", ".join(f"{f.name}({f.base})" for f in xt))
    lines.append(f"u_t = {render(eq.rhs)}")
    for sname, subs in eq.scenarios.items():
        lines.append(f"scenario {sname}: " + "; ".join(_subst_text(s) for s in subs))
    return "\n".join(lines) + "\n"


def canonical_checksum(eq: EvolutionEquation) -> str:
    return hashlib.sha256(canonical_text(eq).encode()).hexdigest()


def print_equation(eq: EvolutionEquation) -> str:
    """Canonical file text including its checksum."""
    return canonical_text(eq) + f"checksum: sha256:{canonical_checksum(eq)}\n"
