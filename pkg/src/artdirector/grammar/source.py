"""Grammar data model and the text format it is read from.

Format::

    # comment
    %separator " "          # implicit separator (default one space, or `none`)
    %start S                # default: lhs of the first rule
    S       ::= Element | Element Attribute
    Element ::= "cat" | "dog"
              | "bird"       # a line starting with | continues the rule
    Glued   ::= "x" ~ "y"    # ~ joins two symbols without the separator
    Maybe   ::= "z" | ε      # an empty alternative (or ε) derives nothing

Terminals are double-quoted and accept the escapes ``\\n \\t \\r \\\\ \\" \\xHH``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from ..errors import (
    EmptyTerminalError,
    GrammarSyntaxError,
    UndefinedSymbolError,
    UnproductiveNonterminalError,
)

Symbol = Union[str, bytes]  # str names a nonterminal, bytes is a terminal


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[Symbol, ...]
    # glue[i] is True when rhs[i] and rhs[i + 1] are joined without separator
    glue: tuple[bool, ...] = ()

    def __post_init__(self):
        if not self.glue and len(self.rhs) > 1:
            object.__setattr__(self, "glue", (False,) * (len(self.rhs) - 1))

    def __str__(self) -> str:
        parts = []
        for i, sym in enumerate(self.rhs):
            if i and self.glue[i - 1]:
                parts.append("~")
            parts.append(sym if isinstance(sym, str) else _quote(sym))
        return f"{self.lhs} ::= " + (" ".join(parts) if parts else "ε")


@dataclass(frozen=True)
class Grammar:
    nonterminals: tuple[str, ...]
    terminals: frozenset[bytes]
    productions: tuple[Production, ...]
    start: str
    implicit_separator: bytes = b" "
    _by_lhs: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        by_lhs: dict[str, list[Production]] = {n: [] for n in self.nonterminals}
        for p in self.productions:
            by_lhs.setdefault(p.lhs, []).append(p)
        object.__setattr__(self, "_by_lhs", by_lhs)
        validate(self)

    @classmethod
    def from_rules(cls, rules: list[tuple[str, list[Symbol]]], start: str | None = None,
                   separator: bytes = b" ") -> "Grammar":
        """Build from ``(lhs, rhs)`` pairs; str symbols are nonterminals."""
        names: list[str] = []
        for lhs, _ in rules:
            if lhs not in names:
                names.append(lhs)
        prods = tuple(Production(lhs, tuple(rhs)) for lhs, rhs in rules)
        terms = frozenset(s for _, rhs in rules for s in rhs if isinstance(s, bytes))
        return cls(tuple(names), terms, prods, start or names[0], separator)

    def productions_for(self, name: str) -> list[Production]:
        return self._by_lhs.get(name, [])

    def __str__(self) -> str:
        lines = []
        if self.implicit_separator != b" ":
            sep = _quote(self.implicit_separator) if self.implicit_separator else "none"
            lines.append(f"%separator {sep}")
        lines.append(f"%start {self.start}")
        lines.extend(str(p) for p in self.productions)
        return "\n".join(lines) + "\n"


def _quote(data: bytes) -> str:
    out = []
    for b in data:
        c = chr(b)
        if c == '"':
            out.append('\\"')
        elif c == "\\":
            out.append("\\\\")
        elif c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        elif 32 <= b < 127:
            out.append(c)
        else:
            out.append(f"\\x{b:02x}")
    return '"' + "".join(out) + '"'


def validate(g: Grammar) -> None:
    names = set(g.nonterminals)
    if g.start not in names:
        raise UndefinedSymbolError(g.start)
    for p in g.productions:
        if p.lhs not in names:
            raise UndefinedSymbolError(p.lhs)
        for sym in p.rhs:
            if isinstance(sym, str):
                if sym not in names:
                    raise UndefinedSymbolError(sym)
            elif not sym:
                raise EmptyTerminalError(f"empty terminal in rule for {p.lhs}")
            elif sym not in g.terminals:
                raise UndefinedSymbolError(repr(sym))
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs not in productive and all(
                    isinstance(s, bytes) or s in productive for s in p.rhs):
                productive.add(p.lhs)
                changed = True
    dead = [n for n in g.nonterminals if n not in productive]
    if dead:
        raise UnproductiveNonterminalError(dead)


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<define>::=)
  | (?P<bar>\|)
  | (?P<glue>~)
  | (?P<eps>ε)
  | (?P<directive>%[A-Za-z_]+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<string>")
""", re.VERBOSE)

_ESCAPES = {"n": b"\n", "t": b"\t", "r": b"\r", "\\": b"\\", '"': b'"'}


def _lex(text: str):
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        col = pos - line_start + 1
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "string":
            value, pos = _read_string(text, m.end(), line, col)
            yield ("string", value, line, col)
            continue
        pos = m.end()
        if kind == "newline":
            yield ("newline", None, line, col)
            line += 1
            line_start = pos
        elif kind not in ("ws", "comment"):
            yield (kind, m.group(), line, col)
    yield ("newline", None, line, pos - line_start + 1)
    yield ("eof", None, line, pos - line_start + 1)


def _read_string(text: str, pos: int, line: int, col: int) -> tuple[bytes, int]:
    out = bytearray()
    while True:
        if pos >= len(text) or text[pos] == "\n":
            raise GrammarSyntaxError("unterminated string", line, col)
        c = text[pos]
        if c == '"':
            return bytes(out), pos + 1
        if c == "\\":
            nxt = text[pos + 1:pos + 2]
            if nxt in _ESCAPES:
                out += _ESCAPES[nxt]
                pos += 2
            elif nxt == "x" and re.fullmatch(r"[0-9A-Fa-f]{2}", text[pos + 2:pos + 4]):
                out.append(int(text[pos + 2:pos + 4], 16))
                pos += 4
            else:
                raise GrammarSyntaxError(f"bad escape \\{nxt}", line, col + 1)
        else:
            out += c.encode("utf-8")
            pos += 1


def parse_grammar(text: str) -> Grammar:
    """Parse grammar source; alternatives become separate productions."""
    toks = list(_lex(text))
    i = 0
    separator = b" "
    start: str | None = None
    rules: list[tuple[str, list[Symbol], list[bool], int, int]] = []
    order: list[str] = []

    def peek_past_newlines(j: int) -> int:
        while toks[j][0] == "newline":
            j += 1
        return j

    while toks[i][0] != "eof":
        kind, value, line, col = toks[i]
        if kind == "newline":
            i += 1
            continue
        if kind == "directive":
            arg_kind, arg, aline, acol = toks[i + 1]
            if value == "%separator":
                if arg_kind == "string":
                    separator = arg
                elif arg_kind == "name" and arg == "none":
                    separator = b""
                else:
                    raise GrammarSyntaxError("%separator expects a string or none", aline, acol)
            elif value == "%start":
                if arg_kind != "name":
                    raise GrammarSyntaxError("%start expects a rule name", aline, acol)
                start = arg
            else:
                raise GrammarSyntaxError(f"unknown directive {value}", line, col)
            if toks[i + 2][0] != "newline":
                raise GrammarSyntaxError("trailing input after directive", toks[i + 2][2], toks[i + 2][3])
            i += 3
            continue
        if kind != "name":
            raise GrammarSyntaxError("expected a rule name", line, col)
        if toks[i + 1][0] != "define":
            raise GrammarSyntaxError("expected '::='", toks[i + 1][2], toks[i + 1][3])
        lhs = value
        if lhs not in order:
            order.append(lhs)
        i += 2
        seq: list[Symbol] = []
        glue: list[bool] = []
        pending_glue = False
        alt_line, alt_col = line, col
        while True:
            kind, value, line, col = toks[i]
            if kind in ("name", "string"):
                if kind == "string" and not value:
                    raise EmptyTerminalError(f"line {line}, column {col}: empty terminal")
                if seq:
                    glue.append(pending_glue)
                elif pending_glue:
                    raise GrammarSyntaxError("'~' needs a symbol on its left", line, col)
                pending_glue = False
                seq.append(value)
                i += 1
            elif kind == "glue":
                if pending_glue or not seq:
                    raise GrammarSyntaxError("misplaced '~'", line, col)
                pending_glue = True
                i += 1
            elif kind == "eps":
                i += 1
            elif kind == "bar" or kind == "newline":
                if pending_glue:
                    raise GrammarSyntaxError("'~' needs a symbol on its right", line, col)
                if kind == "newline":
                    j = peek_past_newlines(i)
                    if toks[j][0] == "bar":
                        i = j
                        continue
                rules.append((lhs, seq, glue, alt_line, alt_col))
                seq, glue = [], []
                i += 1
                alt_line, alt_col = line, col
                if kind == "newline":
                    break
            else:
                raise GrammarSyntaxError(f"unexpected {value!r}", line, col)

    if not rules:
        raise GrammarSyntaxError("grammar has no rules", 1, 1)
    defined = set(order)
    for lhs, seq, _, line, col in rules:
        for sym in seq:
            if isinstance(sym, str) and sym not in defined:
                raise UndefinedSymbolError(sym)
    start = start or order[0]
    if start not in defined:
        raise UndefinedSymbolError(start)
    prods = tuple(Production(lhs, tuple(seq), tuple(glue)) for lhs, seq, glue, _, _ in rules)
    terms = frozenset(s for p in prods for s in p.rhs if isinstance(s, bytes))
    return Grammar(tuple(order), terms, prods, start, separator)


def load_grammar(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return parse_grammar(fh.read())
