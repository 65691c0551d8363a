"""Textual logic syntax.

    ownPrefix(?Holder, ?Prefix) :- ?UpStream: allocate(?Holder, ?Prefix),
                                   ownPrefix(?UpStream, ?Sup), ?Prefix <: ?Sup.

``?X`` is a logic variable, ``$X`` a template parameter filled in by
:func:`parse_program` before the statements are used.  Dotted quads with a
length parse as prefixes; ``"..."`` quotes arbitrary symbols such as
principal ids.
"""

from __future__ import annotations

import re

from ..aqt import Prefix
from .terms import Atom, ListPattern, Literal, Statement, Var, substitute_statement

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<prefix>\d+\.\d+\.\d+\.\d+/\d+)
  | (?P<int>-?\d+)
  | (?P<var>\?[A-Za-z_]\w*)
  | (?P<param>\$[A-Za-z_]\w*)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][\w\-]*)
  | (?P<op>:-|<:|[(),.\[\]|:*])
    """,
    re.VERBOSE,
)

_PLAIN = re.compile(r"[a-z_][\w\-]*\Z")


class LogicSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _tokenize(text: str):
    pos, line = 0, 1
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LogicSyntaxError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            out.append((kind, value, line))
        line += value.count("\n")
        pos = m.end()
    out.append(("eof", "", line))
    return out


class _Parser:
    def __init__(self, text: str, params: dict | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.params = params or {}

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v, line = self.next()
        if v != value:
            raise LogicSyntaxError(f"expected {value!r}, got {v!r}", line)

    def program(self) -> list[Statement]:
        out = []
        while self.peek()[0] != "eof":
            out.append(self.statement())
        return out

    def statement(self) -> Statement:
        speaker, head = self.qualified_atom()
        body = []
        if self.peek()[1] == ":-":
            self.next()
            body.append(self.literal())
            while self.peek()[1] == ",":
                self.next()
                body.append(self.literal())
        self.expect(".")
        return Statement(speaker, head, tuple(body))

    def qualified_atom(self):
        speaker, atom = self._speaker_or_term()
        if atom is None:
            kind, value, line = self.peek()
            raise LogicSyntaxError(f"expected an atom, got {value!r}", line)
        return speaker, atom

    def _speaker_or_term(self):
        # returns (speaker, atom), or (lhs_term, None) when a bare term was read
        start = self.i
        if self.peek()[0] in ("var", "param", "str", "ident", "prefix", "int") or self.peek()[1] in ("[", "*"):
            term = self.term()
            nxt = self.peek()[1]
            if nxt == ":":
                self.next()
                return term, self.atom()
            if nxt == "<:":
                return term, None
            self.i = start
        return None, self.atom()

    def literal(self) -> Literal:
        lhs, atom = self._speaker_or_term()
        if atom is None:
            self.expect("<:")
            return Literal(Atom("<:", (lhs, self.term())))
        return Literal(atom, lhs)

    def atom(self) -> Atom:
        kind, value, line = self.next()
        if kind != "ident":
            raise LogicSyntaxError(f"expected predicate name, got {value!r}", line)
        args = []
        if self.peek()[1] == "(":
            self.next()
            if self.peek()[1] != ")":
                args.append(self.term())
                while self.peek()[1] == ",":
                    self.next()
                    args.append(self.term())
            self.expect(")")
        return Atom(value, tuple(args))

    def term(self):
        kind, value, line = self.next()
        if kind == "var":
            return Var(value[1:])
        if kind == "param":
            name = value[1:]
            if name in self.params:
                return self.params[name]
            return Var(value)  # unfilled parameter: left for the caller to substitute
        if kind == "prefix":
            try:
                return Prefix.parse(value)
            except ValueError as exc:
                raise LogicSyntaxError(str(exc), line) from None
        if kind == "int":
            return int(value)
        if kind == "str":
            return bytes(value[1:-1], "utf-8").decode("unicode_escape")
        if kind == "ident":
            return value
        if value == "*":
            return Prefix(0, 0)
        if value == "[":
            items = []
            tail = ()
            if self.peek()[1] != "]":
                items.append(self.term())
                while self.peek()[1] == ",":
                    self.next()
                    items.append(self.term())
                if self.peek()[1] == "|":
                    self.next()
                    tail = self.term()
            self.expect("]")
            if isinstance(tail, tuple):
                return tuple(items) + tail
            return ListPattern(tuple(items), tail)
        raise LogicSyntaxError(f"unexpected token {value!r}", line)


def parse_program(text: str, params: dict | None = None) -> list[Statement]:
    """Parse statements; ``$Name`` is replaced by ``params['Name']`` when given."""
    return _Parser(text, params).program()


def parse_statement(text: str, params: dict | None = None) -> Statement:
    stmts = parse_program(text if text.rstrip().endswith(".") else text + ".", params)
    if len(stmts) != 1:
        raise LogicSyntaxError("expected exactly one statement", 1)
    return stmts[0]


def parse_goal(text: str, params: dict | None = None) -> Literal:
    p = _Parser(text, params)
    lit = p.literal()
    if p.peek()[1] == ".":
        p.next()
    if p.peek()[0] != "eof":
        raise LogicSyntaxError("trailing input after goal", p.peek()[2])
    return lit


def instantiate(statements, params: dict) -> list[Statement]:
    """Fill ``$Name`` parameters left open at parse time."""
    sub = {f"${k}": v for k, v in params.items()}
    return [substitute_statement(s, sub) for s in statements]


def format_term(term) -> str:
    if isinstance(term, Var):
        return term.name if term.name.startswith("$") else f"?{term.name}"
    if isinstance(term, ListPattern):
        items = ", ".join(format_term(t) for t in term.items)
        return f"[{items} | {format_term(term.tail)}]"
    if isinstance(term, tuple):
        return "[" + ", ".join(format_term(t) for t in term) + "]"
    if isinstance(term, Prefix):
        return "*" if term.length == 0 else str(term)
    if isinstance(term, int):
        return str(term)
    if _PLAIN.match(term):
        return term
    return '"' + term.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_atom(atom: Atom) -> str:
    if atom.pred == "<:":
        return f"{format_term(atom.args[0])} <: {format_term(atom.args[1])}"
    if not atom.args:
        return atom.pred
    return f"{atom.pred}(" + ", ".join(format_term(a) for a in atom.args) + ")"


def format_literal(lit: Literal) -> str:
    if lit.speaker is None:
        return format_atom(lit.atom)
    return f"{format_term(lit.speaker)}: {format_atom(lit.atom)}"


def format_statement(st: Statement, show_speaker: bool = True) -> str:
    head = format_atom(st.head)
    if show_speaker and st.speaker is not None:
        head = f"{format_term(st.speaker)}: {head}"
    if not st.body:
        return head + "."
    return head + " :- " + ", ".join(format_literal(lit) for lit in st.body) + "."
