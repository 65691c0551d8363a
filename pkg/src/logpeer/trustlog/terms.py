"""Logic terms, atoms and attributed statements.

Ground terms are plain Python values: ``str`` for symbols and principal ids,
``int``, :class:`~logpeer.aqt.Prefix` for IPv4 prefixes and ``tuple`` for
lists.  Variables and ``[H|T]`` list patterns have their own classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..aqt import Prefix


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class ListPattern:
    """``[a, b | Tail]``: leading items plus a tail term."""

    items: tuple
    tail: "Term"


Term = Union[str, int, Prefix, tuple, Var, ListPattern]

BUILTINS = frozenset({"<:", "eq"})


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()

    @property
    def key(self) -> tuple[str, int]:
        return (self.pred, len(self.args))


@dataclass(frozen=True)
class Literal:
    atom: Atom
    speaker: Term | None = None

    @property
    def builtin(self) -> bool:
        return self.atom.pred in BUILTINS


@dataclass(frozen=True)
class Statement:
    speaker: str | Var | None
    head: Atom
    body: tuple = field(default=())

    @property
    def is_fact(self) -> bool:
        return not self.body

    def with_speaker(self, speaker: str) -> "Statement":
        return Statement(speaker, self.head, self.body)


def is_ground(term) -> bool:
    if isinstance(term, (Var, ListPattern)):
        return False
    if isinstance(term, tuple):
        return all(is_ground(t) for t in term)
    return True


def term_vars(term, out: list | None = None) -> list:
    if out is None:
        out = []
    if isinstance(term, Var):
        if term not in out:
            out.append(term)
    elif isinstance(term, ListPattern):
        for t in term.items:
            term_vars(t, out)
        term_vars(term.tail, out)
    elif isinstance(term, tuple):
        for t in term:
            term_vars(t, out)
    return out


def atom_vars(atom: Atom) -> list:
    out: list = []
    for a in atom.args:
        term_vars(a, out)
    return out


def substitute(term, params: dict):
    """Replace ``Var`` occurrences named in ``params`` (template parameters)."""
    if isinstance(term, Var):
        return params.get(term.name, term)
    if isinstance(term, ListPattern):
        items = tuple(substitute(t, params) for t in term.items)
        tail = substitute(term.tail, params)
        if isinstance(tail, tuple):
            return items + tail
        return ListPattern(items, tail)
    if isinstance(term, tuple):
        return tuple(substitute(t, params) for t in term)
    return term


def substitute_atom(atom: Atom, params: dict) -> Atom:
    return Atom(atom.pred, tuple(substitute(a, params) for a in atom.args))


def substitute_statement(st: Statement, params: dict) -> Statement:
    speaker = substitute(st.speaker, params) if st.speaker is not None else None
    body = tuple(
        Literal(substitute_atom(lit.atom, params),
                substitute(lit.speaker, params) if lit.speaker is not None else None)
        for lit in st.body
    )
    return Statement(speaker, substitute_atom(st.head, params), body)
