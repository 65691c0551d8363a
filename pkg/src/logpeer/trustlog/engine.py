"""Top-down evaluation of attributed datalog with two builtins.

Every fact carries its speaker.  A body literal written ``S: p(...)`` only
matches facts (or rules) spoken by ``S``; an unqualified literal matches any
speaker.  Rules are taken from the caller and from statements the context's
local speaker (or an explicitly trusted speaker) asserted: rules that arrive
inside someone else's certificate are data, not code, unless trusted.

Builtins: ``A <: B`` (inclusive IPv4 prefix containment, both ground) and
``eq(X, Y)`` (unification, at least one side ground).

A goal that is a variant of one of its own ancestors fails instead of
recursing, which keeps delegation cycles finite.  ``max_depth`` is a backstop
and raises :class:`DepthExceeded` rather than denying.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from typing import Iterable, Iterator

from ..aqt import Prefix
from .terms import Atom, ListPattern, Literal, Statement, Var, atom_vars, is_ground

DEFAULT_MAX_DEPTH = 256


class QueryError(Exception):
    pass


class DepthExceeded(QueryError):
    pass


class BuiltinError(QueryError):
    pass


class LogicContext:
    """A bag of attributed statements plus resolution bookkeeping."""

    def __init__(self, statements: Iterable[Statement] = (), certificates=None,
                 errors=(), local_speaker: str | None = None):
        self.statements = tuple(statements)
        self.certificates = dict(certificates or {})
        self.errors = tuple(errors)
        self.local_speaker = local_speaker
        self._index = None

    def __len__(self) -> int:
        return len(self.statements)

    def facts(self, pred: str | None = None) -> list[Statement]:
        return [s for s in self.statements if s.is_fact and (pred is None or s.head.pred == pred)]

    def with_local(self, statements: Iterable[Statement], speaker: str | None = None) -> "LogicContext":
        speaker = speaker or self.local_speaker or "local"
        extra = [s.with_speaker(speaker) for s in statements]
        return LogicContext(self.statements + tuple(extra), self.certificates, self.errors, speaker)

    def merge(self, *others: "LogicContext") -> "LogicContext":
        seen = set(self.statements)
        stmts = list(self.statements)
        certs = dict(self.certificates)
        errors = list(self.errors)
        for other in others:
            for s in other.statements:
                if s not in seen:
                    seen.add(s)
                    stmts.append(s)
            certs.update(other.certificates)
            errors.extend(other.errors)
        return LogicContext(stmts, certs, errors, self.local_speaker)

    def index(self):
        if self._index is None:
            by_key = defaultdict(list)
            by_speaker = defaultdict(list)
            by_first = defaultdict(list)
            rules = defaultdict(list)
            seen = set()
            for s in self.statements:
                if s in seen:
                    continue
                seen.add(s)
                if s.is_fact:
                    key = s.head.key
                    by_key[key].append(s)
                    by_speaker[key + (s.speaker,)].append(s)
                    if s.head.args:
                        first = s.head.args[0]
                        if _hashable(first):
                            by_first[key + (first,)].append(s)
                else:
                    rules[s.head.key].append(s)
            self._index = (by_key, by_speaker, by_first, rules)
        return self._index


def _hashable(term) -> bool:
    try:
        hash(term)
    except TypeError:
        return False
    return True


def walk(t, s: dict):
    while isinstance(t, Var):
        v = s.get(t, _UNBOUND)
        if v is _UNBOUND:
            return t
        t = v
    return t


def resolve(t, s: dict):
    t = walk(t, s)
    if isinstance(t, tuple):
        return tuple(resolve(x, s) for x in t)
    if isinstance(t, ListPattern):
        items = tuple(resolve(x, s) for x in t.items)
        tail = resolve(t.tail, s)
        if isinstance(tail, tuple):
            return items + tail
        if isinstance(tail, ListPattern):
            return ListPattern(items + tail.items, tail.tail)
        return ListPattern(items, tail)
    return t


def unify(a, b, s: dict) -> dict | None:
    a = walk(a, s)
    b = walk(b, s)
    if isinstance(a, Var):
        if a == b:
            return s
        return {**s, a: b}
    if isinstance(b, Var):
        return {**s, b: a}
    if isinstance(a, ListPattern) or isinstance(b, ListPattern):
        if not isinstance(a, ListPattern):
            a, b = b, a
        if isinstance(b, tuple):
            n = len(a.items)
            if len(b) < n:
                return None
            for x, y in zip(a.items, b[:n]):
                s = unify(x, y, s)
                if s is None:
                    return None
            return unify(a.tail, b[n:], s)
        if isinstance(b, ListPattern):
            n = min(len(a.items), len(b.items))
            for x, y in zip(a.items[:n], b.items[:n]):
                s = unify(x, y, s)
                if s is None:
                    return None
            ra, rb = a.items[n:], b.items[n:]
            if ra:
                return unify(ListPattern(ra, a.tail), b.tail, s)
            if rb:
                return unify(a.tail, ListPattern(rb, b.tail), s)
            return unify(a.tail, b.tail, s)
        return None
    if isinstance(a, tuple):
        if not isinstance(b, tuple) or len(a) != len(b):
            return None
        for x, y in zip(a, b):
            s = unify(x, y, s)
            if s is None:
                return None
        return s
    if type(a) is not type(b):
        return None
    return s if a == b else None


def _as_prefix(t) -> Prefix:
    if isinstance(t, Prefix):
        return t
    if isinstance(t, str):
        try:
            return Prefix.parse(t)
        except ValueError:
            pass
    raise BuiltinError(f"<: expects prefixes, got {t!r}")


_counter = itertools.count()


def _rename(term, mapping: dict):
    if isinstance(term, Var):
        v = mapping.get(term)
        if v is None:
            v = mapping[term] = Var(f"{term.name}_{next(_counter)}")
        return v
    if isinstance(term, tuple):
        return tuple(_rename(t, mapping) for t in term)
    if isinstance(term, ListPattern):
        return ListPattern(tuple(_rename(t, mapping) for t in term.items), _rename(term.tail, mapping))
    return term


def _rename_rule(rule: Statement):
    m: dict = {}
    head = Atom(rule.head.pred, tuple(_rename(a, m) for a in rule.head.args))
    body = tuple(
        Literal(Atom(l.atom.pred, tuple(_rename(a, m) for a in l.atom.args)),
                _rename(l.speaker, m) if l.speaker is not None else None)
        for l in rule.body
    )
    speaker = _rename(rule.speaker, m) if rule.speaker is not None else None
    return speaker, head, body


def _variant_key(lit: Literal, s: dict):
    names: dict = {}

    def canon(t):
        t = walk(t, s)
        if isinstance(t, Var):
            return ("?", names.setdefault(t, len(names)))
        if isinstance(t, tuple):
            return ("l",) + tuple(canon(x) for x in t)
        if isinstance(t, ListPattern):
            return ("p", tuple(canon(x) for x in t.items), canon(t.tail))
        return t

    sp = canon(lit.speaker) if lit.speaker is not None else None
    return (lit.atom.pred, sp, tuple(canon(a) for a in lit.atom.args))


class _Solver:
    def __init__(self, ctx: LogicContext, rules: Iterable[Statement], max_depth: int,
                 trusted_speakers):
        self.by_key, self.by_speaker, self.by_first, ctx_rules = ctx.index()
        trusted = set(trusted_speakers or ())
        if ctx.local_speaker is not None:
            trusted.add(ctx.local_speaker)
        self.rules = defaultdict(list)
        for r in rules:
            if not r.is_fact:
                self.rules[r.head.key].append(r)
        for key, rs in ctx_rules.items():
            for r in rs:
                if r.speaker in trusted:
                    self.rules[key].append(r)
        # facts supplied alongside the rules are treated as local statements
        self.extra_facts = defaultdict(list)
        for r in rules:
            if r.is_fact:
                self.extra_facts[r.head.key].append(r)
        self.max_depth = max_depth

    def solve(self, goals: tuple, s: dict) -> Iterator[dict]:
        if not goals:
            yield s
            return
        (lit, depth, anc), rest = goals[0], goals[1:]
        if lit.builtin:
            yield from self._builtin(lit, s, rest)
            return
        key = lit.atom.key
        speaker = walk(lit.speaker, s) if lit.speaker is not None else None
        for fact in self._candidate_facts(key, lit, speaker, s):
            s2 = s
            if lit.speaker is not None:
                s2 = unify(lit.speaker, fact.speaker, s2)
                if s2 is None:
                    continue
            s2 = _unify_args(lit.atom.args, fact.head.args, s2)
            if s2 is not None:
                yield from self.solve(rest, s2)
        rules = self.rules.get(key)
        if not rules:
            return
        vkey = _variant_key(lit, s)
        if vkey in anc:
            return
        if depth >= self.max_depth:
            raise DepthExceeded(f"derivation deeper than {self.max_depth} at {lit.atom.pred}")
        anc2 = anc | {vkey}
        for rule in rules:
            r_speaker, head, body = _rename_rule(rule)
            s2 = s
            if lit.speaker is not None:
                if r_speaker is None:
                    continue
                s2 = unify(lit.speaker, r_speaker, s2)
                if s2 is None:
                    continue
            s2 = _unify_args(lit.atom.args, head.args, s2)
            if s2 is None:
                continue
            sub = tuple((b, depth + 1, anc2) for b in body)
            yield from self.solve(sub + rest, s2)

    def _candidate_facts(self, key, lit, speaker, s):
        extra = self.extra_facts.get(key, ())
        if speaker is not None and not isinstance(speaker, (Var, ListPattern)):
            base = self.by_speaker.get(key + (speaker,), ())
        elif lit.atom.args:
            first = walk(lit.atom.args[0], s)
            if not isinstance(first, (Var, ListPattern)) and _hashable(first):
                base = self.by_first.get(key + (first,), ())
            else:
                base = self.by_key.get(key, ())
        else:
            base = self.by_key.get(key, ())
        if extra:
            return list(base) + list(extra)
        return base

    def _builtin(self, lit: Literal, s: dict, rest: tuple):
        a, b = lit.atom.args
        if lit.atom.pred == "<:":
            x, y = resolve(a, s), resolve(b, s)
            if not (is_ground(x) and is_ground(y)):
                raise BuiltinError("<: applied to a non-ground argument")
            if _as_prefix(y).contains(_as_prefix(x)):
                yield from self.solve(rest, s)
            return
        x, y = resolve(a, s), resolve(b, s)
        if not is_ground(x) and not is_ground(y):
            raise BuiltinError("eq needs at least one ground argument")
        s2 = unify(x, y, s)
        if s2 is not None:
            yield from self.solve(rest, s2)


def _unify_args(xs: tuple, ys: tuple, s: dict) -> dict | None:
    for x, y in zip(xs, ys):
        s = unify(x, y, s)
        if s is None:
            return None
    return s


def _goal_literal(goal) -> Literal:
    if isinstance(goal, Literal):
        return goal
    if isinstance(goal, Atom):
        return Literal(goal)
    if isinstance(goal, str):
        from .syntax import parse_goal
        return parse_goal(goal)
    raise TypeError(f"not a goal: {goal!r}")


def solutions(ctx: LogicContext, goal, rules: Iterable[Statement] = (), *,
              max_depth: int = DEFAULT_MAX_DEPTH, trusted_speakers=()) -> Iterator[dict]:
    lit = _goal_literal(goal)
    solver = _Solver(ctx, rules, max_depth, trusted_speakers)
    yield from solver.solve(((lit, 0, frozenset()),), {})


def query(ctx: LogicContext, goal, rules: Iterable[Statement] = (), *,
          max_depth: int = DEFAULT_MAX_DEPTH, trusted_speakers=()) -> list[dict]:
    """All distinct bindings of the goal's variables, in a stable order."""
    lit = _goal_literal(goal)
    names = atom_vars(lit.atom)
    if lit.speaker is not None and isinstance(lit.speaker, Var) and lit.speaker not in names:
        names.append(lit.speaker)
    seen = {}
    for s in solutions(ctx, lit, rules, max_depth=max_depth, trusted_speakers=trusted_speakers):
        binding = {v.name: resolve(v, s) for v in names}
        key = repr(sorted(binding.items()))
        seen.setdefault(key, binding)
    return [seen[k] for k in sorted(seen)]


def prove(ctx: LogicContext, goal, rules: Iterable[Statement] = (), *,
          max_depth: int = DEFAULT_MAX_DEPTH, trusted_speakers=()) -> bool:
    """True as soon as one derivation of ``goal`` is found."""
    for _ in solutions(ctx, goal, rules, max_depth=max_depth, trusted_speakers=trusted_speakers):
        return True
    return False


_UNBOUND = object()
