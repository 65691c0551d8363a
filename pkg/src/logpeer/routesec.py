"""Guards: prefix ownership, route-chain authorization, path-control compliance,
flow connectivity and stitch authorization.

Each guard runs a shipped rule package against a resolved logic context.  The
packages are local (trusted) rules; rules found inside certificates are not
consulted.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

from .aqt import Prefix
from .governance import ANY, Tag, tag_term
from .trustlog.engine import DEFAULT_MAX_DEPTH, LogicContext, prove, query
from .trustlog.syntax import parse_program
from .trustlog.terms import Atom, Literal, Statement, Var

MISSING_OWNERSHIP = "missing ownership"
BROKEN_CHAIN = "broken chain"
NON_COMPLIANT_HOP = "non-compliant hop"
CONNECTIVITY_DENIED = "connectivity denied"
EXPIRED = "expired certificate"
STITCH_DENIED = "stitch denied"

OWN_PREFIX_RULES = """
ownPrefix(?Holder, ?Prefix) :- $TrustRoot: allocate(?Holder, ?Prefix).
"""

OWN_PREFIX_CHAIN = """
ownPrefix(?Holder, ?Prefix) :-
    ?UpStream: allocate(?Holder, ?Prefix),
    ownPrefix(?UpStream, ?SupPrefix),
    ?Prefix <: ?SupPrefix.
"""

ROUTE_RULES = """
authorizedRoute(?Owner, ?DstIP, ?Path, ?AS) :-
    eq([?Owner | ?Tail], ?Path),
    eq(?Tail, []),
    ?Owner: advertise(?DstIP, ?Path, ?AS),
    ownPrefix(?Owner, ?DstIP).

authorizedRoute(?Owner, ?DstIP, ?Path, ?AS) :-
    eq([?Head | ?Tail], ?Path),
    ?Head: advertise(?DstIP, ?Path, ?AS),
    authorizedRoute(?Owner, ?DstIP, ?Tail, ?Head).
"""

# the ACL entry must be spoken by the policy owner; tags must be grounded at their root
COMPLIANCE_RULES = """
compliantPath(?Owner, ?Src, ?Dst, ?Path) :-
    eq([?Head | ?Tail], ?Path),
    eq(?Tail, []),
    authorizedAS(?Owner, ?Src, ?Dst, ?Head).

compliantPath(?Owner, ?Src, ?Dst, ?Path) :-
    eq([?Head | ?Tail], ?Path),
    authorizedAS(?Owner, ?Src, ?Dst, ?Head),
    compliantPath(?Owner, ?Src, ?Dst, ?Tail).

authorizedAS(?Owner, ?Src, ?Dst, ?AS) :-
    ?Owner: nspTagAclEntry(?Src, ?Dst, ?Tag),
    hasTag(?Tag, ?AS).
"""

TAG_RULES = """
hasTag(?Tag, ?AS) :- eq(?Tag, any).
hasTag(?Tag, ?AS) :- eq([?Root, ?Name], ?Tag), ?Root: tagAccess(?Tag, ?AS).
hasTag(?Tag, ?AS) :-
    eq([?Root, ?Name], ?Tag),
    ?Issuer: tagAccess(?Tag, ?AS),
    mayEndorse(?Tag, ?Root, ?Issuer, $Budget).

mayEndorse(?Tag, ?Root, ?D, ?Budget) :- ?Root: tagDelegate(?Tag, ?D).
mayEndorse(?Tag, ?Root, ?D, ?Budget) :-
    eq([?Step | ?Rest], ?Budget),
    ?Up: tagDelegate(?Tag, ?D),
    mayEndorse(?Tag, ?Root, ?Up, ?Rest).
"""

CONNECT_RULES = """
admits(?X, ?Y) :- ?X: connectPid(?Y).
admits(?X, ?Y) :- ?X: connectTag(?T), hasTag(?T, ?Y).
connected(?A, ?B) :- admits(?A, ?B), admits(?B, ?A).
"""


@dataclass(frozen=True)
class GuardVerdict:
    allowed: bool
    reason: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.allowed


ALLOW = GuardVerdict(True)


def _deny(ctx: LogicContext, reason: str, detail: str = "") -> GuardVerdict:
    if any(e.reason == "expired" for e in ctx.errors):
        return GuardVerdict(False, EXPIRED, detail or reason)
    return GuardVerdict(False, reason, detail)


@lru_cache(maxsize=None)
def tag_rules(tag_depth: int = 3) -> tuple[Statement, ...]:
    # the endorsement chain root -> ... -> holder spans at most tag_depth certificates
    budget = tuple(range(max(tag_depth - 2, 0)))
    rules = parse_program(TAG_RULES, {"Budget": budget})
    if tag_depth < 2:
        rules = [r for r in rules if not any(l.atom.pred == "mayEndorse" for l in r.body)]
    if tag_depth < 1:
        rules = [r for r in rules if r.body[0].atom.args[1] == ANY]
    return tuple(rules)


@lru_cache(maxsize=None)
def ownership_rules(trust_roots: tuple[str, ...]) -> tuple[Statement, ...]:
    out: list[Statement] = []
    for root in trust_roots:
        out += parse_program(OWN_PREFIX_RULES, {"TrustRoot": root})
    out += parse_program(OWN_PREFIX_CHAIN)
    return tuple(out)


@lru_cache(maxsize=None)
def route_rules(trust_roots: tuple[str, ...]) -> tuple[Statement, ...]:
    return ownership_rules(trust_roots) + tuple(parse_program(ROUTE_RULES))


@lru_cache(maxsize=None)
def compliance_rules(tag_depth: int = 3) -> tuple[Statement, ...]:
    return tuple(parse_program(COMPLIANCE_RULES)) + tag_rules(tag_depth)


@lru_cache(maxsize=None)
def connect_rules(tag_depth: int = 3) -> tuple[Statement, ...]:
    return tuple(parse_program(CONNECT_RULES)) + tag_rules(tag_depth)


def _goal(pred: str, *args) -> Literal:
    return Literal(Atom(pred, tuple(args)))


@dataclass(frozen=True)
class GuardConfig:
    trust_roots: tuple = ()
    tag_depth: int = 3
    max_depth: int = DEFAULT_MAX_DEPTH


def check_own_prefix(ctx: LogicContext, holder: str, prefix: Prefix, trust_roots: Iterable[str],
                     max_depth: int = DEFAULT_MAX_DEPTH) -> GuardVerdict:
    rules = ownership_rules(tuple(sorted(trust_roots)))
    if prove(ctx, _goal("ownPrefix", holder, prefix), rules, max_depth=max_depth):
        return ALLOW
    return _deny(ctx, MISSING_OWNERSHIP, f"{prefix}")


def check_covering_ownership(ctx: LogicContext, holder: str, prefix: Prefix,
                             trust_roots: Iterable[str],
                             max_depth: int = DEFAULT_MAX_DEPTH) -> GuardVerdict:
    """``holder`` owns some prefix that contains ``prefix``."""
    rules = ownership_rules(tuple(sorted(trust_roots)))
    for binding in query(ctx, Literal(Atom("ownPrefix", (holder, Var("P")))), rules,
                         max_depth=max_depth):
        owned = binding["P"]
        if isinstance(owned, Prefix) and owned.contains(prefix):
            return ALLOW
    return _deny(ctx, MISSING_OWNERSHIP, f"{prefix}")


def check_authorized_route(ctx: LogicContext, owner: str, dst: Prefix, path, target: str,
                           trust_roots: Iterable[str],
                           max_depth: int = DEFAULT_MAX_DEPTH) -> GuardVerdict:
    path = tuple(path)
    roots = tuple(sorted(trust_roots))
    if not path or path[-1] != owner:
        return GuardVerdict(False, BROKEN_CHAIN, "path does not end at the owner")
    if prove(ctx, _goal("authorizedRoute", owner, dst, path, target), route_rules(roots),
             max_depth=max_depth):
        return ALLOW
    if not check_own_prefix(ctx, owner, dst, roots, max_depth):
        return _deny(ctx, MISSING_OWNERSHIP, f"{dst}")
    return _deny(ctx, BROKEN_CHAIN)


def _policy_acl(policy) -> frozenset:
    return frozenset(tag_term(t) for t in policy.acl)


def check_compliant_path(ctx: LogicContext, policies, path, tag_depth: int = 3,
                         max_depth: int = DEFAULT_MAX_DEPTH) -> GuardVerdict:
    """Every hop must wield at least one tag from each policy's ACL.

    ``policies`` are objects with ``owner``, ``region``, ``acl`` and ``token``;
    a tokenless policy whose ACL is just ``any`` is the implicit default.
    """
    path = tuple(path)
    if not path:
        return ALLOW
    rules = compliance_rules(tag_depth)
    for policy in policies:
        if policy is None:
            continue
        if policy.token is None:
            if ANY in _policy_acl(policy):
                continue
            return GuardVerdict(False, NON_COMPLIANT_HOP, "uncertified policy")
        src, dst = policy.region.src, policy.region.dst
        if prove(ctx, _goal("compliantPath", policy.owner, src, dst, path), rules,
                 max_depth=max_depth):
            continue
        for hop in path:
            if not prove(ctx, _goal("authorizedAS", policy.owner, src, dst, hop), rules,
                         max_depth=max_depth):
                return _deny(ctx, NON_COMPLIANT_HOP, hop)
        return _deny(ctx, NON_COMPLIANT_HOP)
    return ALLOW


def check_connectivity(ctx: LogicContext, src: str, dst: str, tag_depth: int = 3,
                       max_depth: int = DEFAULT_MAX_DEPTH) -> GuardVerdict:
    if prove(ctx, _goal("connected", src, dst), connect_rules(tag_depth), max_depth=max_depth):
        return ALLOW
    return _deny(ctx, CONNECTIVITY_DENIED, f"{src[:12]}->{dst[:12]}")


def authorize_stitch(ctx: LogicContext | None, requester: str, secret: str, acl: Iterable,
                     expected_secret: str, tag_depth: int = 3) -> GuardVerdict:
    """ACL entries are pids or tags; a tag admits anyone proven to wield it."""
    if not hmac.compare_digest(str(secret).encode(), str(expected_secret).encode()):
        return GuardVerdict(False, STITCH_DENIED, "bad secret")
    for entry in acl:
        if entry == requester:
            return ALLOW
        if isinstance(entry, Tag) and ctx is not None:
            if prove(ctx, _goal("hasTag", entry.term, requester), tag_rules(tag_depth)):
                return ALLOW
    return GuardVerdict(False, STITCH_DENIED, "requester not on the ACL")


@dataclass
class Guards:
    """Guards bound to one party's trust roots and tag delegation depth."""

    config: GuardConfig = field(default_factory=GuardConfig)

    def own_prefix(self, ctx, holder, prefix) -> GuardVerdict:
        return check_own_prefix(ctx, holder, prefix, self.config.trust_roots, self.config.max_depth)

    def covering_ownership(self, ctx, holder, prefix) -> GuardVerdict:
        return check_covering_ownership(ctx, holder, prefix, self.config.trust_roots,
                                        self.config.max_depth)

    def authorized_route(self, ctx, owner, dst, path, target) -> GuardVerdict:
        return check_authorized_route(ctx, owner, dst, path, target, self.config.trust_roots,
                                      self.config.max_depth)

    def compliant_path(self, ctx, policies, path) -> GuardVerdict:
        return check_compliant_path(ctx, policies, path, self.config.tag_depth, self.config.max_depth)

    def connectivity(self, ctx, src, dst) -> GuardVerdict:
        return check_connectivity(ctx, src, dst, self.config.tag_depth, self.config.max_depth)
