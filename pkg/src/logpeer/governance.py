"""Issuer operations: prefix delegation, tag endorsement, route origination and
hop signing, and path-control / connectivity policy certificates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .aqt import Prefix
from .trustlog.certs import CertStore, Principal, Token, issue_certificate
from .trustlog.terms import Atom, Statement

ANY = "any"

TAGS_LABEL = "tags"
ACL_LABEL = "nsp-tag-acl"
RULES_LABEL = "custom policy"
CONNECT_LABEL = "connectivity"


@dataclass(frozen=True, order=True)
class Tag:
    """Self-certifying attribute: only ``root`` decides who wields it."""

    root: str
    name: str

    @property
    def term(self) -> tuple:
        return (self.root, self.name)


def tag_term(tag) -> object:
    if tag == ANY or tag is None:
        return ANY
    if isinstance(tag, Tag):
        return tag.term
    return tuple(tag)


def _fact(pred: str, *args) -> Statement:
    return Statement(None, Atom(pred, tuple(args)))


def _links(*groups) -> list[Token]:
    out: list[Token] = []
    for g in groups:
        if g is None:
            continue
        if isinstance(g, (bytes, Token)):
            g = [g]
        for t in g:
            if t is not None and t not in out:
                out.append(Token(t))
    return out


def delegate_prefix(store: CertStore, issuer: Principal, holder: str, prefix: Prefix,
                    parent: Token | None = None, now: int = 0) -> Token:
    _, tok = issue_certificate(store, issuer, [_fact("allocate", holder, prefix)],
                               _links(parent), now=now)
    return tok


def endorse_tag(store: CertStore, issuer: Principal, subject: str, tag: Tag,
                parent: Token | None = None, delegate: bool = False, now: int = 0) -> Token:
    """Grant ``tag`` to ``subject``; with ``delegate`` the subject may also
    endorse others with it."""
    facts = [_fact("tagAccess", tag.term, subject)]
    if delegate:
        facts.append(_fact("tagDelegate", tag.term, subject))
    _, tok = issue_certificate(store, issuer, facts, _links(parent), now=now)
    return tok


def publish_tag_set(store: CertStore, holder: Principal, endorsements: Iterable[Token],
                    now: int = 0) -> Token:
    """A labelled certificate linking every endorsement the holder presents."""
    _, tok = issue_certificate(store, holder, [_fact("tagSet", holder.pid)],
                               _links(list(endorsements)), label=TAGS_LABEL, now=now)
    return tok


def publish_rule_package(store: CertStore, owner: Principal, rules: Iterable[Statement],
                         now: int = 0) -> Token:
    _, tok = issue_certificate(store, owner, list(rules), label=RULES_LABEL, now=now)
    return tok


def originate_route(store: CertStore, owner: Principal, dst: Prefix, target: str,
                    ip_cert: Token | None, policy_tokens: Iterable[Token] = (),
                    rule_token: Token | None = None, now: int = 0) -> Token:
    links = _links(ip_cert, list(policy_tokens), rule_token)
    _, tok = issue_certificate(store, owner, [_fact("advertise", dst, (owner.pid,), target)],
                               links, now=now)
    return tok


def sign_route_hop(store: CertStore, nsp: Principal, dst: Prefix, new_path, target: str,
                   prev: Token, now: int = 0) -> Token:
    new_path = tuple(new_path)
    if not new_path or new_path[0] != nsp.pid:
        raise ValueError("path head must be the signing NSP")
    links = _links(prev, store.lookup(nsp.pid, TAGS_LABEL))
    _, tok = issue_certificate(store, nsp, [_fact("advertise", dst, new_path, target)],
                               links, now=now)
    return tok


def issue_path_policy(store: CertStore, owner: Principal, kind: str, src: Prefix, dst: Prefix,
                      tags: Iterable, rule_token: Token | None = None,
                      ip_cert: Token | None = None, now: int = 0) -> Token:
    """``ip_cert`` links the owner's prefix chain so relaying NSPs can check
    that the owner controls the policy's dominant prefix."""
    if kind not in ("inbound", "outbound"):
        raise ValueError(f"unknown policy kind {kind!r}")
    terms = sorted({tag_term(t) for t in tags}, key=repr)
    if not terms:
        raise ValueError("a path policy needs at least one tag")
    facts = [_fact("policyKind", kind)]
    facts += [_fact("nspTagAclEntry", src, dst, t) for t in terms]
    _, tok = issue_certificate(store, owner, facts, _links(ip_cert, rule_token), label=ACL_LABEL,
                               now=now)
    return tok


def issue_connectivity_policy(store: CertStore, owner: Principal, tags: Iterable = (),
                              pids: Iterable[str] = (), now: int = 0) -> Token:
    facts = [_fact("connectPolicy", owner.pid)]
    facts += [_fact("connectTag", t) for t in sorted({tag_term(t) for t in tags}, key=repr)]
    facts += [_fact("connectPid", p) for p in sorted(set(pids))]
    _, tok = issue_certificate(store, owner, facts, label=CONNECT_LABEL, now=now)
    return tok
