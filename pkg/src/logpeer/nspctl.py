"""Per-NSP controller: policy and route processing over region-indexed stores.

State (one instance per NSP):

* ``inbound`` / ``outbound``: AQTs of path-control policies keyed by region,
* ``match``: AQT of policy pairs keyed by the intersection region,
* ``routes``: every accepted route, keyed by (dst, path),
* ``forward_map``: region -> selected route (``None`` means drop),
* ``exports``: keys of routes selected somewhere and therefore advertised.

A new policy of either kind is merged with the overlapping policies of the
other kind, most specific first; each pair whose region it comes to control
gets a fresh route selection.  A new route is offered to every match region
whose destination it covers and wins if it is compliant and preferred.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

from .aqt import AQT, EVERYWHERE, WILDCARD, Prefix, Region
from .dataplane import DELIVER, DROP, Action, FlowTable, covered, rank
from .governance import ANY, CONNECT_LABEL, TAGS_LABEL, sign_route_hop
from .messages import (OK, Ack, AdvertisePolicy, AdvertiseRoute, Message, RequestFlow,
                       SelectionNotice, StitchportRequest, StitchRequest, UndoStitch,
                       WithdrawRoute)
from .routesec import GuardConfig, Guards, authorize_stitch, check_compliant_path
from .trustlog.certs import Certificate, CertStore, Principal, Token, resolve_context

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Route:
    dst: Prefix
    path: tuple
    token: Token | None = None
    inbound_tokens: tuple = ()
    learned_from: str = ""

    @property
    def key(self) -> tuple:
        return (self.dst, self.path)

    @property
    def next_hop(self) -> str:
        return self.path[0]

    @property
    def owner(self) -> str:
        return self.path[-1]


def pref_key(route: Route) -> tuple:
    """Smaller is preferred: shorter paths, then the lexicographically smaller pid sequence."""
    return (len(route.path), route.path)


def prefers(a: Route, b: Route | None) -> bool:
    return b is None or pref_key(a) < pref_key(b)


@dataclass(frozen=True)
class Policy:
    kind: str
    region: Region
    acl: frozenset
    token: Token | None = None
    owner: str | None = None

    @property
    def prio(self) -> tuple:
        # the dominant dimension decides first: dst for inbound, src for outbound
        if self.kind == "inbound":
            return (self.region.dst.length, self.region.src.length)
        return (self.region.src.length, self.region.dst.length)

    @property
    def ident(self) -> tuple:
        return (self.kind, self.region, self.token, self.acl)


DEFAULT_OUTBOUND = Policy("outbound", EVERYWHERE, frozenset({ANY}))


@dataclass(frozen=True)
class PolicyPair:
    outbound: Policy
    inbound: Policy

    def of(self, kind: str) -> Policy:
        return self.outbound if kind == "outbound" else self.inbound


def policy_from_certificate(cert: Certificate, token: Token) -> Policy | None:
    kind = None
    regions = set()
    acl = set()
    for st in cert.payload:
        if st.head.pred == "policyKind" and len(st.head.args) == 1:
            kind = st.head.args[0]
        elif st.head.pred == "nspTagAclEntry" and len(st.head.args) == 3:
            src, dst, tag = st.head.args
            if not (isinstance(src, Prefix) and isinstance(dst, Prefix)):
                return None
            regions.add(Region(src, dst))
            acl.add(tag)
    if kind not in ("inbound", "outbound") or len(regions) != 1 or not acl:
        return None
    return Policy(kind, regions.pop(), frozenset(acl), token, cert.issuer)


_UNSET = object()


class NspController:
    """One NSP's control loop.  ``send(receiver, message)`` hands messages to
    the bus; ``clock()`` yields logical time for certificate expiry."""

    def __init__(self, principal: Principal, store: CertStore, guards: GuardConfig | None = None,
                 *, send: Callable | None = None, clock: Callable | None = None,
                 name: str = "", stitch_acl: Iterable = (), secrets: dict | None = None,
                 names: dict | None = None):
        self.principal = principal
        self.pid = principal.pid
        self.name = name or principal.name
        self.store = store
        self.guards = Guards(guards or GuardConfig())
        self.send = send or (lambda receiver, msg: None)
        self.clock = clock or (lambda: 0)
        self.stitch_acl = list(stitch_acl)
        self.secrets = dict(secrets or {})
        self.names = names if names is not None else {}

        self.inbound = AQT()
        self.outbound = AQT()
        self.outbound.put(EVERYWHERE, DEFAULT_OUTBOUND)
        self.match = AQT()
        self.routes: dict[tuple, Route] = {}
        self.forward_map: dict[Region, Route | None] = {}
        self.exports: set = set()
        self.peers: set[str] = set()
        self.customers: dict[str, Prefix | None] = {}

        self.exported: dict[tuple, Token] = {}    # (route key, peer) -> signed hop token
        self.policy_sent: set = set()             # (policy token, peer)
        self.rejections: list[tuple[str, str, str]] = []
        self.upstream: dict[str, tuple] = {}       # peer -> its latest selection notice
        self.table = FlowTable()
        self._dirty = True
        self._selection_dirty = False
        self._notice_sent: dict[str, tuple] = {}
        self._hop_cache: dict = {}

    # -- message entry point -------------------------------------------------

    def handle(self, msg: Message) -> Ack:
        handler = {
            StitchRequest: self._on_stitch,
            UndoStitch: self._on_undo,
            StitchportRequest: self._on_stitchport,
            AdvertiseRoute: self._on_advertise_route,
            AdvertisePolicy: self._on_advertise_policy,
            RequestFlow: self._on_request_flow,
            WithdrawRoute: self._on_withdraw,
            SelectionNotice: self._on_selection,
        }.get(type(msg))
        if handler is None:
            return Ack(False, "unsupported message")
        ack = handler(msg)
        self.flush_notices()
        if not ack.ok:
            self.rejections.append((type(msg).__name__, msg.sender, ack.reason))
            log.info("%s rejected %s from %s: %s", self.name, type(msg).__name__,
                     self.names.get(msg.sender, msg.sender[:8]), ack.reason)
        return ack

    def _deny(self, reason: str, detail: str = "") -> Ack:
        return Ack(False, reason, detail)

    # -- stitching -----------------------------------------------------------

    def _on_stitch(self, msg: StitchRequest) -> Ack:
        roots = [t for t in (self.store.lookup(msg.sender, TAGS_LABEL),) if t is not None]
        ctx = resolve_context(self.store, roots, now=self.clock())
        verdict = authorize_stitch(ctx, msg.sender, msg.secret, self.stitch_acl,
                                   self.secrets.get(msg.sender, ""), self.guards.config.tag_depth)
        if not verdict:
            return self._deny(verdict.reason, verdict.detail)
        if msg.prop("role") == "customer":
            self.customers.setdefault(msg.sender, None)
            self.table.customers.setdefault(msg.sender, None)
        else:
            self.link_up(msg.sender)
        return OK

    def _on_stitchport(self, msg: StitchportRequest) -> Ack:
        # static stitchports: no secret exchange; the ACL still applies
        if msg.sender not in self.stitch_acl:
            return self._deny("stitch denied", "requester not on the ACL")
        self.customers.setdefault(msg.sender, None)
        self.table.customers.setdefault(msg.sender, None)
        return OK

    def link_up(self, peer: str) -> None:
        """Peering established: offer every exported route to the new peer."""
        if peer in self.peers:
            return
        self.peers.add(peer)
        self._dirty = True
        for key in sorted(self.exports, key=_route_sort):
            route = self.routes.get(key)
            if route is not None:
                self._export_to(route, peer)
        self.flush_notices()

    def _on_undo(self, msg: UndoStitch) -> Ack:
        peer = msg.sender
        if peer not in self.peers and peer not in self.customers:
            return self._deny("unknown peer")
        self.peers.discard(peer)
        self.customers.pop(peer, None)
        self.table.customers.pop(peer, None)
        for k in [k for k in self.exported if k[1] == peer]:
            del self.exported[k]
        self.policy_sent = {p for p in self.policy_sent if p[1] != peer}
        self.upstream.pop(peer, None)
        self._notice_sent.pop(peer, None)
        self._withdraw([k for k, r in self.routes.items() if r.learned_from == peer])
        self._dirty = True
        return OK

    # -- routes --------------------------------------------------------------

    def _on_advertise_route(self, msg: AdvertiseRoute) -> Ack:
        sender = msg.sender
        is_customer = sender in self.customers
        if sender not in self.peers and not is_customer:
            return self._deny("unknown peer")
        dst, path = msg.route
        path = tuple(path)
        if not path or path[0] != sender:
            return self._deny("broken chain", "path head is not the sender")
        if is_customer and len(path) != 1:
            return self._deny("broken chain", "customer routes must originate")
        if self.pid in path or len(set(path)) != len(path):
            return self._deny("loop")
        if (dst, path) in self.routes:
            return OK
        ctx = resolve_context(self.store, [msg.route_cert], now=self.clock())
        verdict = self.guards.authorized_route(ctx, path[-1], dst, path, self.pid)
        if not verdict:
            return self._deny(verdict.reason, verdict.detail)
        owner = path[-1]
        inbound = []
        for tok, cert in sorted(ctx.certificates.items()):
            if cert.issuer != owner:
                continue
            pol = policy_from_certificate(cert, tok)
            if pol is not None and pol.kind == "inbound" and dst.contains(pol.region.dst):
                inbound.append(pol)
        route = Route(dst, path, Token(msg.route_cert), tuple(p.token for p in inbound), sender)
        if is_customer:
            self.customers[sender] = dst
            self.table.customers[sender] = dst
        self.on_route(route)
        for pol in sorted(inbound, key=lambda p: (-p.region.area, p.region)):
            self.on_policy(pol, sender)
        wild = Region(WILDCARD, dst)
        if self.inbound.get(wild) is None:
            self.on_policy(Policy("inbound", wild, frozenset({ANY}), None, owner), sender)
        return OK

    def on_route(self, route: Route) -> None:
        """Accept a validated route and offer it to the match regions it covers."""
        self.routes[route.key] = route
        self._dirty = True
        hits = self.match.query(Region(WILDCARD, route.dst))
        for region, pair in sorted(hits, key=lambda h: (h[0].area, h[0])):
            if not route.dst.contains(region.dst):
                continue
            prev = self.forward_map.get(region)
            if self.compliant(route, pair) and prefers(route, prev):
                self._install(region, pair, route)

    def _on_withdraw(self, msg: WithdrawRoute) -> Ack:
        dst, path = msg.route
        key = (dst, tuple(path))
        route = self.routes.get(key)
        if route is None or route.learned_from != msg.sender:
            return OK
        self._withdraw([key])
        return OK

    def _withdraw(self, keys) -> None:
        gone = set()
        for key in keys:
            route = self.routes.pop(key, None)
            if route is None:
                continue
            gone.add(key)
            self.exports.discard(key)
            for ek in sorted((k for k in self.exported if k[0] == key), key=lambda k: k[1]):
                del self.exported[ek]
                if ek[1] in self.peers:
                    self.send(ek[1], WithdrawRoute(self.pid, (route.dst, (self.pid,) + route.path)))
        if not gone:
            return
        self._dirty = True
        affected = [r for r, rt in self.forward_map.items() if rt is not None and rt.key in gone]
        for region in sorted(affected, key=lambda r: (r.area, r)):
            pair = self.match.get(region)
            best = self.select(region, pair)
            self._install(region, pair, best)
            if best is None and pair.outbound.token is not None:
                self._spread(pair.outbound, region, pair, sender=None)

    # -- policies ------------------------------------------------------------

    def _on_advertise_policy(self, msg: AdvertisePolicy) -> Ack:
        sender = msg.sender
        if sender not in self.peers and sender not in self.customers:
            return self._deny("unknown peer")
        token = Token(msg.policy_cert)
        ctx = resolve_context(self.store, [token], now=self.clock())
        cert = ctx.certificates.get(token)
        if cert is None:
            reason = ctx.errors[0].reason if ctx.errors else "invalid certificate"
            return self._deny("invalid policy certificate", reason)
        policy = policy_from_certificate(cert, token)
        if policy is None:
            return self._deny("invalid policy certificate", "malformed")
        if policy.region != Region(msg.src, msg.dst):
            return self._deny("invalid policy certificate", "region mismatch")
        if sender in self.customers and policy.owner != sender:
            return self._deny("invalid policy certificate", "customer relays foreign policy")
        dominant = policy.region.dst if policy.kind == "inbound" else policy.region.src
        verdict = self.guards.covering_ownership(ctx, policy.owner, dominant)
        if not verdict:
            return self._deny(verdict.reason, verdict.detail)
        self.on_policy(policy, sender)
        return OK

    def on_policy(self, policy: Policy, sender: str | None = None) -> None:
        """Merge a validated policy (either kind) into the match store."""
        kind = policy.kind
        mine, other = (self.outbound, self.inbound) if kind == "outbound" else (self.inbound, self.outbound)
        prev = mine.get(policy.region)
        if prev is not None and prev.ident == policy.ident:
            return
        mine.put(policy.region, policy)
        self._dirty = True
        updated = []
        overlapping = sorted((p for _, p in other.query(policy.region)),
                             key=lambda p: (p.region.area, p.region))
        for o in overlapping:
            region = policy.region.intersect(o.region)
            pair = self.match.get(region)
            ok = pair is None or (policy.prio >= pair.of(kind).prio
                                  and o.region == pair.of(o.kind).region)
            if not ok:
                continue
            pair = PolicyPair(policy, o) if kind == "outbound" else PolicyPair(o, policy)
            self.match.put(region, pair)
            best = self.select(region, pair)
            self._install(region, pair, best)
            updated.append((region, pair, best))
        for region, pair, best in updated:
            if best is None:
                self._spread(policy, region, pair, sender)
        if kind == "inbound" and policy.token is not None:
            for peer in sorted(self._peers_exported_to(policy.region.dst)):
                if peer != sender:
                    self._send_policy(policy, peer)
        if kind == "inbound":
            # the owner's new policy may admit peers that were refused earlier
            for key in sorted(self.exports, key=_route_sort):
                route = self.routes.get(key)
                if route is not None and route.owner == policy.owner \
                        and route.dst.contains(policy.region.dst):
                    for peer in sorted(self.peers):
                        self._export_to(route, peer)

    def _spread(self, policy: Policy, region: Region, pair: PolicyPair, sender) -> None:
        # no compliant route: ask compliant peers that advertised the destination
        if policy.token is None:
            return
        for peer in sorted(self.peers):
            if peer == sender:
                continue
            if not any(r.learned_from == peer and r.dst.overlaps(region.dst)
                       for r in self.routes.values()):
                continue
            if self.hops_ok((peer,), pair):
                self._send_policy(policy, peer)

    def _send_policy(self, policy: Policy, peer: str) -> None:
        if policy.token is None or peer not in self.peers:
            return
        if (policy.token, peer) in self.policy_sent:
            return
        self.policy_sent.add((policy.token, peer))
        self.send(peer, AdvertisePolicy(self.pid, policy.region.src, policy.region.dst, policy.token))

    def _peers_exported_to(self, dst: Prefix) -> set:
        return {peer for (key, peer) in self.exported if key[0].overlaps(dst)}

    # -- selection -----------------------------------------------------------

    def select(self, region: Region, pair: PolicyPair) -> Route | None:
        candidates = sorted((r for r in self.routes.values() if r.dst.contains(region.dst)),
                            key=pref_key)
        for route in candidates:
            if self.compliant(route, pair):
                return route
        return None

    def compliant(self, route: Route, pair: PolicyPair) -> bool:
        """The route's NSP hops (this NSP first, the origin subnet excluded) satisfy both policies."""
        return self.hops_ok((self.pid,) + route.path[:-1], pair)

    def hops_ok(self, hops: tuple, pair: PolicyPair) -> bool:
        return all(self._hop_ok(p, h) for p in (pair.inbound, pair.outbound) for h in hops)

    def _hop_ok(self, policy: Policy, hop: str) -> bool:
        if policy.token is None:
            return ANY in policy.acl
        key = (policy.token, hop)
        hit = self._hop_cache.get(key)
        if hit is None:
            roots = [policy.token]
            tags = self.store.lookup(hop, TAGS_LABEL)
            if tags is not None:
                roots.append(tags)
            ctx = resolve_context(self.store, roots, now=self.clock())
            hit = bool(check_compliant_path(ctx, [policy], (hop,), self.guards.config.tag_depth))
            self._hop_cache[key] = hit
        return hit

    def _install(self, region: Region, pair: PolicyPair, route: Route | None) -> None:
        old = self.forward_map.get(region, _UNSET)
        self.forward_map[region] = route
        if old is not route:
            self._dirty = True
            self._selection_dirty = True
        if route is None:
            return
        if route.key not in self.exports:
            self.exports.add(route.key)
            self._export(route)
        if pair.outbound.token is not None and route.next_hop in self.peers:
            self._send_policy(pair.outbound, route.next_hop)

    # -- exports -------------------------------------------------------------

    def _export(self, route: Route) -> None:
        for peer in sorted(self.peers):
            self._export_to(route, peer)

    def eligible(self, route: Route, peer: str) -> bool:
        """The peer is admitted by at least one of the owner's inbound policies for the route."""
        policies = [p for _, p in self.inbound.query(Region(WILDCARD, route.dst))
                    if p.owner == route.owner and route.dst.contains(p.region.dst)]
        if not policies:
            return True
        return any(self._hop_ok(p, peer) for p in policies)

    def _export_to(self, route: Route, peer: str) -> None:
        if peer in route.path or peer == route.learned_from:
            return
        if (route.key, peer) in self.exported:
            return
        if not self.eligible(route, peer):
            return
        new_path = (self.pid,) + route.path
        token = sign_route_hop(self.store, self.principal, route.dst, new_path, peer, route.token,
                               now=self.clock())
        self.exported[(route.key, peer)] = token
        self.send(peer, AdvertiseRoute(self.pid, (route.dst, new_path), token))
        attached = set(route.inbound_tokens)
        late = [p for _, p in self.inbound.query(Region(WILDCARD, route.dst))
                if p.token is not None and p.owner == route.owner and p.token not in attached]
        for p in sorted(late, key=lambda p: (-p.region.area, p.region)):
            self._send_policy(p, peer)

    # -- flows ---------------------------------------------------------------

    def _on_request_flow(self, msg: RequestFlow) -> Ack:
        src, dst = msg.src, msg.dst
        if msg.sender not in self.customers or src != msg.sender:
            return self._deny("connectivity denied", "requester is not an attached customer")
        roots = []
        for who in (src, dst):
            for label in (CONNECT_LABEL, TAGS_LABEL):
                tok = self.store.lookup(who, label)
                if tok is not None:
                    roots.append(tok)
        ctx = resolve_context(self.store, roots, now=self.clock())
        verdict = self.guards.connectivity(ctx, src, dst)
        if not verdict:
            return self._deny(verdict.reason, verdict.detail)
        src_pfx = self.customers.get(src)
        dst_pfxs = sorted({r.dst for r in self.routes.values() if r.owner == dst})
        if src_pfx is None or not dst_pfxs:
            return self._deny("connectivity denied", "endpoint prefix unknown")
        for d in dst_pfxs:
            self.table.permits.add(Region(src_pfx, d))
            self.table.permits.add(Region(d, src_pfx))
        return OK

    # -- upstream selections ---------------------------------------------------

    def _on_selection(self, msg: SelectionNotice) -> Ack:
        if msg.sender not in self.peers:
            return self._deny("unknown peer")
        self.upstream[msg.sender] = tuple(msg.entries)
        self._dirty = True
        return OK

    def selection_for(self, peer: str) -> tuple:
        """What ``peer`` needs to know to tell which of its entries we feed:
        our regions forwarding to it, plus the regions outranking them."""
        entries = list(self.flow_table().entries.values())
        mine = [e.region for e in entries if e.action.kind == "forward" and e.action.target == peer]
        if not mine:
            return ()
        shadows = [e.region for e in entries
                   if e.region not in mine
                   and any(e.region.overlaps(t) and rank(e.region) > rank(t) for t in mine)]
        return tuple([(r, True) for r in sorted(mine)] + [(r, False) for r in sorted(shadows)])

    def flush_notices(self) -> None:
        """Tell each peer about changes in which of our entries it carries."""
        if not self._selection_dirty:
            return
        self._selection_dirty = False
        for peer in sorted(self.peers):
            notice = self.selection_for(peer)
            if self._notice_sent.get(peer, ()) != notice:
                self._notice_sent[peer] = notice
                self.send(peer, SelectionNotice(self.pid, notice))

    def _feeds(self, peer: str, region: Region, outranking: list) -> bool:
        """``peer`` forwards to us some point whose best match here is ``region``."""
        entries = self.upstream.get(peer, ())
        for r, via in entries:
            if not via or not r.overlaps(region):
                continue
            blocked = outranking + [s for s, v in entries if not v and rank(s) > rank(r)]
            if not covered(r.intersect(region), blocked):
                return True
        return False

    # -- dataplane -----------------------------------------------------------

    def flow_table(self) -> FlowTable:
        if self._dirty:
            self._sync()
            self._dirty = False
        return self.table

    def _sync(self) -> None:
        wanted = {}
        live = [r for r, rt in self.forward_map.items() if rt is not None]
        exported_dsts: dict[str, list] = {}
        for (key, peer) in self.exported:
            exported_dsts.setdefault(peer, []).append(key[0])
        for region, route in self.forward_map.items():
            if route is None:
                if any(o != region and o.contains(region) for o in live):
                    wanted[region] = (Action(DROP), frozenset())
                continue
            if route.learned_from in self.customers and len(route.path) == 1:
                action = Action(DELIVER, route.learned_from)
            else:
                action = Action("forward", route.next_hop)
            wanted[region] = (action, frozenset())
        # admit a peer only where its own selection sends us traffic that lands
        # on this entry, and only if the controlling policies accept that peer
        regions = list(wanted)
        for region, (action, _) in list(wanted.items()):
            if action.kind == DROP:
                continue
            route = self.forward_map[region]
            pair = self.match.get(region)
            outranking = [o for o in regions if o.overlaps(region) and rank(o) > rank(region)]
            ingress = frozenset(
                p for p in self.peers
                if p != route.next_hop
                and any(d.contains(region.dst) for d in exported_dsts.get(p, ()))
                and self._feeds(p, region, outranking)
                and self.hops_ok((p,), pair)
            )
            wanted[region] = (action, ingress)
        self.table.sync(wanted)

    # -- inspection ----------------------------------------------------------

    def label(self, pid) -> str:
        if pid is None:
            return "-"
        return self.names.get(pid, pid[:8])

    def describe(self) -> str:
        """Line-oriented dump of the controller state (stable ordering)."""
        def acl(p):
            return "{" + ",".join(sorted(_tag_label(t, self) for t in p.acl)) + "}"

        def pol(p):
            return f"{p.kind} {p.region} {acl(p)} owner={self.label(p.owner)}"

        def path(rt):
            return "[" + ",".join(self.label(x) for x in rt.path) + "]"

        out = [f"nsp {self.name}"]
        for key in sorted(self.routes, key=_route_sort):
            rt = self.routes[key]
            out.append(f"route {rt.dst} {path(rt)} from={self.label(rt.learned_from)}")
        for _, p in sorted(self.inbound.items(), key=lambda x: x[0]):
            out.append(pol(p))
        for _, p in sorted(self.outbound.items(), key=lambda x: x[0]):
            out.append(pol(p))
        for region, pair in sorted(self.match.items(), key=lambda x: x[0]):
            out.append(f"match {region} -> ({pair.inbound.region}, {pair.outbound.region})")
        for region in sorted(self.forward_map):
            rt = self.forward_map[region]
            out.append(f"forward {region} -> {path(rt) if rt else 'drop'}")
        for key in sorted(self.exports, key=_route_sort):
            out.append(f"export {key[0]} [" + ",".join(self.label(x) for x in key[1]) + "]")
        return "\n".join(out)


def _route_sort(key) -> tuple:
    return (key[0], len(key[1]), key[1])


def _tag_label(tag, ctl) -> str:
    if tag == ANY:
        return ANY
    if isinstance(tag, tuple) and len(tag) == 2:
        return str(tag[1])
    return str(tag)
