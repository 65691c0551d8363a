"""Multi-NSP harness: builds certificates and controllers from a scenario, runs
scripted steps over a FIFO message bus, and traces packets through the
simulated flow tables."""

from __future__ import annotations

import hashlib
import hmac
import logging
from collections import deque
from dataclasses import dataclass

from ..aqt import Prefix
from ..dataplane import DELIVER, Packet, addr
from ..governance import (ANY, Tag, delegate_prefix, endorse_tag, issue_connectivity_policy,
                          issue_path_policy, originate_route, publish_tag_set)
from ..messages import AdvertisePolicy, AdvertiseRoute, Message, RequestFlow, StitchRequest, UndoStitch
from ..nspctl import NspController
from ..routesec import GuardConfig
from ..trustlog.certs import SCHEMES, CertStore, Principal
from .scenario import Scenario, ScenarioError

log = logging.getLogger(__name__)

MAX_HOPS = 64
HOST_OFFSET = 5


class BusLivelock(RuntimeError):
    """Raised when a step exceeds its message budget."""


class EventBus:
    """Single global FIFO of (sender, receiver, message)."""

    def __init__(self, budget: int = 200_000):
        self.queue: deque = deque()
        self.budget = budget
        self.delivered = 0

    def send(self, sender: str, receiver: str, msg: Message) -> None:
        self.queue.append((sender, receiver, msg))

    def drain(self, deliver) -> int:
        n = 0
        while self.queue:
            if n >= self.budget:
                raise BusLivelock(f"message budget of {self.budget} exhausted")
            sender, receiver, msg = self.queue.popleft()
            deliver(receiver, msg)
            n += 1
        self.delivered += n
        return n


@dataclass(frozen=True)
class Trace:
    hops: tuple          # pids from source subnet to destination subnet (or drop point)
    reason: str = ""     # empty when delivered

    @property
    def delivered(self) -> bool:
        return not self.reason

    def nsp_hops(self) -> tuple:
        # drop the subnets at either end
        inner = self.hops[1:]
        return inner[:-1] if self.delivered else inner

    def render(self, names: dict) -> str:
        if not self.delivered:
            return f"blocked({self.reason})"
        return "<" + ",".join(names.get(h, h[:8]) for h in self.nsp_hops()) + ">"


@dataclass
class Subnet:
    name: str
    principal: Principal
    prefix: Prefix
    sdx: str                       # provider name
    ip_cert: object = None
    attached: bool = False
    advertised: bool = False

    @property
    def host(self) -> int:
        return self.prefix.bits + HOST_OFFSET


def stitch_secret(seed: str, a: str, b: str) -> str:
    pair = "|".join(sorted((a, b))).encode()
    return hmac.new(seed.encode() or b"logpeer", pair, hashlib.sha256).hexdigest()[:32]


class Network:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.step = 0
        self.store = CertStore()
        self.bus = EventBus(scenario.message_budget)
        scheme = SCHEMES[scenario.scheme]
        self.principals = {p.name: Principal.generate(p.name, scenario.key_seed, scheme)
                           for p in scenario.principals}
        for pr in self.principals.values():
            self.store.register(pr)
        self.names = {pr.pid: name for name, pr in self.principals.items()}
        self.pids = {name: pr.pid for name, pr in self.principals.items()}
        self.tags = {t.name: Tag(self.pids[t.root], t.name) for t in scenario.tags}
        self.traces: list[tuple[int, str, str, Trace]] = []
        self.flow_acks: list[tuple[int, str, str, object]] = []

        self._issue_tags()
        self._issue_prefixes()
        self._build_controllers()
        self._issue_policies()

    # -- setup -----------------------------------------------------------------

    def _issue_tags(self) -> None:
        held: dict[str, list] = {}
        delegations: dict[tuple, object] = {}
        for e in self.scenario.endorsements:
            tag = self.tags[e.tag]
            issuer = e.issuer or self.names[tag.root]
            parent = None
            if self.pids[issuer] != tag.root:
                parent = delegations.get((e.tag, issuer))
                if parent is None:
                    raise ScenarioError(f"{issuer} endorses {e.tag} without a delegation")
            tok = endorse_tag(self.store, self.principals[issuer], self.pids[e.subject], tag,
                              parent=parent, delegate=e.delegate)
            held.setdefault(e.subject, []).append(tok)
            if e.delegate:
                delegations[(e.tag, e.subject)] = tok
        for name in sorted(held):
            publish_tag_set(self.store, self.principals[name], held[name])

    def _issue_prefixes(self) -> None:
        self.holdings: dict[str, list] = {}
        roots = {self.pids[r] for r in self.scenario.trust_roots}
        for d in self.scenario.prefixes:
            pfx = Prefix.parse(d.prefix)
            parent = None
            if self.pids[d.issuer] not in roots:
                parent = next((t for p, t in self.holdings.get(d.issuer, ()) if p.contains(pfx)), None)
                if parent is None:
                    raise ScenarioError(f"{d.issuer} delegates {d.prefix} it does not hold")
            tok = delegate_prefix(self.store, self.principals[d.issuer], self.pids[d.holder], pfx, parent)
            self.holdings.setdefault(d.holder, []).append((pfx, tok))
        self.subnets: dict[str, Subnet] = {}
        for spec in self.scenario.of_kind("subnet"):
            pfx = Prefix.parse(spec.prefix)
            ip_cert = next((t for p, t in self.holdings.get(spec.name, ()) if p.contains(pfx)), None)
            self.subnets[spec.name] = Subnet(spec.name, self.principals[spec.name], pfx, spec.sdx, ip_cert)

    def _build_controllers(self) -> None:
        cfg = GuardConfig(tuple(sorted(self.pids[r] for r in self.scenario.trust_roots)),
                          self.scenario.tag_depth)
        self.controllers: dict[str, NspController] = {}
        partners: dict[str, set] = {}
        for l in self.scenario.links:
            partners.setdefault(l.a, set()).add(l.b)
            partners.setdefault(l.b, set()).add(l.a)
        for s in self.subnets.values():
            partners.setdefault(s.sdx, set()).add(s.name)
        seed = self.scenario.key_seed
        for spec in self.scenario.of_kind("nsp", "sdx"):
            mates = sorted(partners.get(spec.name, ()))
            ctl = NspController(
                self.principals[spec.name], self.store, cfg,
                send=self._sender(spec.name), clock=lambda: self.step, name=spec.name,
                stitch_acl=[self.pids[m] for m in mates],
                secrets={self.pids[m]: stitch_secret(seed, spec.name, m) for m in mates},
                names=self.names,
            )
            self.controllers[spec.name] = ctl
        self._by_pid = {c.pid: c for c in self.controllers.values()}

    def _issue_policies(self) -> None:
        self.attached_inbound: dict[str, list] = {}
        self.scheduled: list[tuple[int, str, object]] = []   # (step, owner, token)
        for pol in self.scenario.policies:
            owner = self.principals[pol.owner]
            if pol.kind == "connectivity":
                issue_connectivity_policy(self.store, owner, [self._tag(t) for t in pol.tags],
                                          [self.pids[p] for p in pol.pids])
                continue
            sub = self.subnets.get(pol.owner)
            src = self.scenario.resolve_prefix(pol.src)
            dst = self.scenario.resolve_prefix(pol.dst)
            tok = issue_path_policy(self.store, owner, pol.kind, src, dst,
                                    [self._tag(t) for t in pol.tags],
                                    ip_cert=sub.ip_cert if sub else None)
            adv = self.scenario.principal(pol.owner).advertise_at
            if pol.kind == "inbound" and pol.step <= adv:
                self.attached_inbound.setdefault(pol.owner, []).append(tok)
            else:
                self.scheduled.append((max(pol.step, adv), pol.owner, (src, dst, tok)))

    def _tag(self, name):
        return ANY if name == ANY else self.tags[name]

    def _sender(self, name: str):
        pid = self.pids[name]

        def send(receiver: str, msg: Message) -> None:
            self.bus.send(pid, receiver, msg)
        return send

    def _deliver(self, receiver: str, msg: Message) -> None:
        ctl = self._by_pid.get(receiver)
        if ctl is not None:
            ctl.handle(msg)

    def drain(self) -> int:
        return self.bus.drain(self._deliver)

    # -- actions ---------------------------------------------------------------

    def link(self, a: str, b: str) -> bool:
        """Stitch two providers; the acceptor checks secret and ACL, then both
        sides start exchanging routes."""
        ca, cb = self.controllers[a], self.controllers[b]
        msg = StitchRequest(ca.pid, secret=stitch_secret(self.scenario.key_seed, a, b))
        ack = cb.handle(msg)
        if ack.ok:
            ca.link_up(cb.pid)
        return ack.ok

    def unlink(self, a: str, b: str) -> None:
        ca, cb = self.controllers[a], self.controllers[b]
        cb.handle(UndoStitch(ca.pid))
        ca.handle(UndoStitch(cb.pid))

    def attach(self, name: str) -> bool:
        sub = self.subnets[name]
        sdx = self.controllers[sub.sdx]
        msg = StitchRequest(sub.principal.pid, secret=stitch_secret(self.scenario.key_seed, sub.sdx, name),
                            properties=(("role", "customer"),))
        sub.attached = sdx.handle(msg).ok
        return sub.attached

    def advertise(self, name: str) -> None:
        sub = self.subnets[name]
        sdx = self.controllers[sub.sdx]
        tok = originate_route(self.store, sub.principal, sub.prefix, sdx.pid, sub.ip_cert,
                              self.attached_inbound.get(name, ()))
        self.bus.send(sub.principal.pid, sdx.pid,
                      AdvertiseRoute(sub.principal.pid, (sub.prefix, (sub.principal.pid,)), tok))
        sub.advertised = True

    def send_policy(self, owner: str, src: Prefix, dst: Prefix, token) -> None:
        sub = self.subnets[owner]
        sdx = self.controllers[sub.sdx]
        self.bus.send(sub.principal.pid, sdx.pid, AdvertisePolicy(sub.principal.pid, src, dst, token))

    def request_flow(self, a: str, b: str):
        sub = self.subnets[a]
        ack = self.controllers[sub.sdx].handle(RequestFlow(self.pids[a], self.pids[a], self.pids[b]))
        self.flow_acks.append((self.step, a, b, ack))
        return ack

    # -- stepping --------------------------------------------------------------

    def advance(self) -> None:
        k = self.step + 1
        self.step = k
        sc = self.scenario
        for l in sc.links:
            if l.step == k:
                self.link(l.a, l.b)
            if l.down == k:
                self.unlink(l.a, l.b)
        self.drain()
        for name, sub in self.subnets.items():
            if sc.principal(name).attach_step == k:
                self.attach(name)
        self.drain()
        for name, sub in self.subnets.items():
            if sc.principal(name).advertise_at == k and sub.attached:
                self.advertise(name)
        self.drain()
        for step, owner, (src, dst, tok) in self.scheduled:
            if step == k:
                self.send_policy(owner, src, dst, tok)
        self.drain()
        for f in sc.flows:
            if f.step == k:
                self.request_flow(f.a, f.b)
                self.request_flow(f.b, f.a)
        self.drain()
        for p in sc.packets:
            if p.step == k:
                for _ in range(p.count):
                    self.traces.append((k, p.src, p.dst, self.trace(self.endpoint(p.src),
                                                                     self.endpoint(p.dst))))

    def run(self, through: int | None = None) -> "Network":
        through = self.scenario.steps if through is None else through
        if through > self.scenario.steps:
            raise ScenarioError(f"scenario has only {self.scenario.steps} steps")
        while self.step < through:
            self.advance()
        return self

    # -- dataplane -------------------------------------------------------------

    def endpoint(self, ref) -> int:
        """A subnet name (its .5 host) or a literal address."""
        if isinstance(ref, str) and ref in self.subnets:
            return self.subnets[ref].host
        return addr(ref)

    def subnet_of(self, ip: int) -> Subnet | None:
        for sub in self.subnets.values():
            if sub.prefix.contains_addr(ip):
                return sub
        return None

    def trace(self, src, dst) -> Trace:
        """Inject one packet at the source's edge provider and follow it."""
        src, dst = addr(src), addr(dst)
        sub = self.subnet_of(src)
        if sub is None or not sub.attached:
            return Trace((), "noSource")
        hops = [sub.principal.pid]
        ctl = self.controllers[sub.sdx]
        ingress = sub.principal.pid
        for _ in range(MAX_HOPS):
            hops.append(ctl.pid)
            v = ctl.flow_table().forward(Packet(src, dst, ingress))
            if v.dropped:
                return Trace(tuple(hops), v.reason)
            if v.action == DELIVER:
                hops.append(v.target)
                return Trace(tuple(hops))
            nxt = self._by_pid.get(v.target)
            if nxt is None:
                return Trace(tuple(hops), "noRoute")
            ingress, ctl = ctl.pid, nxt
        return Trace(tuple(hops), "loop")

    def installed_path(self, a: str, b: str) -> tuple | None:
        """Provider names along the controller-selected routes from subnet a
        to subnet b, ignoring flow permits; None when no route is installed."""
        src, dst = self.subnets[a].host, self.subnets[b].host
        ctl = self.controllers[self.subnets[a].sdx]
        out = []
        for _ in range(MAX_HOPS):
            out.append(ctl.name)
            best = None
            for region, route in ctl.forward_map.items():
                if region.contains_point(src, dst):
                    if best is None or (region.specificity, -region.area) > (best[0].specificity, -best[0].area):
                        best = (region, route)
            if best is None or best[1] is None:
                return None
            route = best[1]
            if route.path == (self.pids[b],):
                return tuple(out)
            ctl = self._by_pid.get(route.next_hop)
            if ctl is None:
                return None
        return None

    # -- reporting -------------------------------------------------------------

    def controller(self, name: str) -> NspController:
        try:
            return self.controllers[name]
        except KeyError:
            raise KeyError(f"unknown node {name!r}") from None

    def dump_flows(self, name: str, nonzero: bool = False) -> str:
        return self.controller(name).flow_table().dump(self.names, nonzero)

    def state_text(self) -> str:
        return "\n".join(self.controllers[n].describe() for n in sorted(self.controllers))

    def path_matrix(self) -> str:
        """One line per scheduled flow pair: the path taken at each packet step."""
        steps = sorted({k for k, *_ in self.traces})
        first: dict = {}
        for k, s, d, t in self.traces:
            first.setdefault((k, s, d), t)
        lines = []
        for f in self.scenario.flows:
            cells = []
            for k in steps:
                t = first.get((k, f.a, f.b))
                cells.append(f"{k}:" + ("-" if t is None or not t.delivered else t.render(self.names)))
            lines.append(f"{f.a}->{f.b} " + " ".join(cells))
        return "\n".join(lines)

    def matrix_cells(self) -> dict:
        """(src, dst, step) -> NSP name tuple, or None when blocked."""
        out = {}
        for k, s, d, t in self.traces:
            key = (s, d, k)
            if key in out:
                continue
            out[key] = tuple(self.names[h] for h in t.nsp_hops()) if t.delivered else None
        return out


def run_scenario(scenario: Scenario, through: int | None = None) -> Network:
    return Network(scenario).run(through)
