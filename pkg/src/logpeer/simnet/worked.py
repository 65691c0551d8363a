"""Single-controller worked example: provider 5 peers with 2 and 4, the
destination 1.1.1.0/24 sits behind 1, and only 3, 4 and 5 wield 'secure'.

A source-specific outbound policy for 2.2.0.0/16 that demands 'secure' splits
the destination region and steers that slice onto the longer [4,3,1] route.
"""

from __future__ import annotations

from ..aqt import WILDCARD, Prefix, Region
from ..governance import ANY, Tag, endorse_tag, issue_path_policy, publish_tag_set
from ..nspctl import NspController, Policy, Route, policy_from_certificate
from ..routesec import GuardConfig
from ..trustlog.certs import CertStore, Principal


class SplitExample:
    def __init__(self):
        self.store = CertStore()
        self.P = {n: Principal.generate(n, "s") for n in ["1", "2", "3", "4", "5", "R", "S"]}
        for p in self.P.values():
            self.store.register(p)
        self.secure = Tag(self.P["R"].pid, "secure")
        for n in ["3", "4", "5"]:
            end = endorse_tag(self.store, self.P["R"], self.P[n].pid, self.secure)
            publish_tag_set(self.store, self.P[n], [end])
        self.sent = []
        self.ctl = NspController(self.P["5"], self.store, GuardConfig((self.P["R"].pid,)),
                                 send=lambda r, m: self.sent.append((self.name(r), m)),
                                 names={p.pid: n for n, p in self.P.items()})
        self.ctl.peers |= {self.P["2"].pid, self.P["4"].pid}
        self.dst = Prefix.parse("1.1.1.0/24")
        self.ctl.on_route(Route(self.dst, self.pids("2", "1"), None, (), self.P["2"].pid))
        self.ctl.on_route(Route(self.dst, self.pids("4", "3", "1"), None, (), self.P["4"].pid))
        self.ctl.on_policy(Policy("inbound", Region(WILDCARD, self.dst), frozenset({ANY}), None,
                                  self.P["1"].pid))

    def name(self, pid):
        return next(n for n, p in self.P.items() if p.pid == pid)

    def pids(self, *names):
        return tuple(self.P[n].pid for n in names)

    def secure_outbound(self) -> Policy:
        tok = issue_path_policy(self.store, self.P["S"], "outbound", Prefix.parse("2.2.0.0/16"),
                                WILDCARD, [self.secure])
        return policy_from_certificate(self.store.verified(tok), tok)

    def run(self) -> tuple[str, str]:
        """Controller state before and after the outbound policy arrives."""
        before = self.ctl.describe()
        self.ctl.on_policy(self.secure_outbound())
        return before, self.ctl.describe()
