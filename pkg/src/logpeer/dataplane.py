"""Simulated source-specific flow table with ingress filtering and counters."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass

from .aqt import Prefix, Region

DELIVER = "deliverLocal"
DROP = "drop"

NO_ROUTE = "noRoute"
SPOOF = "spoof"
CONNECTIVITY = "connectivity"
POLICY = "policy"


def addr(ip) -> int:
    return int(ipaddress.IPv4Address(ip)) if not isinstance(ip, int) else ip


@dataclass(frozen=True)
class Action:
    kind: str                 # "forward", DELIVER or DROP
    target: str | None = None  # next-hop peer or local customer pid

    def render(self, names=None) -> str:
        if self.kind == DROP:
            return "drop"
        label = (names or {}).get(self.target, self.target[:8] if self.target else "")
        if self.kind == DELIVER:
            return f"deliver:{label}"
        return f"output:{label}"


@dataclass
class FlowEntry:
    region: Region
    priority: int
    action: Action
    allowed_ingress: frozenset = frozenset()
    n_packets: int = 0


@dataclass(frozen=True)
class Packet:
    src: int
    dst: int
    ingress: str

    @classmethod
    def make(cls, src, dst, ingress: str) -> "Packet":
        return cls(addr(src), addr(dst), ingress)


@dataclass(frozen=True)
class Verdict:
    action: str
    target: str | None = None
    reason: str = ""

    @property
    def dropped(self) -> bool:
        return self.action == DROP


class FlowTable:
    """One NSP switch.  Entries are keyed by region; the most specific
    matching entry wins."""

    def __init__(self):
        self.entries: dict[Region, FlowEntry] = {}
        self.customers: dict[str, Prefix | None] = {}
        self.permits: set[Region] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def sync(self, wanted: dict[Region, tuple[Action, frozenset]]) -> None:
        """Install exactly ``wanted``.  Entries whose region persists are
        modified in place, so their counters survive action changes."""
        for region in list(self.entries):
            if region not in wanted:
                del self.entries[region]
        for region, (action, ingress) in wanted.items():
            old = self.entries.get(region)
            if old is not None:
                old.action = action
                old.allowed_ingress = ingress
                continue
            self.entries[region] = FlowEntry(region, region.specificity, action, ingress)

    def lookup(self, src: int, dst: int) -> FlowEntry | None:
        best = None
        for e in self.entries.values():
            if e.region.contains_point(src, dst):
                if best is None or rank(e.region) > rank(best.region):
                    best = e
        return best

    def permitted(self, src: int, dst: int) -> bool:
        return any(r.contains_point(src, dst) for r in self.permits)

    def forward(self, pkt: Packet) -> Verdict:
        if pkt.ingress in self.customers:
            own = self.customers[pkt.ingress]
            if own is None or not own.contains_addr(pkt.src):
                return Verdict(DROP, reason=SPOOF)
            if not self.permitted(pkt.src, pkt.dst):
                return Verdict(DROP, reason=CONNECTIVITY)
        entry = self.lookup(pkt.src, pkt.dst)
        if entry is None:
            return Verdict(DROP, reason=NO_ROUTE)
        if entry.action.kind == DROP:
            return Verdict(DROP, reason=POLICY)
        if pkt.ingress not in self.customers and pkt.ingress not in entry.allowed_ingress:
            return Verdict(DROP, reason=SPOOF)
        if entry.action.kind == DELIVER and not self.permitted(pkt.src, pkt.dst):
            return Verdict(DROP, reason=CONNECTIVITY)
        entry.n_packets += 1
        return Verdict(entry.action.kind, entry.action.target)

    def sorted_entries(self) -> list[FlowEntry]:
        return sorted(self.entries.values(), key=lambda e: (-e.priority, e.region))

    def dump(self, names=None, nonzero: bool = False) -> str:
        lines = []
        for e in self.sorted_entries():
            if nonzero and not e.n_packets:
                continue
            parts = [f"n_packets={e.n_packets}"]
            if e.region.src.length:
                parts.append(f"nw_src={e.region.src}")
            if e.region.dst.length:
                parts.append(f"nw_dst={e.region.dst}")
            parts.append(f"action={e.action.render(names)}")
            lines.append(", ".join(parts))
        return "\n".join(lines)


def _neg(region: Region) -> tuple:
    # deterministic tie-break between equally specific entries: lower region wins
    return (-region.src.bits, -region.src.length, -region.dst.bits, -region.dst.length)


def rank(region: Region) -> tuple:
    """Lookup order: the entry with the larger rank wins where regions overlap."""
    return (region.specificity, _neg(region))


def _halves(p: Prefix) -> tuple[Prefix, Prefix]:
    n = p.length + 1
    return Prefix(p.bits, n), Prefix(p.bits | (1 << (32 - n)), n)


def covered(region: Region, others) -> bool:
    """Whether the union of ``others`` covers every point of ``region``."""
    others = [o for o in others if o.overlaps(region)]
    if not others:
        return False
    if any(o.contains(region) for o in others):
        return True
    # every remaining region is strictly smaller in some dimension; split there
    if region.src.length < 32 and any(o.src.length > region.src.length for o in others):
        return all(covered(Region(h, region.dst), others) for h in _halves(region.src))
    return all(covered(Region(region.src, h), others) for h in _halves(region.dst))
