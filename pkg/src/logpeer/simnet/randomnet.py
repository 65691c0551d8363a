"""Random small topologies with random disjunctive tag policies, and a
graph-search oracle for which subnet pairs should be reachable."""

from __future__ import annotations

import random
from collections import deque

from .scenario import (EndorsementSpec, FlowSpec, LinkSpec, PacketSpec, PolicySpec, PrefixSpec,
                       PrincipalSpec, Scenario, TagSpec)

ANY = "any"


def _subset(rng: random.Random, tags: list, nonempty: bool = True) -> list:
    while True:
        out = [t for t in tags if rng.random() < 0.5]
        if out or not nonempty:
            return out


def random_scenario(seed: int, nsps: int = 6, tags: int = 3, subnets: int = 2,
                    link_prob: float = 0.45, pair_policy_prob: float = 0.6,
                    scheme: str = "mock") -> Scenario:
    """``nsps`` counts every provider including the two edge SDXes."""
    if nsps < 2:
        raise ValueError("need at least the two edge providers")
    rng = random.Random(seed)
    tag_names = [f"t{i}" for i in range(tags)]
    providers = ["S1", "S2"] + [f"N{i}" for i in range(1, nsps - 1)]
    subs = [f"X{i}" for i in range(subnets)]
    principals = [PrincipalSpec("IANA", "root"), PrincipalSpec("TA", "root")]
    principals += [PrincipalSpec(p, "sdx" if p.startswith("S") else "nsp") for p in providers]
    for i, s in enumerate(subs):
        principals.append(PrincipalSpec(s, "subnet", prefix=f"10.0.{i}.0/24",
                                        sdx="S1" if i % 2 == 0 else "S2", attach_step=2))

    endorsements = []
    for p in providers:
        held = tag_names if (p.startswith("S") and rng.random() < 0.5) else _subset(rng, tag_names, False)
        endorsements += [EndorsementSpec(t, p) for t in held]

    links = []
    for i, a in enumerate(providers):
        for b in providers[i + 1:]:
            if rng.random() < link_prob:
                links.append(LinkSpec(a, b, 1))

    policies = []
    for s in subs:
        policies.append(PolicySpec(s, "inbound", "*", s, _subset(rng, tag_names)))
        policies.append(PolicySpec(s, "connectivity", pids=[o for o in subs if o != s]))
    for a in subs:
        for b in subs:
            if a == b:
                continue
            if rng.random() < pair_policy_prob:
                policies.append(PolicySpec(a, "outbound", a, b, _subset(rng, tag_names), step=2))
            if rng.random() < pair_policy_prob / 2:
                policies.append(PolicySpec(b, "inbound", a, b, _subset(rng, tag_names), step=2))

    flows = [FlowSpec(a, b, 3) for i, a in enumerate(subs) for b in subs[i + 1:]]
    packets = [PacketSpec(a, b, 3) for a in subs for b in subs if a != b]
    return Scenario(
        name=f"random-{seed}",
        principals=principals,
        tags=[TagSpec(t, "TA") for t in tag_names],
        endorsements=endorsements,
        prefixes=[PrefixSpec("IANA", s, f"10.0.{i}.0/24") for i, s in enumerate(subs)],
        links=links,
        policies=policies,
        flows=flows,
        packets=packets,
        steps=3,
        trust_roots=["IANA"],
        key_seed=f"random-{seed}",
        scheme=scheme,
    ).validate()


def controlling_acls(sc: Scenario, a: str, b: str) -> tuple[set, set]:
    """Tag sets of the most specific inbound and outbound policies covering
    traffic from subnet ``a`` to subnet ``b`` (``{'any'}`` for the defaults)."""
    pa, pb = sc.resolve_prefix(a), sc.resolve_prefix(b)
    best = {"inbound": None, "outbound": None}
    for pol in sc.policies:
        if pol.kind == "connectivity":
            continue
        src, dst = sc.resolve_prefix(pol.src), sc.resolve_prefix(pol.dst)
        if not (src.contains(pa) and dst.contains(pb)):
            continue
        if pol.kind == "inbound" and pol.owner != b or pol.kind == "outbound" and pol.owner != a:
            continue
        key = (dst.length, src.length) if pol.kind == "inbound" else (src.length, dst.length)
        cur = best[pol.kind]
        if cur is None or key >= cur[0]:
            best[pol.kind] = (key, set(pol.tags))
    inbound = best["inbound"][1] if best["inbound"] else {ANY}
    outbound = best["outbound"][1] if best["outbound"] else {ANY}
    return inbound, outbound


def compliant_path_exists(sc: Scenario, a: str, b: str) -> bool:
    """Breadth-first search from a's provider to b's over providers holding a
    tag from each controlling ACL."""
    inbound, outbound = controlling_acls(sc, a, b)
    held: dict[str, set] = {}
    for e in sc.endorsements:
        held.setdefault(e.subject, set()).add(e.tag)

    def ok(p):
        tags = held.get(p, set())
        return all(ANY in acl or tags & acl for acl in (inbound, outbound))

    adj: dict[str, set] = {}
    for l in sc.links:
        adj.setdefault(l.a, set()).add(l.b)
        adj.setdefault(l.b, set()).add(l.a)
    start, goal = sc.principal(a).sdx, sc.principal(b).sdx
    if not ok(start):
        return False
    seen, queue = {start}, deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            return True
        for v in sorted(adj.get(u, ())):
            if v not in seen and ok(v):
                seen.add(v)
                queue.append(v)
    return False
