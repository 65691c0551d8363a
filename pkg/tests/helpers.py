"""Small certificate worlds shared by the guard, certificate and security tests."""

from dataclasses import dataclass, field

from logpeer.aqt import Prefix
from logpeer.governance import (Tag, delegate_prefix, endorse_tag, issue_path_policy,
                                originate_route, publish_tag_set, sign_route_hop)
from logpeer.trustlog.certs import CertStore, Principal, resolve_context


@dataclass
class World:
    store: CertStore = field(default_factory=CertStore)
    who: dict = field(default_factory=dict)
    ip: dict = field(default_factory=dict)

    def principal(self, name, scheme=None):
        if name not in self.who:
            p = Principal.generate(name, seed=f"world/{name}", scheme=scheme)
            self.who[name] = p
            self.store.register(p)
        return self.who[name]

    def pid(self, name):
        return self.principal(name).pid

    def ctx(self, *roots, now=0):
        return resolve_context(self.store, roots, now=now)


def ownership_world(depth=3):
    """IANA -> R1 -> ... -> owner, each level one octet more specific.
    ``depth`` counts certificates in the chain."""
    w = World()
    iana = w.principal("IANA")
    prefixes = ["10.0.0.0/8", "10.1.0.0/16", "10.1.2.0/24", "10.1.2.128/25"]
    parent, issuer = None, iana
    for i in range(depth):
        holder = "owner" if i == depth - 1 else f"R{i + 1}"
        tok = delegate_prefix(w.store, issuer, w.pid(holder), Prefix.parse(prefixes[i]), parent)
        w.ip[holder] = (tok, Prefix.parse(prefixes[i]))
        parent, issuer = tok, w.principal(holder)
    return w


def route_chain(hops=3, tags=None):
    """Owner originates its prefix; N{hops}..N1 each sign one more hop.
    Returns (world, token of N1's advertisement, path, target)."""
    w = ownership_world(2)
    tags = tags or {}
    ta = w.principal("TA")
    for nsp, names in tags.items():
        ends = [endorse_tag(w.store, ta, w.pid(nsp), Tag(w.pid("TA"), t)) for t in names]
        publish_tag_set(w.store, w.principal(nsp), ends)
    ip_tok, dst = w.ip["owner"]
    names = [f"N{i}" for i in range(hops, 0, -1)]
    tok = originate_route(w.store, w.principal("owner"), dst, w.pid(names[0]), ip_tok)
    path = (w.pid("owner"),)
    for i, n in enumerate(names):
        path = (w.pid(n),) + path
        target = w.pid(names[i + 1]) if i + 1 < len(names) else w.pid("X")
        tok = sign_route_hop(w.store, w.principal(n), dst, path, target, tok)
    return w, tok, path, w.pid("X")


def path_policy(w, owner, kind, src, dst, tag_names):
    from logpeer.nspctl import policy_from_certificate
    tags = [Tag(w.pid("TA"), t) for t in tag_names]
    tok = issue_path_policy(w.store, w.principal(owner), kind, Prefix.parse(src),
                            Prefix.parse(dst), tags)
    return policy_from_certificate(w.store.get(tok), tok)


# -- security properties ------------------------------------------------------

def signed_chain_with_policy():
    """A 4-hop advertisement (owner plus three signers) whose signers hold the
    tag the owner's inbound policy demands.  Returns (world, roots, check)
    where ``check()`` runs route authorization plus compliance."""
    from logpeer.routesec import check_authorized_route, check_compliant_path
    w, tok, path, target = route_chain(3, tags={"N1": ["t0"], "N2": ["t0"], "N3": ["t0"]})
    dst = w.ip["owner"][1]
    pol = path_policy(w, "owner", "inbound", "0.0.0.0/0", str(dst), ["t0"])
    tag_sets = [w.store.lookup(w.pid(n), "tags") for n in ("N1", "N2", "N3")]
    roots = [tok, pol.token] + tag_sets

    def check():
        ctx = w.ctx(*roots)
        return bool(check_authorized_route(ctx, w.pid("owner"), dst, path, target, [w.pid("IANA")])
                    and check_compliant_path(ctx, [pol], path[:-1]))
    return w, roots, check


def tamper_sweep(samples_per_cert, seed=0):
    """Flip one byte at sampled offsets of every certificate in the chain.
    Returns (certificates, flips tried, flips that still validated)."""
    import random
    rng = random.Random(seed)
    w, roots, check = signed_chain_with_policy()
    assert check(), "untampered chain must validate"
    tokens = sorted(w.ctx(*roots).certificates)
    tried = survived = 0
    for tok in tokens:
        original = w.store.blobs[tok]
        offsets = sorted(rng.sample(range(len(original)), min(samples_per_cert, len(original))))
        for pos in offsets:
            blob = bytearray(original)
            blob[pos] ^= rng.randrange(1, 256)
            w.store.blobs[tok] = bytes(blob)
            tried += 1
            if check():
                survived += 1
        w.store.blobs[tok] = original
    assert check()
    return len(tokens), tried, survived


def forge_ownership(scenario, victim):
    """Build a network in which ``victim`` never received its prefix from the
    registry and instead presents a self-issued allocation."""
    import dataclasses
    from logpeer.governance import delegate_prefix
    from logpeer.simnet import Network
    sc = dataclasses.replace(scenario, prefixes=[p for p in scenario.prefixes if p.holder != victim])
    net = Network(sc)
    sub = net.subnets[victim]
    sub.ip_cert = delegate_prefix(net.store, sub.principal, sub.principal.pid, sub.prefix)
    return net, sub.prefix


def hijack(net, thief, victim):
    """``thief`` originates ``victim``'s prefix with its own ownership chain."""
    from logpeer.governance import originate_route
    from logpeer.messages import AdvertiseRoute
    sub, prey = net.subnets[thief], net.subnets[victim]
    sdx = net.controllers[sub.sdx]
    tok = originate_route(net.store, sub.principal, prey.prefix, sdx.pid, sub.ip_cert)
    net.bus.send(sub.principal.pid, sdx.pid,
                 AdvertiseRoute(sub.principal.pid, (prey.prefix, (sub.principal.pid,)), tok))
    net.drain()
    return prey.prefix


def installed_anywhere(net, prefix, owner_pid):
    hits = []
    for name, ctl in net.controllers.items():
        for route in ctl.routes.values():
            if route.dst == prefix and route.owner == owner_pid:
                hits.append(name)
        for route in ctl.forward_map.values():
            if route is not None and route.dst == prefix and route.owner == owner_pid:
                hits.append(name)
    return sorted(set(hits))
