"""Micro-benchmarks: guard-check throughput and AQT operation timing."""

from __future__ import annotations

import contextlib
import gc
import random
import statistics
import time
from dataclasses import dataclass, field

from ..aqt import AQT, WILDCARD, Prefix, Region
from ..governance import (Tag, delegate_prefix, endorse_tag, issue_path_policy, originate_route,
                          publish_tag_set, sign_route_hop)
from ..routesec import check_authorized_route, check_compliant_path
from ..trustlog.certs import SCHEMES, CertStore, Principal, resolve_context

SUITES = ("bgpsec", "pbr2", "pbr1")


@contextlib.contextmanager
def _quiet_gc():
    # like timeit: a full collection landing inside a timed window would be
    # charged to whichever operation happened to trigger it
    was = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()


@dataclass(frozen=True)
class _Pol:
    owner: str
    region: Region
    acl: frozenset
    token: object


@dataclass
class AuthzConfig:
    nsps: int = 100
    suite: str = "bgpsec"
    path_len: int = 4
    depth: int = 3
    routes: int = 16
    rounds: int = 5
    min_time: float = 0.05
    seed: int = 7
    scheme: str = "ed25519"


@dataclass
class AuthzResult:
    suite: str
    path_len: int
    checks: int
    throughput: float               # checks per second, best round
    latency_mean: float             # seconds
    latency_p50: float
    latency_p99: float

    def line(self) -> str:
        return f"{self.suite},{self.path_len},{self.throughput:.1f}"


class AuthzWorkload:
    """Synthetic population: NSPs with tag endorsement chains and subnets with
    prefix delegation chains, both ``depth`` certificates long, plus signed
    routes over random NSP sequences."""

    def __init__(self, nsps: int = 100, depth: int = 3, seed: int = 7, scheme: str = "ed25519"):
        if depth < 1:
            raise ValueError("delegation depth must be at least 1")
        self.rng = random.Random(seed)
        self.depth = depth
        sch = SCHEMES[scheme]
        self.store = CertStore()

        def mk(name):
            p = Principal.generate(name, f"bench-{seed}", sch)
            self.store.register(p)
            return p

        self.iana = mk("iana")
        self.tag_root = mk("tagroot")
        self.tag = Tag(self.tag_root.pid, "secure")
        # tag chain: root -> t1 -> ... -> holder spans `depth` certificates
        parent, issuer = None, self.tag_root
        for i in range(depth - 1):
            mid = mk(f"tagdel{i}")
            parent = endorse_tag(self.store, issuer, mid.pid, self.tag, parent=parent, delegate=True)
            issuer = mid
        self.nsps = []
        for i in range(nsps):
            n = mk(f"nsp{i}")
            e = endorse_tag(self.store, issuer, n.pid, self.tag, parent=parent)
            publish_tag_set(self.store, n, [e])
            self.nsps.append(n)
        # prefix chain: iana -> a1 -> ... -> subnet spans `depth` certificates
        self._alloc_issuer, self._alloc_parent = self.iana, None
        block = Prefix.parse("10.0.0.0/8")
        for i in range(depth - 1):
            mid = mk(f"alloc{i}")
            self._alloc_parent = delegate_prefix(self.store, self._alloc_issuer, mid.pid, block,
                                                 self._alloc_parent)
            self._alloc_issuer = mid
        self._block = block
        self._subnets = 0
        self.trust_roots = (self.iana.pid,)

    def _subnet(self):
        k = self._subnets
        self._subnets += 1
        sub = Principal.generate(f"subnet{k}", "bench", self.nsps[0].scheme)
        self.store.register(sub)
        pfx = Prefix(self._block.bits + ((k % 65536) << 8), 24)
        ip = delegate_prefix(self.store, self._alloc_issuer, sub.pid, pfx, self._alloc_parent)
        return sub, pfx, ip

    def route(self, path_len: int):
        """A route over ``path_len`` NSP hops; returns the resolved context and
        everything the guards need."""
        if path_len > len(self.nsps):
            raise ValueError("path longer than the NSP population")
        dst_sub, dst, dst_ip = self._subnet()
        src_sub, src, src_ip = self._subnet()
        inbound = issue_path_policy(self.store, dst_sub, "inbound", WILDCARD, dst, [self.tag],
                                    ip_cert=dst_ip)
        outbound = issue_path_policy(self.store, src_sub, "outbound", src, WILDCARD, [self.tag],
                                     ip_cert=src_ip)
        hops = self.rng.sample(self.nsps, path_len)
        tok = originate_route(self.store, dst_sub, dst, hops[-1].pid, dst_ip, [inbound])
        path = (dst_sub.pid,)
        for i in range(path_len - 1, -1, -1):
            nsp = hops[i]
            path = (nsp.pid,) + path
            target = hops[i - 1].pid if i > 0 else "receiver"
            tok = sign_route_hop(self.store, nsp, dst, path, target, tok)
        ctx = resolve_context(self.store, [tok, outbound])
        pols = (_Pol(dst_sub.pid, Region(WILDCARD, dst), frozenset({self.tag.term}), inbound),
                _Pol(src_sub.pid, Region(src, WILDCARD), frozenset({self.tag.term}), outbound))
        return ctx, dst_sub.pid, dst, path, "receiver", pols


def _check(suite: str, item, trust_roots, tag_depth) -> bool:
    ctx, owner, dst, path, target, (inb, outb) = item
    ok = bool(check_authorized_route(ctx, owner, dst, path, target, trust_roots))
    if suite == "bgpsec":
        return ok
    hops = path[:-1]
    pols = [inb] if suite == "pbr2" else [inb, outb]
    return ok and bool(check_compliant_path(ctx, pols, hops, tag_depth))


def _timed_round(cfg: AuthzConfig, wl: AuthzWorkload, items, latencies: list) -> tuple[int, float]:
    n = 0
    start = time.perf_counter()
    while True:
        for it in items:
            t0 = time.perf_counter()
            _check(cfg.suite, it, wl.trust_roots, cfg.depth)
            latencies.append(time.perf_counter() - t0)
            n += 1
        elapsed = time.perf_counter() - start
        if elapsed >= cfg.min_time:
            return n, elapsed


class _Trial:
    """Prepared routes plus accumulated measurements for one configuration."""

    def __init__(self, cfg: AuthzConfig, wl: AuthzWorkload):
        if cfg.suite not in SUITES:
            raise ValueError(f"unknown suite {cfg.suite!r}")
        if cfg.nsps < cfg.path_len:
            raise ValueError("need at least path_len NSPs")
        self.cfg, self.wl = cfg, wl
        self.items = [wl.route(cfg.path_len) for _ in range(cfg.routes)]
        # warm-up doubles as a correctness check on the synthetic population
        for it in self.items:
            if not _check(cfg.suite, it, wl.trust_roots, cfg.depth):
                raise AssertionError("synthetic route failed its own guard")
        self.best = 0.0
        self.checks = 0
        self.latencies: list[float] = []

    def round(self) -> None:
        with _quiet_gc():
            n, elapsed = _timed_round(self.cfg, self.wl, self.items, self.latencies)
        self.checks += n
        self.best = max(self.best, n / elapsed)

    def result(self) -> AuthzResult:
        lat = sorted(self.latencies)
        return AuthzResult(self.cfg.suite, self.cfg.path_len, self.checks, self.best,
                           statistics.fmean(lat), lat[len(lat) // 2], lat[int(len(lat) * 0.99)])


def bench_authz(cfg: AuthzConfig, workload: AuthzWorkload | None = None) -> AuthzResult:
    wl = workload or AuthzWorkload(cfg.nsps, cfg.depth, cfg.seed, cfg.scheme)
    trial = _Trial(cfg, wl)
    for _ in range(cfg.rounds):
        trial.round()
    return trial.result()


def sweep_authz(configs, workload: AuthzWorkload, rounds: int = 5) -> list[AuthzResult]:
    """Measure several configurations with their rounds interleaved, so a
    transient slowdown of the host is spread over all of them instead of
    sinking every round of one.  Throughput is the best round per config."""
    trials = [_Trial(c, workload) for c in configs]
    for _ in range(rounds):
        for t in trials:
            t.round()
    return [t.result() for t in trials]


# -- AQT ---------------------------------------------------------------------

LENGTHS = (0, 8, 16, 24)


def random_prefix(rng: random.Random, lengths=LENGTHS, spread: int = 16) -> Prefix:
    """Octets drawn from a pool of ``spread`` values so that pairs overlap."""
    length = rng.choice(lengths)
    bits = 0
    for i in range(length // 8):
        bits |= rng.randrange(spread) << (24 - 8 * i)
    return Prefix(bits, length)


def random_region(rng: random.Random, lengths=LENGTHS, spread: int = 16) -> Region:
    return Region(random_prefix(rng, lengths, spread), random_prefix(rng, lengths, spread))


@dataclass
class AqtResult:
    n: int
    insert_mean: float
    remove_mean: float
    query_mean: float
    result_mean: float
    by_size: dict = field(default_factory=dict)   # result-size bucket -> mean query seconds

    def lines(self) -> list[str]:
        out = [f"aqt,{self.n},insert,{self.insert_mean * 1e6:.2f}us",
               f"aqt,{self.n},remove,{self.remove_mean * 1e6:.2f}us",
               f"aqt,{self.n},query,{self.query_mean * 1e6:.2f}us,mean_result={self.result_mean:.1f}"]
        for b in sorted(self.by_size):
            out.append(f"aqt,{self.n},query_size<={b},{self.by_size[b] * 1e6:.2f}us")
        return out


def _bucket(size: int) -> int:
    b = 1
    while b < size:
        b *= 4
    return b if size else 0


def bench_aqt(n: int, queries: int = 1000, seed: int = 1, spread: int = 16,
              sample: int = 2000) -> AqtResult:
    """Insert ``n`` distinct random regions, query, then remove them all.

    Insert and remove means are taken over the last ``sample`` operations
    into/out of a tree already holding about ``n`` regions."""
    rng = random.Random(seed)
    regions = set()
    attempts = 0
    while len(regions) < n and attempts < 20 * n + 100:
        regions.add(random_region(rng, spread=spread))
        attempts += 1
    regions = sorted(regions)
    rng.shuffle(regions)
    n = len(regions)
    tree = AQT()
    if n == 0:
        return AqtResult(0, 0.0, 0.0, 0.0, 0.0)
    k = min(sample, n)
    for r in regions[:n - k]:
        tree.insert(r, None)
    with _quiet_gc():
        t0 = time.perf_counter()
        for r in regions[n - k:]:
            tree.insert(r, None)
        insert_mean = (time.perf_counter() - t0) / k

    sizes, times = [], []
    probes = [random_region(rng, spread=spread) for _ in range(queries)]
    with _quiet_gc():
        for probe in probes:
            t0 = time.perf_counter()
            hits = tree.query(probe)
            times.append(time.perf_counter() - t0)
            sizes.append(len(hits))
            del hits
    by: dict[int, list] = {}
    for s, t in zip(sizes, times):
        by.setdefault(_bucket(s), []).append(t)

    with _quiet_gc():
        t0 = time.perf_counter()
        for r in regions[n - k:]:
            tree.remove(r)
        remove_mean = (time.perf_counter() - t0) / k
    return AqtResult(n, insert_mean, remove_mean, statistics.fmean(times) if times else 0.0,
                     statistics.fmean(sizes) if sizes else 0.0,
                     {b: statistics.fmean(v) for b, v in by.items()})
