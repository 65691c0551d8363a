"""One test per acceptance criterion, each at its stated tolerance.  Every
test records a PASS/FAIL line that is repeated in the terminal summary."""

import os
import random
import subprocess
import sys
import time
from pathlib import Path


from logpeer.aqt import AQT
from logpeer.simnet import Network, load_scenario
from logpeer.simnet.audit import audit_network
from logpeer.simnet.bench import (SUITES, AuthzConfig, AuthzWorkload, bench_aqt, random_region,
                                  sweep_authz)
from logpeer.simnet.randomnet import compliant_path_exists, random_scenario
from logpeer.simnet.worked import SplitExample

from helpers import forge_ownership, hijack, installed_anywhere, tamper_sweep
from test_nspctl import NSP5_AFTER, NSP5_BEFORE
from test_security import spoof_probe
from test_simnet import A, B, C, D, E2_MATRIX, counters

ROOT = Path(__file__).resolve().parents[1]


def test_criterion_1_e1_paths(report):
    t0 = time.perf_counter()
    net = Network(load_scenario("e1")).run()
    elapsed = time.perf_counter() - t0
    cells = net.matrix_cells()
    ac, bd = cells[("A", "C", 3)], cells[("B", "D", 3)]
    n1, n2 = counters(net, "N1"), counters(net, "N2")
    ok = (ac == ("S1", "N1", "S2") and bd == ("S1", "N2", "S2")
          and n1 == {(None, A): 1, (None, C): 1} and n2 == {(None, B): 1, (None, D): 1}
          and elapsed < 5)
    report(1, ok, f"A->C={','.join(ac or ())} B->D={','.join(bd or ())} "
                  f"N1={sorted(n1.values())} N2={sorted(n2.values())} {elapsed:.2f}s")
    assert ok


def test_criterion_2_e2_matrix(report):
    t0 = time.perf_counter()
    net = Network(load_scenario("e2")).run()
    elapsed = time.perf_counter() - t0
    cells = net.matrix_cells()
    wrong = []
    for pair, row in E2_MATRIX.items():
        for step, want in row.items():
            for a, b in (pair, pair[::-1]):
                got = cells[(a, b, step)]
                if (a, b) != pair and got is not None:
                    got = tuple(reversed(got))
                if (" ".join(got) if got else None) != want:
                    wrong.append(f"{a}->{b}@{step}")
    if net.step < 3:
        wrong.append("did not run")
    ok = not wrong and elapsed < 10
    report(2, ok, f"{'all 32 cells match' if not wrong else 'mismatch ' + ' '.join(wrong)} "
                  f"{elapsed:.2f}s")
    assert ok


def test_criterion_3_split_example(report):
    ex = SplitExample()
    exports = set(ex.ctl.exports)
    before, after = ex.run()
    from logpeer.aqt import Region
    region = Region.parse("2.2.0.0/16", "1.1.1.0/24")
    fwd = ex.ctl.forward_map.get(region)
    grown = ex.ctl.exports - exports
    ok = (before == NSP5_BEFORE and after == NSP5_AFTER
          and fwd is not None and fwd.path == ex.pids("4", "3", "1")
          and grown == {(ex.dst, ex.pids("4", "3", "1"))})
    report(3, ok, f"state tables {'match' if ok else 'differ'}; new region {region} -> [4,3,1]")
    assert ok


def test_criterion_4_aqt(report):
    t0 = time.perf_counter()
    rng = random.Random(44)
    tree, shadow = AQT(), {}
    disagreements = 0
    for _ in range(10_000):
        op = rng.random()
        r = random_region(rng, spread=6)
        if op < 0.45:
            tree.insert(r, len(shadow))
            shadow[r] = tree.get(r)
        elif op < 0.7:
            present = r in shadow
            if tree.remove(r) != present:
                disagreements += 1
            shadow.pop(r, None)
        else:
            got = {k for k, _ in tree.query(r)}
            want = {k for k in shadow if k.overlaps(r)}
            disagreements += got != want
    res = {n: bench_aqt(n, queries=q, seed=5, sample=3000)
           for n, q in ((1_000, 400), (10_000, 100), (100_000, 12))}
    elapsed = time.perf_counter() - t0

    def ratio(attr):
        a, b = getattr(res[1_000], attr), getattr(res[100_000], attr)
        return max(a, b) / min(a, b)

    ins, rem = ratio("insert_mean"), ratio("remove_mean")
    sizes = [res[n].result_mean for n in sorted(res)]
    times = [res[n].query_mean for n in sorted(res)]
    rising = all(x < y for x, y in zip(sizes, sizes[1:])) and all(x < y for x, y in zip(times, times[1:]))
    ok = disagreements == 0 and ins < 2 and rem < 2 and rising and elapsed < 60
    report(4, ok, f"disagreements={disagreements} insert_ratio={ins:.2f} remove_ratio={rem:.2f} "
                  f"query_us={[round(t * 1e6) for t in times]} mean_result={[round(s, 1) for s in sizes]} "
                  f"{elapsed:.1f}s")
    assert ok


def test_criterion_5_security(report):
    certs, tried, survived = tamper_sweep(samples_per_cert=64, seed=5)

    installed = []
    cases = [(load_scenario("e1"), "A"), (load_scenario("e2"), "D")]
    cases += [(random_scenario(s, nsps=6, subnets=3), "X1") for s in range(20)]
    for sc, victim in cases:
        net, prefix = forge_ownership(sc, victim)
        net.run()
        installed += installed_anywhere(net, prefix, net.pids[victim])
    net = Network(load_scenario("e2")).run()
    installed += installed_anywhere(net, hijack(net, "B", "A"), net.pids["B"])

    violations, probes, leaks = 0, 0, 0
    for seed in range(100):
        net = Network(random_scenario(seed, nsps=8, tags=4, subnets=4, scheme="ed25519")).run()
        violations += len(audit_network(net))
        p, l = spoof_probe(net)
        probes += p
        leaks += len(l)
    ok = survived == 0 and not installed and violations == 0 and leaks == 0
    report(5, ok, f"(a) {tried} flips over {certs} certs, {survived} validated; "
                  f"(b) {len(cases) + 1} bogus originations, installed at {len(installed)}; "
                  f"(c) 100 topologies, {violations} violations; "
                  f"(d) {probes} spoofed packets, {leaks} accepted")
    assert ok


def test_criterion_6_liveness(report):
    t0 = time.perf_counter()
    rng = random.Random(6)
    pairs = mismatches = delivered_blocked = installed = 0
    for seed in range(200):
        sc = random_scenario(1000 + seed, nsps=rng.randint(3, 8), tags=rng.randint(1, 4),
                             subnets=rng.randint(2, 4))
        net = Network(sc).run()
        for a in net.subnets:
            for b in net.subnets:
                if a == b:
                    continue
                pairs += 1
                expect = compliant_path_exists(sc, a, b)
                got = net.installed_path(a, b) is not None
                installed += got
                mismatches += got != expect
                if not expect and net.trace(net.subnets[a].host, net.subnets[b].host).delivered:
                    delivered_blocked += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and delivered_blocked == 0 and elapsed < 120
    report(6, ok, f"200 instances, {pairs} pairs ({installed} reachable), {mismatches} mismatches, "
                  f"{delivered_blocked} deliveries without a compliant path, {elapsed:.1f}s")
    assert ok


def test_criterion_7_authz_trends(report):
    wl = AuthzWorkload(nsps=100, depth=3, seed=7)
    configs = [AuthzConfig(nsps=100, suite=suite, path_len=n, depth=3, routes=12, min_time=0.06)
               for suite in SUITES for n in range(1, 9)]
    tput = {(r.suite, r.path_len): r.throughput for r in sweep_authz(configs, wl, rounds=7)}
    order = all(tput[("bgpsec", n)] >= tput[("pbr2", n)] >= tput[("pbr1", n)] for n in range(1, 9))
    mono = all(tput[(s, n)] >= tput[(s, n + 1)] for s in SUITES for n in range(1, 8))
    ok = order and mono
    summary = " ".join(f"{s}=[{','.join(str(round(tput[(s, n)])) for n in range(1, 9))}]"
                       for s in SUITES)
    report(7, ok, f"ordering={'ok' if order else 'broken'} non-increasing={'ok' if mono else 'broken'} "
                  f"routes/s {summary}")
    assert ok


def test_criterion_8_determinism(report):
    outs = []
    for hashseed in ("0", "1", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        proc = subprocess.run([sys.executable, str(ROOT / "scripts" / "goldens.py")], env=env,
                              capture_output=True, check=True)
        outs.append(proc.stdout)
    ok = len(set(outs)) == 1 and len(outs[0]) > 1000
    report(8, ok, f"3 runs, {len(outs[0])} bytes each, {len(set(outs))} distinct")
    assert ok
