"""Command-line front end.

    logpeer run e2 --through-step 6
    logpeer trace e1 --src 192.168.10.5 --dst 192.168.30.7
    logpeer dump-flows e2 --node N3 --through-step 6
    logpeer bench authz --nsps 100 --suite pbr1 --path-len 4 --depth 3
    logpeer bench aqt --n 10000
"""

from __future__ import annotations

import argparse
import dataclasses
import ipaddress
import logging
import sys

from .simnet.audit import audit_network
from .simnet.bench import SUITES, AuthzConfig, bench_aqt, bench_authz
from .simnet.network import BusLivelock, Network
from .simnet.scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _ip(text: str) -> str:
    try:
        ipaddress.IPv4Address(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an IPv4 address: {text}") from None
    return text


def _network(args) -> Network:
    try:
        sc = load_scenario(args.scenario)
    except FileNotFoundError as e:
        raise UsageError(str(e)) from None
    except ScenarioError as e:
        raise UsageError(f"bad scenario: {e}") from None
    if getattr(args, "seed", None) is not None:
        sc = dataclasses.replace(sc, key_seed=str(args.seed))
    through = args.through_step
    if through is not None and not 0 <= through <= sc.steps:
        raise UsageError(f"--through-step must be between 0 and {sc.steps}")
    return Network(sc).run(through)


def cmd_run(args) -> int:
    net = _network(args)
    print(net.path_matrix())
    if args.state:
        print(net.state_text())
    if args.audit:
        problems = audit_network(net)
        for p in problems:
            print(f"violation: {p}")
        if problems:
            return EXIT_FAIL
        print("audit: ok")
    return EXIT_OK


def cmd_trace(args) -> int:
    net = _network(args)
    t = net.trace(args.src, args.dst)
    if not t.delivered:
        print(t.render(net.names))
        return EXIT_FAIL
    print(" ".join(net.names.get(h, h[:8]) for h in t.nsp_hops()))
    return EXIT_OK


def cmd_dump_flows(args) -> int:
    net = _network(args)
    if args.node not in net.controllers:
        raise UsageError(f"unknown node {args.node!r}; have {', '.join(sorted(net.controllers))}")
    text = net.dump_flows(args.node, nonzero=args.nonzero)
    if text:
        print(text)
    return EXIT_OK


def cmd_bench_authz(args) -> int:
    if args.nsps < args.path_len or args.path_len < 1:
        raise UsageError("need 1 <= --path-len <= --nsps")
    cfg = AuthzConfig(nsps=args.nsps, suite=args.suite, path_len=args.path_len, depth=args.depth,
                      routes=args.routes, rounds=args.rounds, seed=args.seed)
    r = bench_authz(cfg)
    print("suite,path_len,throughput")
    print(r.line())
    print(f"# latency mean={r.latency_mean * 1e3:.3f}ms p50={r.latency_p50 * 1e3:.3f}ms "
          f"p99={r.latency_p99 * 1e3:.3f}ms checks={r.checks}")
    return EXIT_OK


def cmd_bench_aqt(args) -> int:
    if args.n < 0:
        raise UsageError("--n must be non-negative")
    r = bench_aqt(args.n, queries=args.queries, seed=args.seed)
    print("\n".join(r.lines()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logpeer", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log controller rejections")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario", help="bundled name, name in $LOGPEER_SCENARIOS, or a .json path")
        sp.add_argument("--through-step", type=int, default=None)
        sp.add_argument("--seed", default=None, help="override the scenario key seed")

    sp = sub.add_parser("run", help="run a scenario and print the per-step path matrix")
    scenario_args(sp)
    sp.add_argument("--state", action="store_true", help="also print controller state")
    sp.add_argument("--audit", action="store_true", help="re-check installed routes against the guards")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("trace", help="inject one packet and print the NSPs it traverses")
    scenario_args(sp)
    sp.add_argument("--src", type=_ip, required=True)
    sp.add_argument("--dst", type=_ip, required=True)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("dump-flows", help="print one node's flow table")
    scenario_args(sp)
    sp.add_argument("--node", required=True)
    sp.add_argument("--nonzero", action="store_true", help="only entries that matched packets")
    sp.set_defaults(func=cmd_dump_flows)

    bench = sub.add_parser("bench", help="micro-benchmarks").add_subparsers(dest="bench", required=True)
    sp = bench.add_parser("authz", help="guard-check throughput")
    sp.add_argument("--nsps", type=int, default=100)
    sp.add_argument("--suite", choices=SUITES, default="bgpsec")
    sp.add_argument("--path-len", type=int, default=4)
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--routes", type=int, default=16)
    sp.add_argument("--rounds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=7)
    sp.set_defaults(func=cmd_bench_authz)

    sp = bench.add_parser("aqt", help="AQT insert/query/remove timing")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--queries", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=1)
    sp.set_defaults(func=cmd_bench_aqt)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"logpeer: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BusLivelock, AssertionError) as e:
        print(f"logpeer: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
