"""Sweep guard-check throughput over path lengths for the three suites and
print CSV (suite,path_len,throughput)."""

import argparse

from logpeer.simnet.bench import SUITES, AuthzConfig, AuthzWorkload, sweep_authz


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nsps", type=int, default=100)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--routes", type=int, default=16)
    p.add_argument("--rounds", type=int, default=5)
    p.add_argument("--min-time", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=7)
    args = p.parse_args(argv)
    wl = AuthzWorkload(args.nsps, args.depth, args.seed)
    configs = [AuthzConfig(nsps=args.nsps, suite=suite, path_len=n, depth=args.depth,
                           routes=args.routes, min_time=args.min_time, seed=args.seed)
               for suite in SUITES for n in range(1, args.max_len + 1)]
    print("suite,path_len,throughput")
    for r in sweep_authz(configs, wl, rounds=args.rounds):
        print(r.line())

if __name__ == "__main__":
    main()
