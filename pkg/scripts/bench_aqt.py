"""AQT insert/remove/query timing across stored-region counts."""

import argparse

from logpeer.simnet.bench import bench_aqt


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    p.add_argument("--queries", type=int, default=200)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args(argv)
    for n in args.sizes:
        # query cost grows with the tree; cap the count so large sizes stay quick
        q = max(20, min(args.queries, 2_000_000 // max(n, 1)))
        for line in bench_aqt(n, queries=q, seed=args.seed).lines():
            print(line, flush=True)


if __name__ == "__main__":
    main()
