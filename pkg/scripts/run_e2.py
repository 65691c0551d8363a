"""Run the five-provider scenario step by step, printing the B<->C path and
the nonzero flow counters of the transit providers after each step."""

import argparse

from logpeer.simnet import Network, load_scenario


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", default="e2")
    p.add_argument("--pair", nargs=2, default=["B", "C"], metavar=("SRC", "DST"))
    args = p.parse_args(argv)
    net = Network(load_scenario(args.scenario))
    src, dst = args.pair
    while net.step < net.scenario.steps:
        net.advance()
        path = net.installed_path(src, dst)
        print(f"step {net.step}: {src}->{dst} " + ("<" + ",".join(path) + ">" if path else "-"))
    print()
    print(net.path_matrix())
    for node in sorted(n for n in net.controllers if n.startswith("N")):
        print(f"\n{node}")
        print(net.dump_flows(node, nonzero=True))


if __name__ == "__main__":
    main()
