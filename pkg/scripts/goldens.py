"""Print the reference outputs: E1 and E2 path matrices, flow dumps and
controller state, and the single-controller split example before/after.

Run it twice and diff to check run-to-run determinism.
"""

import argparse

from logpeer.simnet import Network, load_scenario
from logpeer.simnet.worked import SplitExample


def render(name: str) -> str:
    net = Network(load_scenario(name)).run()
    out = [f"== {name} matrix", net.path_matrix()]
    for node in sorted(net.controllers):
        out += [f"== {name} flows {node}", net.dump_flows(node)]
    out += [f"== {name} state", net.state_text()]
    return "\n".join(out)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", choices=["e1", "e2", "split"], default=None)
    args = p.parse_args(argv)
    parts = []
    if args.only in (None, "e1"):
        parts.append(render("e1"))
    if args.only in (None, "e2"):
        parts.append(render("e2"))
    if args.only in (None, "split"):
        before, after = SplitExample().run()
        parts += ["== split before", before, "== split after", after]
    print("\n".join(parts))


if __name__ == "__main__":
    main()
