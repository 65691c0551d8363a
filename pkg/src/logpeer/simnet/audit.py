"""Post-run invariant checks that re-derive every verdict from the certificate
store instead of trusting controller caches."""

from __future__ import annotations

from ..governance import TAGS_LABEL
from ..routesec import check_authorized_route, check_compliant_path
from ..trustlog.certs import resolve_context


def audit_network(net) -> list[str]:
    """Violations of compliance safety, route authorization and loop freedom
    across every controller's forwarding map."""
    problems = []
    cfg = None
    for name in sorted(net.controllers):
        ctl = net.controllers[name]
        cfg = ctl.guards.config
        for region in sorted(ctl.forward_map):
            route = ctl.forward_map[region]
            if route is None:
                continue
            where = f"{name} {region}"
            if len(set(route.path)) != len(route.path) or ctl.pid in route.path:
                problems.append(f"{where}: looping path")
            pair = ctl.match.get(region)
            if pair is None:
                problems.append(f"{where}: forwarding without a policy pair")
                continue
            hops = (ctl.pid,) + route.path[:-1]
            roots = [p.token for p in (pair.inbound, pair.outbound) if p.token is not None]
            roots += [t for t in (net.store.lookup(h, TAGS_LABEL) for h in hops) if t is not None]
            ctx = resolve_context(net.store, roots, now=net.step)
            verdict = check_compliant_path(ctx, [pair.inbound, pair.outbound], hops, cfg.tag_depth)
            if not verdict:
                problems.append(f"{where}: non-compliant route ({verdict.reason} {verdict.detail})")
            if route.token is not None:
                rctx = resolve_context(net.store, [route.token], now=net.step)
                v = check_authorized_route(rctx, route.owner, route.dst, route.path, ctl.pid,
                                           cfg.trust_roots)
                if not v:
                    problems.append(f"{where}: unauthorized route ({v.reason})")
    return problems
