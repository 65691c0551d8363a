import pytest

from logpeer.aqt import Prefix
from logpeer.governance import (Tag, endorse_tag, issue_connectivity_policy, originate_route,
                                publish_tag_set, sign_route_hop)
from logpeer.routesec import (BROKEN_CHAIN, CONNECTIVITY_DENIED, MISSING_OWNERSHIP,
                              NON_COMPLIANT_HOP, STITCH_DENIED, authorize_stitch,
                              check_authorized_route, check_compliant_path, check_connectivity,
                              check_covering_ownership, check_own_prefix)
from logpeer.nspctl import Policy
from logpeer.aqt import Region

from helpers import World, ownership_world, path_policy, route_chain


@pytest.mark.parametrize("depth", [1, 2, 3, 4])
def test_ownership_through_delegation_chain(depth):
    w = ownership_world(depth)
    tok, prefix = w.ip["owner"]
    assert check_own_prefix(w.ctx(tok), w.pid("owner"), prefix, [w.pid("IANA")])


def test_ownership_needs_trusted_root():
    w = ownership_world(3)
    tok, prefix = w.ip["owner"]
    # an intermediate holder may serve as a root, an unrelated party may not
    assert check_own_prefix(w.ctx(tok), w.pid("owner"), prefix, [w.pid("R1")])
    v = check_own_prefix(w.ctx(tok), w.pid("owner"), prefix, [w.pid("Z")])
    assert not v and v.reason == MISSING_OWNERSHIP


def test_sub_allocation_outside_parent_is_rejected():
    from logpeer.governance import delegate_prefix
    w = ownership_world(2)
    parent = w.ip["owner"][0]
    stray = delegate_prefix(w.store, w.principal("owner"), w.pid("leaf"),
                            Prefix.parse("172.16.0.0/24"), parent)
    inside = delegate_prefix(w.store, w.principal("owner"), w.pid("leaf"),
                             Prefix.parse("10.1.9.0/24"), parent)
    roots = [w.pid("IANA")]
    assert not check_own_prefix(w.ctx(stray), w.pid("leaf"), Prefix.parse("172.16.0.0/24"), roots)
    assert check_own_prefix(w.ctx(inside), w.pid("leaf"), Prefix.parse("10.1.9.0/24"), roots)


def test_covering_ownership():
    w = ownership_world(2)
    tok, _ = w.ip["owner"]
    roots = [w.pid("IANA")]
    assert check_covering_ownership(w.ctx(tok), w.pid("owner"), Prefix.parse("10.1.5.0/24"), roots)
    assert not check_covering_ownership(w.ctx(tok), w.pid("owner"), Prefix.parse("10.2.0.0/24"),
                                        roots)


def test_route_chain_authorized():
    w, tok, path, target = route_chain(3)
    dst = w.ip["owner"][1]
    assert check_authorized_route(w.ctx(tok), w.pid("owner"), dst, path, target, [w.pid("IANA")])


def test_route_chain_with_wrong_target_is_broken():
    w, tok, path, _ = route_chain(3)
    dst = w.ip["owner"][1]
    v = check_authorized_route(w.ctx(tok), w.pid("owner"), dst, path, w.pid("Y"), [w.pid("IANA")])
    assert not v and v.reason == BROKEN_CHAIN


def test_route_with_inserted_hop_is_broken():
    w, tok, path, target = route_chain(3)
    dst = w.ip["owner"][1]
    forged = path[:1] + (w.pid("M"),) + path[1:]
    assert not check_authorized_route(w.ctx(tok), w.pid("owner"), dst, forged, target,
                                      [w.pid("IANA")])


def test_origination_of_unowned_prefix():
    w = ownership_world(2)
    ip_tok, _ = w.ip["owner"]
    other = Prefix.parse("10.9.0.0/16")
    tok = originate_route(w.store, w.principal("owner"), other, w.pid("N1"), ip_tok)
    tok = sign_route_hop(w.store, w.principal("N1"), other, (w.pid("N1"), w.pid("owner")),
                         w.pid("X"), tok)
    v = check_authorized_route(w.ctx(tok), w.pid("owner"), other, (w.pid("N1"), w.pid("owner")),
                               w.pid("X"), [w.pid("IANA")])
    assert not v and v.reason == MISSING_OWNERSHIP


def _tagged(w, holdings):
    ta = w.principal("TA")
    toks = {}
    for nsp, names in holdings.items():
        ends = [endorse_tag(w.store, ta, w.pid(nsp), Tag(w.pid("TA"), t)) for t in names]
        toks[nsp] = publish_tag_set(w.store, w.principal(nsp), ends)
    return toks


def test_compliance_holds_and_fails_per_hop():
    w = World()
    toks = _tagged(w, {"N1": ["tag0", "tag2"], "N2": ["tag1"]})
    pol = path_policy(w, "C", "inbound", "0.0.0.0/0", "192.168.30.0/24", ["tag0"])
    ctx = w.ctx(pol.token, *toks.values())
    assert check_compliant_path(ctx, [pol], [w.pid("N1")])
    v = check_compliant_path(ctx, [pol], [w.pid("N1"), w.pid("N2")])
    assert not v and v.reason == NON_COMPLIANT_HOP and v.detail == w.pid("N2")


def test_compliance_is_a_conjunction_over_policies():
    w = World()
    toks = _tagged(w, {"N1": ["t0"], "N3": ["t0", "t1"]})
    inb = path_policy(w, "C", "inbound", "0.0.0.0/0", "10.3.0.0/24", ["t0"])
    outb = path_policy(w, "A", "outbound", "10.1.0.0/24", "0.0.0.0/0", ["t1"])
    ctx = w.ctx(inb.token, outb.token, *toks.values())
    assert check_compliant_path(ctx, [inb, outb], [w.pid("N3")])
    assert not check_compliant_path(ctx, [inb, outb], [w.pid("N1")])


def test_acl_spoken_by_someone_else_does_not_count():
    w = World()
    toks = _tagged(w, {"N1": ["t0"]})
    pol = path_policy(w, "mallory", "inbound", "0.0.0.0/0", "10.3.0.0/24", ["t0"])
    claimed = Policy(pol.kind, pol.region, pol.acl, pol.token, w.pid("C"))
    assert not check_compliant_path(w.ctx(pol.token, *toks.values()), [claimed], [w.pid("N1")])


def test_delegated_tag_within_budget():
    w = World()
    ta = w.principal("TA")
    tag = Tag(w.pid("TA"), "t0")
    d1 = endorse_tag(w.store, ta, w.pid("D1"), tag, delegate=True)
    d2 = endorse_tag(w.store, w.principal("D1"), w.pid("D2"), tag, parent=d1, delegate=True)
    leaf = endorse_tag(w.store, w.principal("D2"), w.pid("N1"), tag, parent=d2)
    pol = path_policy(w, "C", "inbound", "0.0.0.0/0", "10.3.0.0/24", ["t0"])
    ctx = w.ctx(pol.token, leaf)
    assert check_compliant_path(ctx, [pol], [w.pid("N1")], tag_depth=3)
    assert not check_compliant_path(ctx, [pol], [w.pid("N1")], tag_depth=1)


def test_undelegated_endorsement_is_ignored():
    w = World()
    tag = Tag(w.pid("TA"), "t0")
    leaf = endorse_tag(w.store, w.principal("X"), w.pid("N1"), tag)
    pol = path_policy(w, "C", "inbound", "0.0.0.0/0", "10.3.0.0/24", ["t0"])
    assert not check_compliant_path(w.ctx(pol.token, leaf), [pol], [w.pid("N1")])


def test_default_policies_admit_everyone():
    any_pol = Policy("outbound", Region.parse("0.0.0.0/0", "0.0.0.0/0"), frozenset({"any"}))
    assert check_compliant_path(World().ctx(), [any_pol], ["p1", "p2"])
    bare = Policy("outbound", any_pol.region, frozenset({("r", "t")}))
    assert not check_compliant_path(World().ctx(), [bare], ["p1"])


def test_connectivity_needs_both_sides():
    w = World()
    toks = _tagged(w, {"A": ["tag0"], "C": ["tag0"], "B": ["tag1"]})
    tag0 = Tag(w.pid("TA"), "tag0")
    ca = issue_connectivity_policy(w.store, w.principal("A"), tags=[tag0])
    cc = issue_connectivity_policy(w.store, w.principal("C"), tags=[tag0])
    cb = issue_connectivity_policy(w.store, w.principal("B"), pids=[w.pid("A")])
    ctx = w.ctx(ca, cc, cb, *toks.values())
    assert check_connectivity(ctx, w.pid("A"), w.pid("C"))
    v = check_connectivity(ctx, w.pid("B"), w.pid("A"))
    assert not v and v.reason == CONNECTIVITY_DENIED


def test_stitch_requires_secret_and_acl():
    w = World()
    toks = _tagged(w, {"N1": ["t0"]})
    tag = Tag(w.pid("TA"), "t0")
    ctx = w.ctx(*toks.values())
    assert authorize_stitch(ctx, w.pid("N1"), "s3", [tag], "s3")
    assert authorize_stitch(None, "p", "s3", ["p"], "s3")
    bad = authorize_stitch(ctx, w.pid("N1"), "nope", [tag], "s3")
    assert not bad and bad.reason == STITCH_DENIED
    assert not authorize_stitch(ctx, w.pid("N2"), "s3", [tag], "s3")
