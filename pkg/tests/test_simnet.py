import dataclasses
import json
import re

import pytest

from logpeer.simnet import BusLivelock, Network, ScenarioError, load_scenario, scenario_from_dict
from logpeer.simnet.scenario import bundled_names

A, B, C, D = "192.168.10.0/24", "192.168.20.0/24", "192.168.30.0/24", "192.168.40.0/24"


def counters(net, node):
    """{(src or None, dst): n_packets} from the nonzero dump."""
    out = {}
    for line in net.dump_flows(node, nonzero=True).splitlines():
        n = int(re.search(r"n_packets=(\d+)", line).group(1))
        src = re.search(r"nw_src=([\d./]+)", line)
        dst = re.search(r"nw_dst=([\d./]+)", line).group(1)
        out[(src.group(1) if src else None, dst)] = n
    return out


def test_bundled_scenarios_listed():
    assert {"e1", "e2"} <= set(bundled_names())


def test_e1_paths(e1_net):
    cells = e1_net.matrix_cells()
    assert cells[("A", "C", 3)] == ("S1", "N1", "S2")
    assert cells[("B", "D", 3)] == ("S1", "N2", "S2")


def test_e1_flow_counters(e1_net):
    assert counters(e1_net, "N1") == {(None, A): 1, (None, C): 1}
    assert counters(e1_net, "N2") == {(None, B): 1, (None, D): 1}


def test_e1_tag_separation_blocks_cross_traffic(e1_net):
    t = e1_net.trace("192.168.10.5", "192.168.20.5")
    assert not t.delivered


E2_MATRIX = {
    ("A", "C"): {3: "S1 N1 N3 S2", 4: "S1 N1 N3 S2", 5: "S1 N1 N3 S2", 6: "S1 N1 N3 S2"},
    ("A", "D"): {3: None, 4: "S1 N1 N4 S2", 5: "S1 N1 N4 S2", 6: "S1 N1 N4 S2"},
    ("B", "C"): {3: "S1 N2 N4 S2", 4: "S1 N2 N4 S2", 5: "S1 N2 S2", 6: "S1 N1 N3 S2"},
    ("B", "D"): {3: None, 4: "S1 N2 N4 S2", 5: "S1 N2 S2", 6: "S1 N2 S2"},
}


@pytest.mark.parametrize("pair", sorted(E2_MATRIX))
def test_e2_matrix(e2_net, pair):
    cells = e2_net.matrix_cells()
    for step, want in E2_MATRIX[pair].items():
        fwd = cells[pair + (step,)]
        back = cells[pair[::-1] + (step,)]
        if want is None:
            assert fwd is None and back is None
        else:
            assert " ".join(fwd) == want
            assert " ".join(reversed(back)) == want


def test_e2_flow_counters(e2_net):
    assert counters(e2_net, "N1") == {(A, C): 4, (C, A): 4, (D, A): 3, (A, D): 3, (B, C): 1,
                                       (C, B): 1}
    assert counters(e2_net, "N2") == {(D, B): 3, (B, D): 3, (None, B): 3, (None, C): 3}
    assert counters(e2_net, "N3") == {(A, C): 4, (C, A): 4, (C, B): 1, (B, C): 1}
    assert counters(e2_net, "N4") == {(D, A): 3, (D, B): 1, (B, D): 1, (A, D): 3, (None, B): 2,
                                       (None, C): 2}


@pytest.mark.parametrize("through,b_to_c", [(4, "S1 N2 N4 S2"), (5, "S1 N2 S2"),
                                            (6, "S1 N1 N3 S2")])
def test_partial_runs_route_like_the_full_run(through, b_to_c):
    net = Network(load_scenario("e2")).run(through)
    t = net.trace(net.subnets["B"].host, net.subnets["C"].host)
    assert " ".join(net.names[h] for h in t.nsp_hops()) == b_to_c


def test_run_past_last_step_is_an_error():
    with pytest.raises(ScenarioError):
        Network(load_scenario("e1")).run(99)


def test_runs_are_deterministic():
    outs = []
    for _ in range(2):
        net = Network(load_scenario("e2")).run()
        outs.append((net.path_matrix(), net.state_text(),
                     "\n".join(net.dump_flows(n) for n in sorted(net.controllers))))
    assert outs[0] == outs[1]


def test_message_budget_turns_into_livelock_error():
    sc = dataclasses.replace(load_scenario("e2"), message_budget=3)
    with pytest.raises(BusLivelock):
        Network(sc).run()


def _e1_dict():
    from importlib import resources
    return json.loads(resources.files("logpeer.simnet").joinpath("scenarios/e1.json").read_text())


def test_overlapping_subnet_prefixes_rejected():
    data = _e1_dict()
    for p in data["prefixes"]:
        if p["holder"] == "B":
            p["prefix"] = "192.168.10.0/24"
    for p in data["principals"]:
        if p["name"] == "B":
            p["prefix"] = "192.168.10.0/24"
    with pytest.raises(ScenarioError, match="overlap"):
        scenario_from_dict(data)


def test_unknown_key_rejected():
    data = _e1_dict()
    data["bogus"] = 1
    with pytest.raises(ScenarioError, match="bogus"):
        scenario_from_dict(data)


def test_json_error_reports_position(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{\n  "name": "x",\n  oops\n}')
    with pytest.raises(ScenarioError, match=r"broken.json:3:3"):
        load_scenario(str(bad))


def test_missing_scenario():
    with pytest.raises(FileNotFoundError):
        load_scenario("no-such-scenario")


def test_scenarios_found_via_environment(tmp_path, monkeypatch):
    (tmp_path / "mine.json").write_text(json.dumps(_e1_dict()))
    monkeypatch.setenv("LOGPEER_SCENARIOS", str(tmp_path))
    assert load_scenario("mine").name in ("e1", "mine")
