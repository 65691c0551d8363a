import pytest

from logpeer.cli import main


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_run_prints_matrix_and_audits(capsys):
    rc, out, _ = run(capsys, "run", "e2", "--audit")
    assert rc == 0
    assert "B->C 3:<S1,N2,N4,S2> 4:<S1,N2,N4,S2> 5:<S1,N2,S2> 6:<S1,N1,N3,S2>" in out
    assert "audit: ok" in out


def test_run_state_dump(capsys):
    rc, out, _ = run(capsys, "run", "e1", "--state")
    assert rc == 0 and "nsp N1" in out and "forward" in out


def test_trace_delivered(capsys):
    rc, out, _ = run(capsys, "trace", "e1", "--src", "192.168.10.5", "--dst", "192.168.30.7")
    assert rc == 0 and out.strip() == "S1 N1 S2"


def test_trace_blocked(capsys):
    rc, out, _ = run(capsys, "trace", "e1", "--src", "192.168.10.5", "--dst", "192.168.20.7")
    assert rc == 1 and "connectivity" in out


def test_trace_partial_run(capsys):
    rc, out, _ = run(capsys, "trace", "e2", "--through-step", "5",
                     "--src", "192.168.20.5", "--dst", "192.168.30.5")
    assert rc == 0 and out.strip() == "S1 N2 S2"


def test_dump_flows_nonzero(capsys):
    rc, out, _ = run(capsys, "dump-flows", "e1", "--node", "N2", "--nonzero")
    assert rc == 0
    assert out.splitlines() == ["n_packets=1, nw_dst=192.168.20.0/24, action=output:S1",
                                "n_packets=1, nw_dst=192.168.40.0/24, action=output:S2"]


@pytest.mark.parametrize("argv", [
    ("dump-flows", "e1", "--node", "N9"),
    ("run", "nope"),
    ("run", "e1", "--through-step", "9"),
])
def test_usage_errors(capsys, argv):
    rc, _, err = run(capsys, *argv)
    assert rc == 2 and err.startswith("logpeer:")


def test_bad_address_is_an_argparse_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["trace", "e1", "--src", "1.2.3", "--dst", "1.2.3.4"])
    assert exc.value.code == 2


def test_bench_commands(capsys):
    rc, out, _ = run(capsys, "bench", "authz", "--nsps", "6", "--path-len", "2", "--depth", "1",
                     "--routes", "2", "--rounds", "1", "--suite", "pbr1")
    assert rc == 0 and out.splitlines()[0] == "suite,path_len,throughput"
    assert out.splitlines()[1].startswith("pbr1,2,")
    rc, out, _ = run(capsys, "bench", "aqt", "--n", "200", "--queries", "10")
    assert rc == 0 and "aqt,200,insert," in out
