import pytest
from hypothesis import given, strategies as st

from logpeer.aqt import Prefix
from logpeer.trustlog import (BuiltinError, DepthExceeded, LogicContext, LogicSyntaxError, Statement,
                              format_statement, parse_goal, parse_program, parse_statement, prove,
                              query)


def ctx_of(text, speaker=None, params=None):
    stmts = parse_program(text, params)
    if speaker:
        stmts = [s.with_speaker(speaker) if s.speaker is None else s for s in stmts]
    return LogicContext(stmts, local_speaker="local")


def test_list_destructuring_binds_head_and_tail():
    got = query(LogicContext(), "eq([?H|?T], [n3, n1, a])")
    assert got == [{"H": "n3", "T": ("n1", "a")}]


@pytest.mark.parametrize("goal,expected", [
    ("192.168.10.0/24 <: 192.168.0.0/16", True),
    ("10.0.0.0/8 <: 192.168.0.0/16", False),
    ("10.0.0.0/8 <: 10.0.0.0/8", True),
])
def test_prefix_containment_builtin(goal, expected):
    assert prove(LogicContext(), goal) is expected


def test_containment_needs_ground_arguments():
    with pytest.raises(BuiltinError):
        prove(LogicContext(), "?X <: 10.0.0.0/8")


def test_speaker_qualified_lookup():
    ctx = LogicContext([parse_statement("par(a, b).").with_speaker("alice"),
                        parse_statement("par(c, b).").with_speaker("bob")])
    assert query(ctx, "?S: par(?X, b)") == [{"X": "a", "S": "alice"}, {"X": "c", "S": "bob"}]
    assert query(ctx, "alice: par(?X, b)") == [{"X": "a"}]


def test_recursion_over_cycle_terminates():
    facts = "par(a, b). par(b, c). par(c, a)."
    rules = parse_program("anc(?X, ?Y) :- par(?X, ?Y). anc(?X, ?Y) :- par(?X, ?Z), anc(?Z, ?Y).")
    ctx = ctx_of(facts, "s")
    got = {b["Y"] for b in query(ctx, "anc(a, ?Y)", rules)}
    assert got == {"a", "b", "c"}


def test_depth_bound_raises():
    rules = parse_program("count(?N) :- count([?N]).")
    with pytest.raises(DepthExceeded):
        prove(LogicContext(), "count(z)", rules, max_depth=20)


def test_rules_from_untrusted_speaker_are_ignored():
    rogue = parse_statement("ownPrefix(?H, ?P) :- junk(?H).").with_speaker("mallory")
    fact = parse_statement("junk(x).").with_speaker("mallory")
    ctx = LogicContext([rogue, fact], local_speaker="local")
    assert not prove(ctx, "ownPrefix(x, 10.0.0.0/8)")
    assert prove(ctx, "ownPrefix(x, 10.0.0.0/8)", trusted_speakers={"mallory"})


def test_params_instantiate_before_use():
    rules = parse_program("own(?H, ?P) :- $Root: allocate(?H, ?P).", {"Root": "iana"})
    ctx = LogicContext([parse_statement("allocate(a, 10.0.0.0/8).").with_speaker("iana")])
    assert prove(ctx, "own(a, 10.0.0.0/8)", rules)
    ctx2 = LogicContext([parse_statement("allocate(a, 10.0.0.0/8).").with_speaker("other")])
    assert not prove(ctx2, "own(a, 10.0.0.0/8)", rules)


def test_wildcard_and_any_literals():
    st_ = parse_statement("acl(*, 10.0.0.0/8, any).")
    assert st_.head.args == (Prefix(0, 0), Prefix.parse("10.0.0.0/8"), "any")
    assert parse_statement("p([]).").head.args == ((),)


def test_syntax_error_reports_line():
    with pytest.raises(LogicSyntaxError) as exc:
        parse_program("ok(a).\nbad(a :- .")
    assert exc.value.line == 2


def test_goal_parses_as_literal():
    lit = parse_goal("?S: advertise(?D, [a], ?T)")
    assert lit.atom.pred == "advertise"


names = st.from_regex(r"[a-z][a-z0-9]{0,5}", fullmatch=True).filter(lambda s: s not in ("any",))


@given(st.lists(st.tuples(names, names), max_size=6), names)
def test_format_parse_round_trip(pairs, pred):
    for a, b in pairs:
        s = Statement("spk", parse_statement(f"{pred}({a}, [{b}], 1.2.3.0/24).").head)
        again = parse_statement(format_statement(s))
        assert again.head == s.head
        assert again.speaker == s.speaker
