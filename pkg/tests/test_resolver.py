"""
resolver のテスト
- 候補の並び順
- 選択の最小性（総当たりと比較）
"""
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from analysis import VarInfo, analyze
from errors import Unsatisfiable
from minilang import parse_sources
from resolver import (
    CandidateList, build_candidates, build_problem, render_problem, render_resolution,
    resolve, solve_selection,
)
from sketcher import Hole


def var(name, type_name="T", kind="local", line=0):
    return VarInfo(name, type_name, kind, ("m#b0", 0), True, "m", line, ())


def problem_of(*lists):
    return build_problem([CandidateList(i, "T", tuple(c)) for i, c in enumerate(lists, start=1)])


def test_disjoint_singletons():
    a, b = var("a"), var("b")
    result = resolve(problem_of([a], [b]))
    assert result.distinct_count == 2
    assert result.name_of(1) == "a" and result.name_of(2) == "b"


def test_shared_variable_wins():
    a, v, b = var("a"), var("v"), var("b")
    problem = problem_of([a, v], [v, b])
    selection = solve_selection(problem)
    assert {problem.variable(lit).name for lit in selection} == {"v"}
    result = resolve(problem, selection)
    assert result.distinct_count == 1
    assert result.name_of(1) == "v" and result.name_of(2) == "v"


def test_rank_one_when_no_sharing():
    a, a2, b = var("a"), var("a2"), var("b")
    result = resolve(problem_of([a, a2], [b]))
    assert result.name_of(1) == "a"


def test_empty_list_is_unsatisfiable():
    with pytest.raises(Unsatisfiable) as info:
        solve_selection(problem_of([var("a")], [], [var("b")]))
    assert info.value.empty_holes == (2,)


def test_render():
    a, v = var("a"), var("v")
    problem = problem_of([a, v], [v])
    lines = render_problem(problem)
    assert "var h1_0 = a (local T)" in lines
    assert "clause h1: h1_0 | h1_1" in lines
    assert "equiv h1_1 = h2_0" in lines
    assert render_resolution(resolve(problem)) == ["assign ?1 = v", "assign ?2 = v", "distinct 1"]


POOLS = {
    "java.lang.String": [var(n, "java.lang.String") for n in "abcd"],
    "javax.security.auth.login.LoginContext": [var(n, "javax.security.auth.login.LoginContext") for n in "efg"],
    "int": [var(n, "int") for n in "hi"],
}

hole_lists = st.sampled_from(sorted(POOLS)).flatmap(
    lambda t: st.tuples(st.just(t), st.lists(st.sampled_from(POOLS[t]), min_size=1, max_size=4, unique=True)))


@settings(max_examples=200, deadline=None)
@given(st.lists(hole_lists, min_size=1, max_size=4))
def test_selection_is_minimal(holes):
    problem = build_problem([CandidateList(i, t, tuple(c)) for i, (t, c) in enumerate(holes, start=1)])
    result = resolve(problem)
    best = min(len(set(choice)) for choice in itertools.product(*[c for _, c in holes]))
    assert result.distinct_count == best
    for cl in problem.holes:
        chosen = result.assignment[cl.hole_id]
        assert chosen in cl.candidates
        assert chosen.type_name == cl.type_name


# ====================
# 候補の生成
# ====================

NEAR = """\
class M {
    String unset;

    void run(String moduleName) {
        String far = "a";
        int x = 1;
        String near = "b";
        x = 2;
    }
}
"""


def test_candidates_nearest_first():
    analysis = analyze(parse_sources({"M.mj": NEAR}))
    location = analysis.location_at("M.run", (), 4)
    hole = Hole(1, "java.lang.String", (0, 1), "argument", 1, 1)
    [cl] = build_candidates([(hole, location)], analysis)
    assert [v.name for v in cl.candidates] == ["near", "far", "moduleName"]


def test_no_variable_of_type():
    analysis = analyze(parse_sources({"M.mj": NEAR}))
    location = analysis.location_at("M.run", (), 4)
    hole = Hole(1, "java.util.Set", (0, 0), "target", 1, 1)
    [cl] = build_candidates([(hole, location)], analysis)
    assert cl.candidates == ()


def test_field_carried_from_init(task01):
    analysis = analyze(task01)
    location = analysis.location_at("JaasImplementor.login", (), 1)
    hole = Hole(2, "javax.security.auth.login.LoginContext", (0, 0), "target", 3, 2)
    [cl] = build_candidates([(hole, location)], analysis)
    assert [v.name for v in cl.candidates] == ["lc"]
