"""
analysis のテスト
- 基本ブロックへの分割
- 可視変数と must-initialization
- 手続き間の制御・データ依存
"""
import pytest

from analysis import ROOT, analyze, executes_before, exit_of, visibly_precedes
from conftest import REPLICA
from errors import UnknownScope
from minilang import parse_program, parse_sources

FLOW = """\
class Flow {
    String name;
    String unset;

    public static void main(String[] args) {
        Flow f = new Flow();
        f.a();
        f.b();
    }

    void a() {
        name = "x";
    }

    void b() {
        String copy = name;
        String local = "x";
        int n = 0;
    }

    void orphan() {
        int z = 1;
    }

    void empty() {
    }

    void branches(int k) {
        String s;
        if (k > 0) {
            s = "pos";
        } else {
            k = 0;
        }
        String after = "done";
    }
}
"""


@pytest.fixture(scope="module")
def flow():
    return analyze(parse_sources({"Flow.mj": FLOW}))


def _vars(analysis, location):
    return {v.name: v for v in analysis.visible_vars(location)}


def _end_of(analysis, method):
    top = [b for b in analysis.method_blocks(method) if b.block_path == ()]
    return analysis.location(top[-1].scope_id, top[-1].max_offset)


# ====================
# 基本ブロック
# ====================

def test_straight_line_method_is_one_block(flow):
    blocks = flow.method_blocks("Flow.b")
    assert len(blocks) == 1
    assert blocks[0].size == 3


def test_if_else_splits_blocks(flow):
    blocks = flow.method_blocks("Flow.branches")
    assert len(blocks) >= 3
    paths = {b.block_path for b in blocks}
    assert ((1, "then"),) in paths and ((1, "else"),) in paths


def test_empty_body_is_one_empty_block(flow):
    blocks = flow.method_blocks("Flow.empty")
    assert len(blocks) == 1
    assert blocks[0].size == 0


def test_call_statements_end_blocks(flow):
    blocks = flow.method_blocks("Flow.main")
    assert [b.terminator for b in blocks] == ["call", "call", None]
    assert [(b.start, b.stop) for b in blocks] == [(0, 2), (2, 3), (3, 3)]


# ====================
# 可視変数
# ====================

def test_unassigned_field_is_not_initialized(flow):
    found = _vars(flow, _end_of(flow, "Flow.b"))
    assert found["unset"].must_initialized is False
    assert found["unset"].origin_kind == "field"


def test_field_written_on_every_path_before(flow):
    found = _vars(flow, _end_of(flow, "Flow.b"))
    assert found["name"].must_initialized is True
    assert found["name"].type_name == "java.lang.String"


def test_local_with_initializer(flow):
    loc = flow.location_at("Flow.b", (), 2)
    found = _vars(flow, loc)
    assert found["local"].must_initialized is True
    assert "n" not in found


def test_assigned_in_one_branch_only(flow):
    found = _vars(flow, _end_of(flow, "Flow.branches"))
    assert found["s"].must_initialized is False
    assert found["after"].must_initialized is True
    assert found["k"].origin_kind == "parameter"


def test_static_method_sees_no_instance_fields(flow):
    found = _vars(flow, _end_of(flow, "Flow.main"))
    assert "name" not in found
    assert found["f"].type_name == "Flow"


def test_uncalled_method_sees_fields_uninitialized(flow):
    found = _vars(flow, _end_of(flow, "Flow.orphan"))
    assert found["name"].must_initialized is False


# ====================
# 依存グラフ
# ====================

def test_call_order_in_control_graph(flow):
    control = flow.control
    assert control.has_edge("Flow.main#b0", "Flow.a#b0")
    assert control.has_edge(exit_of("Flow.a"), "Flow.main#b1")
    assert control.has_edge("Flow.main#b1", "Flow.b#b0")
    assert control.has_edge(exit_of("Flow.b"), "Flow.main#b2")
    assert flow.executes_before("Flow.a#b0", "Flow.b#b0")
    assert not flow.executes_before("Flow.b#b0", "Flow.a#b0")


def test_field_def_use_edge(flow):
    assert ("Flow.a#b0", "Flow.b#b0", "java.lang.String") in flow.data_edges


def test_uncalled_method_is_isolated(flow):
    entry = flow.entry_of("Flow.orphan")
    assert list(flow.control.predecessors(entry)) == []
    assert not flow.executes_before("Flow.main#b0", entry)
    assert not flow.executes_before(entry, "Flow.b#b0")


def test_executes_before_is_reflexive(flow):
    assert flow.executes_before("Flow.b#b0", "Flow.b#b0")
    assert executes_before(flow.graph, "Flow.orphan#b0", "Flow.orphan#b0")


def test_unknown_scope(flow):
    with pytest.raises(UnknownScope):
        flow.executes_before("Flow.nope#b0", "Flow.b#b0")


def test_entries_and_dominators(flow):
    assert flow.entries == {"Flow.main"}
    assert flow.dominates("Flow.main#b0", "Flow.b#b0")
    assert flow.dominates(ROOT, "Flow.a#b0")
    assert not flow.dominates("Flow.main#b0", "Flow.orphan#b0")


def test_visibly_precedes():
    assert visibly_precedes((), 1, (), 1)
    assert visibly_precedes((), 1, ((2, "then"),), 0)
    assert not visibly_precedes((), 3, ((2, "then"),), 0)
    assert not visibly_precedes(((0, "then"),), 0, (), 5)


def test_listing_is_deterministic(flow):
    lines = flow.listing()
    assert lines == analyze(parse_sources({"Flow.mj": FLOW})).listing()
    assert "node Flow.main#b0 method=Flow.main stmts=0-2 term=call" in lines
    assert "edge Flow.a#b0 Flow.b#b0 kind=data type=java.lang.String" in lines


# ====================
# 値の流れ
# ====================

def test_return_value_reaches_field():
    analysis = analyze(parse_program(REPLICA / "task01"))
    flow = analysis.value_flow
    assert flow.flows(("ret", "JaasImplementor.initializeLC"), ("field", "JaasImplementor", "lc"))
    assert not flow.flows(("ret", "JaasImplementor.initializeLC"), ("field", "JaasImplementor", "moduleName"))


def test_argument_flows_into_parameter():
    analysis = analyze(parse_program(REPLICA / "task08"))
    flow = analysis.value_flow
    ret = ("ret", "JaasImplementor.initializeLC")
    assert flow.flows(ret, ("var", "JaasImplementor.main", "lc"))
    assert flow.flows(ret, ("var", "JaasImplementor.login", "context"))
    assert flow.flows(ret, ("var", "JaasImplementor.inspectSubject", "context"))


def test_nested_static_class_fields():
    analysis = analyze(parse_program(REPLICA / "task03"))
    login = "JaasImplementor.Authenticator.login"
    found = _vars(analysis, _end_of(analysis, login))
    assert found["lc"].origin_kind == "staticField"
    assert found["lc"].must_initialized is True
    assert analysis.callers(login) == {"JaasImplementor.main"}


def test_uninitialized_globals():
    analysis = analyze(parse_program(REPLICA / "task05"))
    found = _vars(analysis, _end_of(analysis, "JaasImplementor.initializeLC"))
    assert found["moduleName"].must_initialized is True
    assert found["realm"].must_initialized is False
    assert found["previous"].must_initialized is False
