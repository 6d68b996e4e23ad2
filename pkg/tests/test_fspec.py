"""
fspec のテスト
- 編集距離（性質テストは再帰の素朴な実装と比較）
- FSpec の読み書きと検証
- ブランチ列挙・クラスタリング・スロット
"""
from functools import lru_cache

import pytest
from hypothesis import given, settings, strategies as st

from errors import CycleError, DanglingEdgeError, FormatError, MissingAnnotation, UnreadableFile
from fspec import (
    ApiNode, cluster_nodes, enumerate_branches, levenshtein, parse_fspec,
    cluster_branch, render_branch, render_fspec, save_fspec, load_fspec,
)


def naive_levenshtein(a, b):
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


short = st.text(alphabet="abcAB_", max_size=12)


# ====================
# 編集距離
# ====================

@pytest.mark.parametrize("a, b, expected", [
    ("", "abc", 3),
    ("Initialization", "initializeLC", 6),
    ("kitten", "sitting", 3),
    ("login", "login", 0),
    ("Login", "login", 1),
])
def test_levenshtein_examples(a, b, expected):
    assert levenshtein(a, b) == expected


@settings(max_examples=1000, deadline=None)
@given(short, short)
def test_levenshtein_matches_recursive_definition(a, b):
    assert levenshtein(a, b) == naive_levenshtein(a, b)


@given(short, short, short)
def test_levenshtein_is_a_metric(a, b, c):
    assert levenshtein(a, b) == levenshtein(b, a)
    assert (levenshtein(a, b) == 0) == (a == b)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


# ====================
# 読み込み・検証
# ====================

LINEAR = """\
fspec linear
node 1 kind=constructor class=p.A method=<init> params=- annotation=#Make
node 2 kind=instance class=p.A method=run params=- return=void annotation=#Run
edge 1 2 kind=data freq=3
start 1
end 2
"""

DIAMOND = """\
fspec diamond
node 1 kind=static class=p.U method=a params=- return=void annotation=#a
node 2 kind=static class=p.U method=b params=- return=void annotation=#b
node 3 kind=static class=p.U method=c params=- return=void annotation=#c
node 4 kind=static class=p.U method=d params=- return=void annotation=#d
edge 1 2 kind=control freq=1
edge 1 3 kind=control freq=5
edge 2 4 kind=control freq=1
edge 3 4 kind=control freq=5
start 1
end 4
"""


def test_bundled_fspec(jaas_fspec):
    assert jaas_fspec.name == "jaas"
    assert len(jaas_fspec.nodes) >= 5
    assert jaas_fspec.concrete_type("javax.security.auth.callback.CallbackHandler") == \
        "com.sun.security.auth.callback.TextCallbackHandler"
    assert jaas_fspec.same_type("com.sun.security.auth.callback.TextCallbackHandler",
                                "javax.security.auth.callback.CallbackHandler")


def test_dangling_edge():
    text = LINEAR.replace("edge 1 2", "edge 1 9")
    with pytest.raises(DanglingEdgeError):
        parse_fspec(text)


def test_cycle_rejected():
    text = LINEAR.replace("end 2", "edge 2 1 kind=control freq=1\nend 2")
    with pytest.raises(CycleError):
        parse_fspec(text)


@pytest.mark.parametrize("bad, line", [
    ("edge 1 2 kind=sideways freq=3", 4),
    ("edge 1 2 kind=data freq=0", 4),
    ("edge 1 2 kind=data freq=x", 4),
])
def test_bad_edge_records(bad, line):
    with pytest.raises(FormatError) as info:
        parse_fspec(LINEAR.replace("edge 1 2 kind=data freq=3", bad))
    assert info.value.line == line


def test_unknown_record():
    with pytest.raises(FormatError):
        parse_fspec(LINEAR + "widget 3\n")


def test_save_load_round_trip(jaas_fspec, tmp_path):
    path = tmp_path / "copy.fspec"
    save_fspec(jaas_fspec, path)
    assert load_fspec(path) == jaas_fspec
    assert render_fspec(parse_fspec(render_fspec(jaas_fspec))) == render_fspec(jaas_fspec)


def test_unreadable_fspec(tmp_path):
    with pytest.raises(UnreadableFile) as e:
        load_fspec(tmp_path / "nope.fspec")
    assert e.value.exit_code == 1

    binary = tmp_path / "binary.fspec"
    binary.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(UnreadableFile):
        load_fspec(binary)


# ====================
# ブランチ
# ====================

def test_two_branches_heavier_first(jaas_fspec):
    branches = enumerate_branches(jaas_fspec)
    assert [b.node_ids for b in branches] == [(1, 2, 3, 4, 5), (6, 3, 4, 5)]
    assert [b.weight for b in branches] == [44, 24]
    assert [b.index for b in branches] == [1, 2]


def test_linear_chain_one_branch():
    branches = enumerate_branches(parse_fspec(LINEAR))
    assert len(branches) == 1
    assert branches[0].node_ids == (1, 2)


def test_diamond_two_branches():
    branches = enumerate_branches(parse_fspec(DIAMOND))
    assert [b.node_ids for b in branches] == [(1, 3, 4), (1, 2, 4)]


def test_branch_keeps_shortcut_edges(jaas_branch):
    kinds = {(e.src, e.dst): e.kind for e in jaas_branch.edges}
    assert kinds[(2, 4)] == "data"
    assert kinds[(3, 4)] == "control"


# ====================
# クラスタリング
# ====================

def _node(node_id, label):
    return ApiNode(node_id, "p.T", f"m{node_id}", "staticMethod", (), "void", label)


def test_initialize_pair_clusters():
    nodes = [_node(1, "initializeCallback"), _node(2, "initializeContext"),
             _node(3, "login"), _node(4, "inspectSubject")]
    clustering = cluster_nodes(nodes, tau=7)
    assert clustering.groups == ((1, 2), (3,), (4,))
    # 根まで併合を続ける
    assert len(clustering.merges) == 2
    assert clustering.merges[0].distance > 7


def test_tau_stops_merging():
    nodes = [_node(1, "initializeCallback"), _node(2, "initializeContext"), _node(3, "login")]
    assert cluster_nodes(nodes, tau=3).groups == ((1,), (2,), (3,))


def test_single_node_branch():
    clustering = cluster_nodes([_node(7, "#Only")])
    assert clustering.groups == ((7,),)
    assert clustering.merges == ()


TRIPLE = """\
fspec triple
node 1 kind=static class=p.U method=a params=- return=void annotation=#Initialization
node 2 kind=static class=p.U method=b params=- return=void annotation=#Initialization
node 3 kind=static class=p.U method=c params=- return=void annotation=#Initialization
edge 1 2 kind=control freq=1
edge 2 3 kind=control freq=1
start 1
end 3
"""


def test_leaf_clusters_drive_synthesis():
    fspec = parse_fspec(TRIPLE)
    clusters, clustering = cluster_branch(fspec, (1, 2, 3))
    assert clustering.greedy_groups == ((1, 2), (3,))
    # 併合後の分割は確認用で、合成の単位は葉のまま
    assert clustering.groups == ((1, 2, 3),)
    assert [c.member_ids for c in clusters] == [(1, 2), (3,)]
    assert [c.label for c in clusters] == ["#Initialization", "#Initialization"]


def test_missing_annotation():
    with pytest.raises(MissingAnnotation):
        cluster_nodes([_node(1, None)], fallback=False)
    clustering = cluster_nodes([ApiNode(1, "p.T", "getSubject", "instanceMethod")])
    assert clustering.labels[1] == "get_Subject"


def test_jaas_clusters(jaas_branch):
    labels = [(c.label, c.member_ids) for c in jaas_branch.clusters]
    assert labels == [("#Initialization", (1, 2)), ("#Logging_In", (3,)), ("#Subject_Inspection", (4, 5))]


def test_initialization_slot_is_string(jaas_branch):
    init = jaas_branch.cluster(1)
    assert [(s.type_name, s.role) for s in init.slots] == [("java.lang.String", "argument")]


def test_feeds_fill_login_context_targets(jaas_branch):
    feeds = [(f.src_cluster, f.dst_cluster, f.slot.node_id, f.slot.role) for f in jaas_branch.feeds]
    assert feeds == [(1, 2, 3, "target"), (1, 3, 4, "target")]


def test_render_branch(jaas_branch, jaas_fspec):
    lines = render_branch(jaas_branch, jaas_fspec)
    assert lines[0] == "branch 1 weight=44 nodes=1-2-3-4-5"
    assert "cluster 1 label=#Initialization members=1,2 slots=java.lang.String:argument" in lines
