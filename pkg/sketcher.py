"""
sketcher.py - クラスタを SSA 形式のスケッチ（型付きの穴つき）に変換
=====================================================
【設計意図】
- クラスタ内の API 呼び出しを依存の位相順（同順位はノード ID 昇順）に 1 文ずつ並べる
- クラスタ内のデータエッジは一時変数 t1, t2, ... の定義・使用で表す
- 埋まらなかったレシーバ・引数は穴（?<id>:<型>）になる
  穴 ID は 1 回の合成タスク全体で一意
- インタフェース型のコンストラクタは FSpec の alias で指定された具象型を使う
=====================================================
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Union

import networkx as nx

from errors import AbstractTypeError, CyclicClusterError
from fspec import ARGUMENT, TARGET, fill_positions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Temp:
    name: str


@dataclass(frozen=True)
class HoleRef:
    hole_id: int


SlotValue = Union[Temp, HoleRef]


@dataclass(frozen=True)
class Hole:
    hole_id: int
    type_name: str
    site: tuple         # (文インデックス, スロット位置 0=レシーバ / i+1=第 i 引数)
    role: str
    node_id: int
    cluster_id: int


@dataclass(frozen=True)
class SketchStatement:
    result: Optional[Temp]
    api_node_id: int
    target: Optional[SlotValue]
    args: tuple
    concrete_type: Optional[str] = None


@dataclass(frozen=True)
class Sketch:
    cluster_id: int
    label: str
    statements: tuple
    holes: tuple

    def hole_at(self, node_id, position):
        for hole in self.holes:
            if hole.node_id == node_id and hole.site[1] == position:
                return hole
        return None

    def temp_of(self, node_id):
        for stmt in self.statements:
            if stmt.api_node_id == node_id:
                return stmt.result
        return None

    @property
    def temps(self):
        return tuple(s.result for s in self.statements if s.result is not None)


def generate_sketch(cluster, fspec, hole_ids=None):
    """hole_ids: 合成タスクで共有する穴 ID の採番器"""
    hole_ids = hole_ids if hole_ids is not None else itertools.count(1)
    graph = nx.DiGraph()
    graph.add_nodes_from(cluster.member_ids)
    graph.add_edges_from((e.src, e.dst) for e in cluster.internal_edges)
    if not nx.is_directed_acyclic_graph(graph):
        raise CyclicClusterError(cluster.id)
    order = list(nx.lexicographical_topological_sort(graph))

    filled, _ = fill_positions(fspec, cluster.member_ids, cluster.internal_edges)
    temps = {}
    statements = []
    holes = []
    for index, node_id in enumerate(order):
        node = fspec.node(node_id)

        def value(position, type_name, role):
            producer = filled.get((node_id, position))
            if producer is not None:
                return temps[producer]
            hole = Hole(next(hole_ids), fspec.canonical(type_name), (index, position), role, node_id, cluster.id)
            holes.append(hole)
            return HoleRef(hole.hole_id)

        target = value(0, node.owner_type, TARGET) if node.is_instance else None
        args = tuple(value(i + 1, t, ARGUMENT) for i, t in enumerate(node.param_types))
        concrete = None
        if node.is_constructor:
            concrete = fspec.concrete_type(node.owner_type)
            if concrete is None:
                raise AbstractTypeError(node.owner_type)
        result = None
        if node.produced_type is not None:
            result = Temp(f"t{len(temps) + 1}")
            temps[node_id] = result
        statements.append(SketchStatement(result, node_id, target, args, concrete))

    return Sketch(cluster.id, cluster.label, tuple(statements), tuple(holes))


def generate_sketches(branch, fspec):
    hole_ids = itertools.count(1)
    sketches = [generate_sketch(cluster, fspec, hole_ids) for cluster in branch.clusters]
    logger.info(f"sketched {len(sketches)} clusters with "
                f"{sum(len(s.holes) for s in sketches)} holes")
    return sketches


def _render_value(value, sketch):
    if isinstance(value, Temp):
        return value.name
    hole = next(h for h in sketch.holes if h.hole_id == value.hole_id)
    return f"?{hole.hole_id}:{hole.type_name}"


def render_statement(stmt, sketch, fspec):
    node = fspec.node(stmt.api_node_id)
    args = ", ".join(_render_value(a, sketch) for a in stmt.args)
    if node.is_constructor:
        call = f"new {stmt.concrete_type}({args})"
    elif node.is_instance:
        call = f"{_render_value(stmt.target, sketch)}.{node.member_name}({args})"
    else:
        call = f"{node.owner_type}.{node.member_name}({args})"
    return f"{stmt.result.name} = {call}" if stmt.result is not None else call


def render_sketch(sketch, fspec):
    lines = [f"sketch {sketch.cluster_id} {sketch.label}"]
    lines += [f"    {render_statement(stmt, sketch, fspec)}" for stmt in sketch.statements]
    return lines
