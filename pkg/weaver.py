"""
weaver.py - 解決済みスケッチを対象プログラムに織り込む
=====================================================
【設計意図】
- 元プログラムは変更しない。毎回新しい MiniProgram を作って返す
- クラスタ間で値を渡す経路（チャネル）は次の順に試す
    1. localTemp     : 同じメソッドで、生産側の一時変数が消費側から見える
    2. returnValue   : 生産側メソッドの戻り値が、消費側で見える変数に届く
                       （呼び出し文を `T ip_<型>_k = 呼び出し;` に書き換える場合もある）
    3. existingField : 両端から見える既存フィールドに代入して受け渡す
    4. freshField    : 同じトップレベルクラスに private フィールドを追加する
- 挿入した最初の文には `// ipweave: <ラベル> [cluster <id>]` のコメントを付ける
- 挿入は文書順で後ろの位置から行い、前の位置のインデックスをずらさない
=====================================================
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import networkx as nx

from analysis import VarInfo, iter_statements, visibly_precedes
from errors import ChannelFailure, IpweaveError, WeaveConflict
from minilang import (
    Assign, BlockPosition, Call, CallStmt, ExprStmt, FieldAccess, FieldDecl,
    Literal, LocalDecl, Name, New, Return,
    add_field, emit_program, insert_statements, parse_sources, replace_statement,
)
from sketcher import Temp

logger = logging.getLogger(__name__)

MARKER = "// ipweave:"
TEMP_PREFIX = "ip_v"
MECHANISMS = ("localTemp", "returnValue", "existingField", "freshField")
_BRANCH_RANK = {"then": 0, "body": 0, "else": 1}


def simple_name(type_name):
    return type_name.rsplit(".", 1)[-1].replace("[]", "Array")


# ============================================================
# チャネル計画
# ============================================================

def patchable_return(program, method_qname):
    """最後の文だけが return（値は名前かリテラル）のメソッドなら、その位置"""
    method = program.methods[method_qname]
    body = method.body.statements
    if not body or not isinstance(body[-1], Return) or not isinstance(body[-1].value, (Name, Literal)):
        return None
    returns = [(path, i) for path, i, s in iter_statements(method.body) if isinstance(s, Return)]
    if returns != [((), len(body) - 1)]:
        return None
    return BlockPosition(method_qname, (), len(body) - 1)


@dataclass(frozen=True)
class ChannelPlan:
    mechanism: str
    variable: Optional[VarInfo] = None
    call_site: Optional[object] = None
    field_owner: Optional[str] = None
    static: bool = False


class ChannelPlanner:
    """生産側ロケーション → 消費側ロケーションに型 T の値を運ぶ方法を決める（結果はメモ化）"""

    def __init__(self, analysis, canonical=None):
        self.analysis = analysis
        self.program = analysis.program
        self.canonical = canonical or (lambda t: t)
        self._memo = {}

    def plan(self, producer, consumer, type_name, skip=frozenset()):
        key = (producer, consumer, type_name, frozenset(skip))
        if key not in self._memo:
            self._memo[key] = self._plan(producer, consumer, type_name, skip)
        return self._memo[key]

    def _plan(self, producer, consumer, type_name, skip):
        rungs = (
            ("localTemp", self._local_temp),
            ("returnValue", self._return_value),
            ("existingField", self._existing_field),
            ("freshField", self._fresh_field),
        )
        for name, rung in rungs:
            if name in skip:
                continue
            found = rung(producer, consumer, type_name)
            if found is not None:
                logger.debug(f"channel {producer} -> {consumer} ({type_name}): {name}")
                return found
        return None

    def _local_temp(self, producer, consumer, type_name):
        if producer.method_qname != consumer.method_qname:
            return None
        p, c = producer.block_position, consumer.block_position
        if visibly_precedes(p.block_path, p.index, c.block_path, c.index):
            return ChannelPlan("localTemp")
        return None

    def _declared_type(self, method_qname, type_name):
        owner = self.analysis.owner_class(method_qname)
        return self.canonical(self.analysis.resolve_type(type_name, owner))

    def _return_value(self, producer, consumer, type_name):
        method_qname = producer.method_qname
        if method_qname == consumer.method_qname or producer.block_position.block_path:
            return None
        method = self.program.methods[method_qname]
        if method.return_type == "void" or self._declared_type(method_qname, method.return_type) != type_name:
            return None
        if patchable_return(self.program, method_qname) is None:
            return None

        flow = self.analysis.value_flow
        source = ("ret", method_qname)
        for var in sorted(self.analysis.visible_vars(consumer), key=lambda v: (v.is_field, v.name)):
            if var.must_initialized and self.canonical(var.type_name) == type_name \
                    and flow.flows(source, flow.var_node(var)):
                return ChannelPlan("returnValue", variable=var)

        c = consumer.block_position
        for site in self.analysis.call_sites.get(method_qname, ()):
            if site.caller != consumer.method_qname or not isinstance(site.statement, CallStmt):
                continue
            if self.analysis.resolve_call(site.caller, site.statement.call) != method_qname:
                continue
            s = site.position
            if visibly_precedes(s.block_path, s.index + 1, c.block_path, c.index):
                return ChannelPlan("returnValue", call_site=site)
        return None

    def _existing_field(self, producer, consumer, type_name):
        at_producer = {v.key: v for v in self.analysis.visible_vars(producer) if v.is_field}
        shared = [v for v in self.analysis.visible_vars(consumer)
                  if v.is_field and v.key in at_producer and self.canonical(v.type_name) == type_name]
        if not shared:
            return None
        return ChannelPlan("existingField", variable=min(shared, key=lambda v: (v.name, v.owner)))

    def _fresh_field(self, producer, consumer, type_name):
        owners = [self.analysis.owner_class(loc.method_qname) for loc in (producer, consumer)]
        tops = {self.program.top_level_class(o).qualified_name for o in owners}
        if len(tops) != 1:
            return None
        top = tops.pop()
        methods = [self.program.methods[loc.method_qname] for loc in (producer, consumer)]
        instance_of_top = all(o == top for o in owners) and not any(m.is_static for m in methods)
        return ChannelPlan("freshField", field_owner=top, static=not instance_of_top)


# ============================================================
# 織り込み計画
# ============================================================

@dataclass(frozen=True)
class ExportChannel:
    producer_cluster: int
    consumer_cluster: int
    type_name: str
    mechanism: str
    variable: str
    hole_id: Optional[int] = None


class _Namer:
    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, prefix):
        k = 1
        while f"{prefix}{k}" in self.taken:
            k += 1
        name = f"{prefix}{k}"
        self.taken.add(name)
        return name


def names_in(program):
    """プログラム中で変数名として使われている名前"""
    names = set()
    for cls in program.classes.values():
        names.update(f.name for f in cls.fields)
    for method in program.methods.values():
        names.update(p.name for p in method.params)
        names.update(s.name for _, _, s in iter_statements(method.body) if isinstance(s, LocalDecl))
    return names


@dataclass
class WeavePlan:
    program: object
    analysis: object
    fspec: object
    branch: object
    mapping_set: object
    sketches: list
    locations: dict
    temp_names: dict = field(default_factory=dict)
    restrictions: dict = field(default_factory=dict)
    channels: list = field(default_factory=list)
    return_patches: dict = field(default_factory=dict)
    conversions: dict = field(default_factory=dict)
    handoffs: dict = field(default_factory=dict)
    fresh_fields: dict = field(default_factory=dict)

    def sketch(self, cluster_id):
        return next(s for s in self.sketches if s.cluster_id == cluster_id)

    def placed_holes(self):
        return [(hole, self.locations[s.cluster_id]) for s in self.sketches for hole in s.holes]


def prepare_weave(program, analysis, fspec, branch, mapping_set, sketches, planner=None):
    """一時変数の名前とクラスタ間チャネルを決め、穴の候補制限を作る"""
    planner = planner or ChannelPlanner(analysis, fspec.canonical)
    locations = {m.cluster_id: m.location for m in mapping_set.mappings}
    plan = WeavePlan(program, analysis, fspec, branch, mapping_set, list(sketches), locations)
    namer = _Namer(names_in(program))
    for sketch in sketches:
        for temp in sketch.temps:
            plan.temp_names[(sketch.cluster_id, temp.name)] = namer.fresh(TEMP_PREFIX)

    for feed in branch.feeds:
        if feed.slot is None:
            continue
        producer, consumer = locations[feed.src_cluster], locations[feed.dst_cluster]
        temp = plan.sketch(feed.src_cluster).temp_of(feed.edge.src)
        temp_var = plan.temp_names[(feed.src_cluster, temp.name)]
        hole = plan.sketch(feed.dst_cluster).hole_at(feed.slot.node_id, feed.slot.position)
        type_name = hole.type_name

        skip = set()
        while True:
            chosen = planner.plan(producer, consumer, type_name, frozenset(skip))
            if chosen is None:
                raise ChannelFailure(f"no channel carries {type_name} from cluster {feed.src_cluster} "
                                     f"to cluster {feed.dst_cluster}")
            patched = plan.return_patches.get(producer.method_qname, temp_var)
            if chosen.mechanism == "returnValue" and patched != temp_var:
                skip.add("returnValue")
                continue
            break

        var = _apply_channel(plan, namer, chosen, feed, producer, type_name, temp_var)
        plan.restrictions[hole.hole_id] = var
        plan.channels.append(ExportChannel(feed.src_cluster, feed.dst_cluster, type_name,
                                           chosen.mechanism, var.name, hole.hole_id))
    logger.info(f"weave plan: {len(plan.channels)} channels "
                f"({', '.join(c.mechanism for c in plan.channels) or 'none'})")
    return plan


def _handoff(plan, cluster_id, field_name, temp_var):
    stmt = Assign(Name(field_name), Name(temp_var))
    stmts = plan.handoffs.setdefault(cluster_id, [])
    if stmt not in stmts:
        stmts.append(stmt)


def _apply_channel(plan, namer, chosen, feed, producer, type_name, temp_var):
    if chosen.mechanism == "localTemp":
        return VarInfo(temp_var, type_name, "local", (producer.scope_id, producer.statement_index),
                       True, producer.method_qname)

    if chosen.mechanism == "returnValue":
        plan.return_patches[producer.method_qname] = temp_var
        if chosen.variable is not None:
            return chosen.variable
        site = chosen.call_site
        decl = plan.conversions.get(site.position)
        if decl is None:
            decl = LocalDecl(namer.fresh(f"ip_{simple_name(type_name)}_"), type_name, site.statement.call,
                             comments=site.statement.comments)
            plan.conversions[site.position] = decl
        return VarInfo(decl.name, type_name, "local", (site.scope_id, site.position.index),
                       True, site.caller)

    if chosen.mechanism == "existingField":
        _handoff(plan, feed.src_cluster, chosen.variable.name, temp_var)
        return chosen.variable

    key = (feed.src_cluster, type_name)
    decl = plan.fresh_fields.get(key)
    if decl is None:
        modifiers = ("private", "static") if chosen.static else ("private",)
        decl = FieldDecl(namer.fresh(f"ip_{simple_name(type_name)}_"), type_name, modifiers)
        plan.fresh_fields[key] = decl
    _handoff(plan, feed.src_cluster, decl.name, temp_var)
    kind = "staticField" if decl.is_static else "field"
    return VarInfo(decl.name, type_name, kind, (chosen.field_owner, -1), True, chosen.field_owner)


# ============================================================
# 織り込み
# ============================================================

@dataclass(frozen=True)
class Placement:
    cluster_id: int
    label: str
    file: str
    line: int


@dataclass
class WeaveReport:
    rank: int
    branch_index: int
    cas: float
    cds: int
    cqs: float
    placements: list
    channels: list
    resolution: object

    def records(self):
        lines = [f"branch {self.branch_index} rank={self.rank}"]
        lines += [f"placement {p.cluster_id} {p.file} {p.line}" for p in self.placements]
        lines.append(f"score cas={self.cas:.4f} cds={self.cds} cqs={self.cqs:.4f}")
        lines += [f"channel {c.producer_cluster} {c.consumer_cluster} {c.mechanism}" for c in self.channels]
        lines += [f"hole {hole_id} {var.name}" for hole_id, var in sorted(self.resolution.assignment.items())]
        return lines

    def text(self):
        out = [f"ipweave: branch {self.branch_index}, mapping set rank {self.rank}",
               f"  CAS {self.cas:.4f}  CDS {self.cds}  CQS {self.cqs:.4f}", ""]
        for p in self.placements:
            out.append(f"  {p.label} (cluster {p.cluster_id}) -> {p.file}:{p.line}")
        if self.channels:
            out.append("")
            for c in self.channels:
                out.append(f"  cluster {c.producer_cluster} -> {c.consumer_cluster}: "
                           f"{c.type_name} via {c.mechanism} ({c.variable})")
        return "\n".join(out) + "\n"


@dataclass
class SynthesisResult:
    program: object
    files: dict
    report: WeaveReport
    mapping_set: object = None

    def write(self, out_dir):
        out = Path(out_dir)
        for path, text in self.files.items():
            target = out / path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
        (out / "report.txt").write_text(self.report.text(), encoding="utf-8")
        (out / "report.rec").write_text("\n".join(self.report.records()) + "\n", encoding="utf-8")
        logger.info(f"wrote {len(self.files)} files and reports to {out}")


def _qualified_expr(dotted):
    parts = dotted.split(".")
    expr = Name(parts[0])
    for part in parts[1:]:
        expr = FieldAccess(expr, part)
    return expr


def marker_text(sketch):
    return f"{MARKER} {sketch.label} [cluster {sketch.cluster_id}]"


def build_snippet(plan, sketch, resolution):
    fspec = plan.fspec

    def value(slot):
        if isinstance(slot, Temp):
            return Name(plan.temp_names[(sketch.cluster_id, slot.name)])
        return Name(resolution.name_of(slot.hole_id))

    stmts = []
    for stmt in sketch.statements:
        node = fspec.node(stmt.api_node_id)
        args = tuple(value(a) for a in stmt.args)
        if node.is_constructor:
            expr = New(stmt.concrete_type, args)
        elif node.is_instance:
            expr = Call(value(stmt.target), node.member_name, args)
        else:
            expr = Call(_qualified_expr(node.owner_type), node.member_name, args)
        comments = () if stmts else (marker_text(sketch),)
        if stmt.result is not None:
            name = plan.temp_names[(sketch.cluster_id, stmt.result.name)]
            stmts.append(LocalDecl(name, node.produced_type, expr, comments=comments))
        elif isinstance(expr, Call):
            stmts.append(CallStmt(expr, comments=comments))
        else:
            stmts.append(ExprStmt(expr, comments=comments))
    stmts.extend(plan.handoffs.get(sketch.cluster_id, ()))
    return stmts


def _document_key(position):
    key = []
    for step, branch in position.block_path:
        key += [step, _BRANCH_RANK[branch]]
    return (position.method_qname, tuple(key) + (position.index,))


def _cluster_order(branch):
    graph = branch.cluster_graph
    if nx.is_directed_acyclic_graph(graph):
        return list(nx.lexicographical_topological_sort(graph))
    return sorted(c.id for c in branch.clusters)


def _placements(files, sketches):
    found = []
    for sketch in sketches:
        marker = marker_text(sketch)
        for path in sorted(files):
            lines = files[path].splitlines()
            hit = next((i for i, text in enumerate(lines) if text.strip() == marker), None)
            if hit is not None:
                found.append(Placement(sketch.cluster_id, sketch.label, path, hit + 2))
                break
        else:
            raise WeaveConflict(f"marker for cluster {sketch.cluster_id} missing from woven output")
    return found


def weave(plan, resolution, rank=1):
    """計画と穴の割り当てから、織り込み済みプログラムと報告を作る"""
    program = plan.program
    for method_qname, temp_var in sorted(plan.return_patches.items()):
        position = patchable_return(program, method_qname)
        old = program.methods[method_qname].body.statements[position.index]
        program = replace_statement(program, position, Return(Name(temp_var), comments=old.comments))
    for position, decl in sorted(plan.conversions.items(), key=lambda kv: _document_key(kv[0])):
        program = replace_statement(program, position, decl)

    groups = {}
    for cluster_id in _cluster_order(plan.branch):
        position = plan.locations[cluster_id].block_position
        groups.setdefault(position, []).extend(build_snippet(plan, plan.sketch(cluster_id), resolution))
    for position in sorted(groups, key=_document_key, reverse=True):
        program = insert_statements(program, position, groups[position])

    for (cluster_id, _), decl in sorted(plan.fresh_fields.items()):
        program = add_field(program, _fresh_owner(plan, cluster_id), decl)

    files = emit_program(program)
    try:
        parse_sources(files, root=program.root)
    except IpweaveError as e:
        raise WeaveConflict(f"woven program does not parse: {e}")

    ms = plan.mapping_set
    report = WeaveReport(rank, plan.branch.index, ms.cas, ms.cds, ms.cqs,
                         _placements(files, plan.sketches), list(plan.channels), resolution)
    logger.info(f"woven {len(plan.sketches)} snippets into {len(files)} files (rank {rank})")
    return SynthesisResult(program, files, report, ms)


def _fresh_owner(plan, cluster_id):
    location = plan.locations[cluster_id]
    owner = plan.analysis.owner_class(location.method_qname)
    return plan.program.top_level_class(owner).qualified_name
