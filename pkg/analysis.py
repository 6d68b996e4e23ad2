"""
analysis.py - 対象プログラムの静的解析
=====================================================
【設計意図】
- 基本ブロック（スコープ）への分割、スコープ依存グラフ、可視変数、
  must-initialization を一つの ProgramAnalysis にまとめる
- 制御フローは手続き間グラフ（ICFG）:
  プログラム内メソッドを呼ぶ文でブロックを切り、
  呼び出し元ブロック → 呼び出し先入口、呼び出し先 <m>#exit → 続きのブロック
- フィールドの初期化は「エントリ（main）から見た支配関係」で判定する
  書き込み点がロケーションのスコープを支配していれば初期化済み

【スコープ ID】
- `<メソッド完全名>#b<k>`（k は文書順）, 仮想出口は `<メソッド完全名>#exit`
=====================================================
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import networkx as nx

from errors import InvalidLocation, UnknownScope
from minilang import (
    Assign, Binary, BlockPosition, Call, FieldAccess, If, Index,
    Literal, LocalDecl, Name, New, Paren, Return, Unary, While,
    block_at, child_blocks, statement_expressions, walk_expr,
)

logger = logging.getLogger(__name__)

ROOT = "<root>"
EXIT_SUFFIX = "#exit"


# ============================================================
# 型
# ============================================================

@dataclass(frozen=True)
class BasicBlock:
    scope_id: str
    method_qname: str
    number: int
    block_path: tuple
    start: int
    stop: int
    terminator: Optional[str] = None   # if / while / call / return

    @property
    def size(self):
        return self.stop - self.start

    @property
    def max_offset(self):
        """挿入可能な最大オフセット（終端文の前まで）"""
        return self.size - 1 if self.terminator else self.size


@dataclass(frozen=True)
class VarInfo:
    name: str
    type_name: str
    origin_kind: str          # local / parameter / field / staticField
    decl_site: tuple          # (scope_id か class 名, index)
    must_initialized: bool
    owner: str = ""           # メソッド名（local/parameter）かクラス名（field）
    decl_line: int = 0
    block_path: Optional[tuple] = None

    @property
    def key(self):
        return (self.owner, self.name)

    @property
    def is_field(self):
        return self.origin_kind in ("field", "staticField")


@dataclass(frozen=True)
class Location:
    scope_id: str
    statement_index: int
    method_qname: str
    block_position: BlockPosition = field(compare=False)

    @property
    def block_number(self):
        return block_number(self.scope_id)

    @property
    def key(self):
        return (self.method_qname, self.block_number, self.statement_index)

    def __str__(self):
        return f"{self.scope_id}@{self.statement_index}"


@dataclass(frozen=True)
class CallSite:
    caller: str
    callee: str
    scope_id: str
    continuation: str
    position: BlockPosition
    statement: object = field(compare=False, repr=False)


@dataclass
class ScopeGraph:
    control: nx.DiGraph
    data_edges: tuple = ()

    @property
    def nodes(self):
        return set(self.control.nodes)

    @property
    def control_edges(self):
        return sorted(self.control.edges)


def block_number(scope_id):
    _, _, tail = scope_id.rpartition("#b")
    return int(tail) if tail.isdigit() else -1


def exit_of(method_qname):
    return method_qname + EXIT_SUFFIX


def visibly_precedes(path_a, index_a, path_b, index_b):
    """位置 a に置いた宣言が位置 b から見えるか（同一メソッド内）"""
    depth = len(path_a)
    if tuple(path_b[:depth]) != tuple(path_a):
        return False
    if len(path_b) == depth:
        return index_a <= index_b
    return path_b[depth][0] >= index_a


# ============================================================
# 代入の must 解析（手続き内）
# ============================================================

def _target_key(target):
    if isinstance(target, Name):
        return target.ident
    if isinstance(target, FieldAccess):
        return "." + target.name
    return None


def _stmt_assigns(stmt):
    """文が必ず代入する名前の集合。None は「以降に到達しない」"""
    if isinstance(stmt, LocalDecl):
        return {stmt.name} if stmt.init is not None else set()
    if isinstance(stmt, Assign):
        key = _target_key(stmt.target)
        return {key} if key else set()
    if isinstance(stmt, Return):
        return None
    if isinstance(stmt, If):
        then = _assigned_by(stmt.then.statements)
        orelse = _assigned_by(stmt.orelse.statements) if stmt.orelse is not None else set()
        if then is None:
            return orelse
        if orelse is None:
            return then
        return then & orelse
    return set()


def _assigned_by(stmts):
    acc = set()
    for stmt in stmts:
        got = _stmt_assigns(stmt)
        if got is None:
            return None
        acc |= got
    return acc


def _levels(body, path, index):
    """(ブロック, そのブロックで先行する文数) を外側から順に"""
    levels = []
    block = body
    for step, branch in path:
        levels.append((block, step))
        block = dict(child_blocks(block.statements[step]))[branch]
    levels.append((block, index))
    return levels


# ============================================================
# ProgramAnalysis
# ============================================================

class ProgramAnalysis:
    def __init__(self, program):
        self.program = program
        self.blocks = {}            # scope_id -> BasicBlock
        self._method_blocks = {}    # method -> [BasicBlock]
        self._locals = {}           # method -> {name: (type, stmt)}
        self._call_segments = {}    # scope_id -> [callee]
        self.call_sites = {}        # callee -> [CallSite]
        self.call_graph = nx.DiGraph()
        self._intra_edges = []

        for qname in sorted(program.methods):
            self._collect_locals(qname)
        for qname in sorted(program.methods):
            self._split_method(qname)
        self.control = self._build_control()
        self.entries = self._entries()
        self._idom = self._dominators()
        self._field_writes = self._collect_field_writes()
        self.data_edges = tuple(self._data_edges())
        logger.info(f"analysis: {len(self.blocks)} scopes, {self.control.number_of_edges()} control edges, "
                    f"{len(self.data_edges)} data edges, entries={sorted(self.entries)}")

    # ---- 型環境 ----

    def owner_class(self, method_qname):
        return self.program.owner_of(method_qname).qualified_name

    def resolve_type(self, type_name, class_qname):
        return self.program.resolve_type(type_name, context_class=class_qname)

    def _collect_locals(self, qname):
        method = self.program.methods[qname]
        cls = self.owner_class(qname)
        env = {}
        for param in method.params:
            env[param.name] = (self.resolve_type(param.type_name, cls), None)

        def visit(block):
            for stmt in block.statements:
                if isinstance(stmt, LocalDecl) and stmt.name not in env:
                    env[stmt.name] = (self.resolve_type(stmt.type_name, cls), stmt)
                for _, child in child_blocks(stmt):
                    visit(child)

        visit(method.body)
        self._locals[qname] = env

    def field_ref(self, class_qname, name):
        """クラス（と外側のクラス）からフィールドを探す -> (宣言クラス, FieldDecl)"""
        if class_qname not in self.program.classes:
            return None
        for cls in self.program.enclosing_classes(class_qname):
            for decl in cls.fields:
                if decl.name == name:
                    return cls.qualified_name, decl
        return None

    def field_type(self, ref):
        cls, decl = ref
        return self.resolve_type(decl.type_name, cls)

    def _unique_field(self, name):
        found = [(q, f) for q, c in self.program.classes.items() for f in c.fields if f.name == name]
        return found[0] if len(found) == 1 else None

    def _class_ref(self, method_qname, expr):
        """式がクラス名そのものならその完全名"""
        if isinstance(expr, Name) and expr.ident not in self._locals[method_qname]:
            if self.field_ref(self.owner_class(method_qname), expr.ident):
                return None
            resolved = self.resolve_type(expr.ident, self.owner_class(method_qname))
            if resolved in self.program.classes:
                return resolved
        return None

    def resolve_field_target(self, method_qname, expr):
        """Name / FieldAccess が指すフィールド -> (宣言クラス, FieldDecl)"""
        if isinstance(expr, Name):
            if expr.ident in self._locals[method_qname]:
                return None
            return self.field_ref(self.owner_class(method_qname), expr.ident)
        if isinstance(expr, FieldAccess):
            cls = self._class_ref(method_qname, expr.target) or self.expr_type(method_qname, expr.target)
            if cls in self.program.classes:
                return self.field_ref(cls, expr.name)
            if cls is None and not self._rooted_at_type_name(method_qname, expr.target):
                return self._unique_field(expr.name)
        return None

    def _rooted_at_type_name(self, method_qname, expr):
        """`System.out` のように変数でない名前から始まる式か"""
        while isinstance(expr, FieldAccess):
            expr = expr.target
        if not isinstance(expr, Name) or expr.ident == "this":
            return False
        if expr.ident in self._locals[method_qname]:
            return False
        return self.field_ref(self.owner_class(method_qname), expr.ident) is None

    def expr_type(self, method_qname, expr):
        if isinstance(expr, Literal):
            text = expr.text
            if text.startswith('"'):
                return "java.lang.String"
            if text.startswith("'"):
                return "char"
            if text in ("true", "false"):
                return "boolean"
            if text[:1].isdigit():
                return "double" if "." in text else "int"
            return None
        if isinstance(expr, Name):
            if expr.ident == "this":
                return self.owner_class(method_qname)
            local = self._locals[method_qname].get(expr.ident)
            if local is not None:
                return local[0]
            ref = self.field_ref(self.owner_class(method_qname), expr.ident)
            return self.field_type(ref) if ref else None
        if isinstance(expr, FieldAccess):
            ref = self.resolve_field_target(method_qname, expr)
            return self.field_type(ref) if ref else None
        if isinstance(expr, Call):
            callee = self.resolve_call(method_qname, expr)
            if callee is None:
                return None
            method = self.program.methods[callee]
            return self.resolve_type(method.return_type, self.owner_class(callee))
        if isinstance(expr, New):
            return self.resolve_type(expr.type_name, self.owner_class(method_qname))
        if isinstance(expr, Paren):
            return self.expr_type(method_qname, expr.inner)
        if isinstance(expr, Index):
            base = self.expr_type(method_qname, expr.target)
            return base[:-2] if base and base.endswith("[]") else None
        if isinstance(expr, Unary):
            return "boolean" if expr.op == "!" else self.expr_type(method_qname, expr.operand)
        if isinstance(expr, Binary):
            if expr.op in ("==", "!=", "<", ">", "<=", ">=", "&&", "||"):
                return "boolean"
            left = self.expr_type(method_qname, expr.left)
            right = self.expr_type(method_qname, expr.right)
            if "java.lang.String" in (left, right) and expr.op == "+":
                return "java.lang.String"
            return left
        return None

    def resolve_call(self, method_qname, call):
        """呼び出しをプログラム内メソッドに解決する（外部 API なら None）"""
        if call.receiver is None:
            for cls in self.program.enclosing_classes(self.owner_class(method_qname)):
                for method in cls.methods:
                    if method.name == call.name:
                        return method.qualified_name
            return self._unique_method(call.name)
        cls = self._class_ref(method_qname, call.receiver) or self.expr_type(method_qname, call.receiver)
        if cls in self.program.classes:
            for method in self.program.classes[cls].methods:
                if method.name == call.name:
                    return method.qualified_name
            return None
        if cls is None and not self._rooted_at_type_name(method_qname, call.receiver):
            return self._unique_method(call.name)
        return None

    def _unique_method(self, name):
        found = [q for q, m in self.program.methods.items() if m.name == name]
        return found[0] if len(found) == 1 else None

    def calls_in(self, method_qname, stmt):
        """文が評価順に呼ぶプログラム内メソッド"""
        callees = []
        for expr in statement_expressions(stmt):
            for sub in walk_expr(expr):
                if isinstance(sub, Call):
                    callee = self.resolve_call(method_qname, sub)
                    if callee is not None:
                        callees.append(callee)
        return callees

    # ---- 基本ブロック ----

    def _split_method(self, qname):
        method = self.program.methods[qname]
        self._method_blocks[qname] = []
        self._split_block(qname, method.body, (), itertools.count())

    def _new_block(self, qname, path, start, stop, terminator, counter):
        number = next(counter)
        scope_id = f"{qname}#b{number}"
        block = BasicBlock(scope_id, qname, number, path, start, stop, terminator)
        self.blocks[scope_id] = block
        self._method_blocks[qname].append(block)
        return scope_id

    def _split_block(self, qname, ast_block, path, counter):
        """ブロックを分割し (入口 scope, 落ち先へ抜ける scope 群) を返す"""
        stmts = ast_block.statements
        state = {"entry": None, "pending": []}
        exit_id = exit_of(qname)

        def open_segment(start, stop, terminator):
            sid = self._new_block(qname, path, start, stop, terminator, counter)
            for src in state["pending"]:
                self._intra_edges.append((src, sid))
            state["pending"] = []
            if state["entry"] is None:
                state["entry"] = sid
            return sid

        start = 0
        ended = False
        for i, stmt in enumerate(stmts):
            ended = False
            if isinstance(stmt, While):
                state["pending"].append(open_segment(start, i, None))
                header = open_segment(i, i + 1, "while")
                body_entry, body_exits = self._split_block(qname, stmt.body, path + ((i, "body"),), counter)
                self._intra_edges.append((header, body_entry))
                self._intra_edges.extend((src, header) for src in body_exits)
                state["pending"].append(header)
                start = i + 1
            elif isinstance(stmt, If):
                sid = open_segment(start, i + 1, "if")
                then_entry, then_exits = self._split_block(qname, stmt.then, path + ((i, "then"),), counter)
                self._intra_edges.append((sid, then_entry))
                exits = list(then_exits)
                if stmt.orelse is not None:
                    else_entry, else_exits = self._split_block(qname, stmt.orelse, path + ((i, "else"),), counter)
                    self._intra_edges.append((sid, else_entry))
                    exits.extend(else_exits)
                else:
                    exits.append(sid)
                state["pending"] = exits
                start = i + 1
            elif isinstance(stmt, Return):
                sid = open_segment(start, i + 1, "return")
                self._intra_edges.append((sid, exit_id))
                start = i + 1
                ended = True
            elif self.calls_in(qname, stmt):
                sid = open_segment(start, i + 1, "call")
                self._call_segments[sid] = self.calls_in(qname, stmt)
                state["pending"].append(sid)
                start = i + 1

        if not ended:
            state["pending"].append(open_segment(start, len(stmts), None))
        exits = state["pending"]
        if not path:
            self._intra_edges.extend((src, exit_id) for src in exits)
            exits = []
        return state["entry"], exits

    def _build_control(self):
        graph = nx.DiGraph()
        for qname in self.program.methods:
            graph.add_node(exit_of(qname))
        graph.add_nodes_from(self.blocks)
        for src, dst in self._intra_edges:
            callees = self._call_segments.get(src)
            if not callees:
                graph.add_edge(src, dst)
                continue
            graph.add_edge(src, self.entry_of(callees[0]))
            for before, after in zip(callees, callees[1:]):
                graph.add_edge(exit_of(before), self.entry_of(after))
            graph.add_edge(exit_of(callees[-1]), dst)
            caller = self.blocks[src].method_qname
            block = self.blocks[src]
            position = BlockPosition(caller, block.block_path, block.stop - 1)
            stmt = block_at(self.program.methods[caller].body, block.block_path).statements[block.stop - 1]
            for callee in callees:
                self.call_graph.add_edge(caller, callee)
                self.call_sites.setdefault(callee, []).append(CallSite(caller, callee, src, dst, position, stmt))
        self.call_graph.add_nodes_from(self.program.methods)
        return graph

    def entry_of(self, method_qname):
        return self._method_blocks[method_qname][0].scope_id

    def _entries(self):
        mains = {q for q, m in self.program.methods.items() if m.name == "main"}
        if mains:
            return mains
        return {q for q in self.program.methods if self.call_graph.in_degree(q) == 0}

    def _dominators(self):
        graph = self.control.copy()
        graph.add_node(ROOT)
        for qname in self.entries:
            graph.add_edge(ROOT, self.entry_of(qname))
        return nx.immediate_dominators(graph, ROOT)

    @lru_cache(maxsize=None)
    def _dominator_chain(self, scope_id):
        chain = set()
        node = scope_id
        while node in self._idom and node not in chain:
            chain.add(node)
            if node == ROOT:
                break
            node = self._idom[node]
        return frozenset(chain)

    def dominates(self, a, b):
        return b in self._idom and a in self._dominator_chain(b)

    # ---- 問い合わせ ----

    def method_blocks(self, method_qname):
        return list(self._method_blocks[method_qname])

    def scope(self, scope_id):
        if scope_id not in self.blocks:
            raise UnknownScope(scope_id)
        return self.blocks[scope_id]

    def callers(self, method_qname):
        return set(self.call_graph.predecessors(method_qname))

    def callees(self, method_qname):
        return set(self.call_graph.successors(method_qname))

    def executes_before(self, s1, s2):
        for sid in (s1, s2):
            if sid not in self.control:
                raise UnknownScope(sid)
        return s1 == s2 or nx.has_path(self.control, s1, s2)

    def location(self, scope_id, offset):
        block = self.scope(scope_id)
        if not 0 <= offset <= block.max_offset:
            raise InvalidLocation(f"offset {offset} outside {scope_id} (0..{block.max_offset})")
        position = BlockPosition(block.method_qname, block.block_path, block.start + offset)
        return Location(scope_id, offset, block.method_qname, position)

    def location_at(self, method_qname, block_path, index):
        """AST 上の挿入位置をスコープ付きの Location に変換する"""
        if method_qname not in self._method_blocks:
            raise InvalidLocation(f"unknown method {method_qname}")
        for block in self._method_blocks[method_qname]:
            if block.block_path == tuple(block_path) and block.start <= index <= block.start + block.max_offset:
                return self.location(block.scope_id, index - block.start)
        raise InvalidLocation(f"no insertion point {index} in {method_qname} block {block_path}")

    def scope_of_statement(self, method_qname, block_path, index):
        for block in self._method_blocks[method_qname]:
            if block.block_path == tuple(block_path) and block.start <= index < block.stop:
                return block.scope_id
        raise InvalidLocation(f"no statement {index} in {method_qname} block {block_path}")

    def write_scope(self, method_qname, block_path, index):
        """文の効果が観測されるスコープ（呼び出しで終わるブロックなら続きのブロック）"""
        sid = self.scope_of_statement(method_qname, block_path, index)
        block = self.blocks[sid]
        if block.terminator == "call" and index == block.stop - 1:
            return self.location_at(method_qname, block_path, index + 1).scope_id
        return sid

    def location_line(self, location):
        """挿入位置の元プログラムでの行（位置の文、ブロック末尾なら閉じ括弧の行）"""
        pos = location.block_position
        ast_block = block_at(self.program.methods[pos.method_qname].body, pos.block_path)
        if pos.index < len(ast_block.statements):
            return ast_block.statements[pos.index].line
        return ast_block.end_line

    def file_of(self, location):
        return self.program.file_of_method(location.method_qname).path

    # ---- 可視変数 ----

    def visible_vars(self, location):
        pos = location.block_position
        qname = pos.method_qname
        method = self.program.methods[qname]
        cls = self.owner_class(qname)
        try:
            levels = _levels(method.body, pos.block_path, pos.index)
        except (IndexError, KeyError):
            raise InvalidLocation(f"bad location {location}")

        assigned = set()
        unreachable = False
        bound = {}
        for param in method.params:
            bound[param.name] = VarInfo(param.name, self.resolve_type(param.type_name, cls), "parameter",
                                        (self.entry_of(qname), 0), True, qname, method.line, ())
        for depth, (block, upto) in enumerate(levels):
            block_path = tuple(pos.block_path[:depth])
            for i, stmt in enumerate(block.statements[:upto]):
                if isinstance(stmt, LocalDecl):
                    decl_scope = self.scope_of_statement(qname, block_path, i)
                    bound[stmt.name] = VarInfo(stmt.name, self.resolve_type(stmt.type_name, cls), "local",
                                               (decl_scope, i), False, qname, stmt.line, block_path)
            got = _assigned_by(block.statements[:upto])
            if got is None:
                unreachable = True
            else:
                assigned |= got

        result = []
        for name, var in bound.items():
            init = var.origin_kind == "parameter" or unreachable or name in assigned
            result.append(VarInfo(var.name, var.type_name, var.origin_kind, var.decl_site, init,
                                  var.owner, var.decl_line, var.block_path))

        static_context = method.is_static
        for owner in self.program.enclosing_classes(cls):
            for decl in owner.fields:
                if decl.name in bound or (static_context and not decl.is_static):
                    continue
                bound[decl.name] = None
                ref = (owner.qualified_name, decl)
                init = (unreachable or decl.has_initializer or f".{decl.name}" in assigned
                        or decl.name in assigned or self._written_before(ref, location))
                kind = "staticField" if decl.is_static else "field"
                index = owner.members.index(decl)
                result.append(VarInfo(decl.name, self.field_type(ref), kind, (owner.qualified_name, index),
                                      init, owner.qualified_name, decl.line, None))
            if owner.is_static:
                static_context = True
        return result

    def _collect_field_writes(self):
        writes = {}
        for qname, method in self.program.methods.items():
            for path, index, stmt in iter_statements(method.body):
                if isinstance(stmt, Assign):
                    ref = self.resolve_field_target(qname, stmt.target)
                    if ref is not None:
                        key = (ref[0], ref[1].name)
                        writes.setdefault(key, []).append(self.write_scope(qname, path, index))
        return writes

    def _written_before(self, ref, location):
        key = (ref[0], ref[1].name)
        target = location.scope_id
        return any(w != target and self.dominates(w, target) for w in self._field_writes.get(key, ()))

    # ---- データ依存 ----

    def _data_edges(self):
        edges = set()
        reads = {}
        for qname, method in self.program.methods.items():
            for path, index, stmt in iter_statements(method.body):
                sid = self.scope_of_statement(qname, path, index)
                for expr in statement_expressions(stmt):
                    for sub in walk_expr(expr):
                        if isinstance(sub, (Name, FieldAccess)):
                            ref = self.resolve_field_target(qname, sub)
                            if ref is not None:
                                reads.setdefault((ref[0], ref[1].name), set()).add(sid)
                if isinstance(stmt, LocalDecl) and stmt.init is not None:
                    type_name = self._locals[qname][stmt.name][0]
                    for use in self._local_uses(qname, stmt.name):
                        if use != sid and self.executes_before(sid, use):
                            edges.add((sid, use, type_name))
        for key, write_scopes in self._field_writes.items():
            ref = self.field_ref(*key)
            type_name = self.field_type(ref)
            for w in write_scopes:
                for r in reads.get(key, ()):
                    if r != w and self.executes_before(w, r):
                        edges.add((w, r, type_name))
        for callee, sites in self.call_sites.items():
            method = self.program.methods[callee]
            cls = self.owner_class(callee)
            for site in sites:
                for param in method.params:
                    edges.add((site.scope_id, self.entry_of(callee), self.resolve_type(param.type_name, cls)))
                if method.return_type != "void":
                    edges.add((exit_of(callee), site.continuation, self.resolve_type(method.return_type, cls)))
        return sorted(edges)

    def _local_uses(self, qname, name):
        uses = set()
        for path, index, stmt in iter_statements(self.program.methods[qname].body):
            for expr in statement_expressions(stmt):
                if any(isinstance(sub, Name) and sub.ident == name for sub in walk_expr(expr)):
                    uses.add(self.scope_of_statement(qname, path, index))
        return uses

    @cached_property
    def value_flow(self):
        return ValueFlow(self)

    @property
    def graph(self):
        return ScopeGraph(self.control, self.data_edges)

    def listing(self):
        """`ipweave analyze` 用の決定的なテキスト表現"""
        lines = []
        for sid in sorted(self.blocks, key=lambda s: (self.blocks[s].method_qname, self.blocks[s].number)):
            block = self.blocks[sid]
            lines.append(f"node {sid} method={block.method_qname} stmts={block.start}-{block.stop} "
                         f"term={block.terminator or '-'}")
            loc = self.location(sid, block.max_offset)
            for var in sorted(self.visible_vars(loc), key=lambda v: (v.origin_kind, v.name)):
                lines.append(f"var {sid} {var.name} type={var.type_name} kind={var.origin_kind} "
                             f"init={'yes' if var.must_initialized else 'no'}")
        for src, dst in sorted(self.control.edges):
            lines.append(f"edge {src} {dst} kind=control")
        for src, dst, type_name in self.data_edges:
            lines.append(f"edge {src} {dst} kind=data type={type_name}")
        return lines


def iter_statements(body, path=()):
    """(block_path, index, stmt) を文書順に"""
    for index, stmt in enumerate(body.statements):
        yield path, index, stmt
        for branch, child in child_blocks(stmt):
            yield from iter_statements(child, path + ((index, branch),))


# ============================================================
# 値の流れ（代入・引数渡し・戻り値）
# ============================================================

@dataclass(frozen=True)
class Occurrence:
    """プログラム外 API の呼び出し（new を含む）1 箇所"""
    node: tuple
    expr: object = field(compare=False, repr=False)
    method_qname: str = ""
    block_path: tuple = ()
    index: int = 0
    ordinal: int = 0
    receiver_type: Optional[str] = None
    scope_id: str = ""

    @property
    def order_key(self):
        return (self.block_path, self.index, self.ordinal)


def dotted_name(expr):
    """`a.b.c` 形式の式なら文字列、それ以外は None"""
    parts = []
    while isinstance(expr, FieldAccess):
        parts.append(expr.name)
        expr = expr.target
    if not isinstance(expr, Name):
        return None
    parts.append(expr.ident)
    return ".".join(reversed(parts))


class ValueFlow:
    """
    ノード: ("var", メソッド, 名前) / ("field", クラス, 名前) / ("ret", メソッド) /
            ("expr", メソッド, block_path, index, ordinal)
    辺は値がコピーされる向き
    """

    def __init__(self, analysis):
        self.analysis = analysis
        self.graph = nx.DiGraph()
        self.occurrences = []
        for qname in sorted(analysis.program.methods):
            for path, index, stmt in iter_statements(analysis.program.methods[qname].body):
                self._statement(qname, path, index, stmt)
        logger.debug(f"value flow: {self.graph.number_of_nodes()} nodes, "
                     f"{len(self.occurrences)} external call sites")

    @staticmethod
    def var_node(var):
        if var.is_field:
            return ("field", var.owner, var.name)
        return ("var", var.owner, var.name)

    def flows(self, src, dst):
        return src == dst or (src in self.graph and dst in self.graph and nx.has_path(self.graph, src, dst))

    def _link(self, sources, node):
        self.graph.add_node(node)
        for src in sources:
            self.graph.add_edge(src, node)

    def _place_node(self, qname, expr):
        if isinstance(expr, Paren):
            return self._place_node(qname, expr.inner)
        if isinstance(expr, Name) and expr.ident in self.analysis._locals[qname]:
            return ("var", qname, expr.ident)
        ref = self.analysis.resolve_field_target(qname, expr) if isinstance(expr, (Name, FieldAccess)) else None
        if ref is not None:
            return ("field", ref[0], ref[1].name)
        return None

    def _receiver_type(self, qname, receiver):
        if receiver is None:
            return None
        found = self.analysis.expr_type(qname, receiver)
        if found is None and self.analysis._rooted_at_type_name(qname, receiver):
            dotted = dotted_name(receiver)
            if dotted is not None:
                found = self.analysis.resolve_type(dotted, self.analysis.owner_class(qname))
        return found

    def _statement(self, qname, path, index, stmt):
        ordinals = itertools.count()
        scope_id = self.analysis.scope_of_statement(qname, path, index)

        def visit(expr):
            if expr is None:
                return []
            if isinstance(expr, Paren):
                return visit(expr.inner)
            if isinstance(expr, Name):
                node = self._place_node(qname, expr)
                return [node] if node else []
            if isinstance(expr, FieldAccess):
                visit(expr.target)
                node = self._place_node(qname, expr)
                return [node] if node else []
            if isinstance(expr, (Call, New)):
                receiver = expr.receiver if isinstance(expr, Call) else None
                receiver_sources = visit(receiver)
                arg_sources = [visit(arg) for arg in expr.args]
                callee = self.analysis.resolve_call(qname, expr) if isinstance(expr, Call) else None
                if callee is not None:
                    for param, sources in zip(self.analysis.program.methods[callee].params, arg_sources):
                        self._link(sources, ("var", callee, param.name))
                    return [("ret", callee)]
                node = ("expr", qname, path, index, next(ordinals))
                self._link(receiver_sources, node)
                for sources in arg_sources:
                    self._link(sources, node)
                self.occurrences.append(Occurrence(node, expr, qname, path, index, node[-1],
                                                   self._receiver_type(qname, receiver), scope_id))
                return [node]
            if isinstance(expr, Index):
                visit(expr.index)
                return visit(expr.target)
            if isinstance(expr, Unary):
                visit(expr.operand)
            elif isinstance(expr, Binary):
                visit(expr.left)
                visit(expr.right)
            return []

        if isinstance(stmt, LocalDecl):
            self._link(visit(stmt.init), ("var", qname, stmt.name))
        elif isinstance(stmt, Assign):
            sources = visit(stmt.value)
            if isinstance(stmt.target, FieldAccess):
                visit(stmt.target.target)
            node = self._place_node(qname, stmt.target)
            if node is not None:
                self._link(sources, node)
        elif isinstance(stmt, Return):
            if stmt.value is not None:
                self._link(visit(stmt.value), ("ret", qname))
        else:
            for expr in statement_expressions(stmt):
                visit(expr)


# ============================================================
# モジュールレベルの操作
# ============================================================

@lru_cache(maxsize=16)
def analyze(program):
    return ProgramAnalysis(program)


def basic_blocks(program):
    return list(analyze(program).blocks.values())


def visible_vars(program, location):
    return analyze(program).visible_vars(location)


def scope_dependency_graph(program):
    return analyze(program).graph


def executes_before(graph, s1, s2):
    control = graph.control if isinstance(graph, ScopeGraph) else graph
    for sid in (s1, s2):
        if sid not in control:
            raise UnknownScope(sid)
    return s1 == s2 or nx.has_path(control, s1, s2)
