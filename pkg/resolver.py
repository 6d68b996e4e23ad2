"""
resolver.py - 穴への変数割り当て（最小の異なる変数数）
=====================================================
【設計意図】
- 穴ごとに候補変数を近い順に並べる
  同じブロックのローカル → メソッドの他のローカル・引数 → フィールド
  同順位は宣言行と穴の行の距離、次に名前
- 制約1: 各穴は候補のどれか 1 つ以上
  制約2: 同じプログラム変数を指すリテラルは同値
- 使う変数集合をサイズ順に列挙し（組合せの分枝限定）、最小のものを採る
  同サイズなら順位の合計が小さいもの、次に名前順
=====================================================
"""

import itertools
import logging
from dataclasses import dataclass

from errors import Unsatisfiable

logger = logging.getLogger(__name__)

SAME_BLOCK, ENCLOSING, FIELD = 0, 1, 2


@dataclass(frozen=True)
class CandidateList:
    hole_id: int
    type_name: str
    candidates: tuple       # VarInfo（近い順）


@dataclass(frozen=True)
class SelectionProblem:
    holes: tuple                 # CandidateList
    literals: tuple              # (hole_id, candidate index)
    at_least_one: tuple          # 穴ごとのリテラル集合
    equivalences: tuple          # 同じ変数を指すリテラルの組

    def variable(self, literal):
        hole_id, index = literal
        return self.list_for(hole_id).candidates[index]

    def list_for(self, hole_id):
        for cl in self.holes:
            if cl.hole_id == hole_id:
                return cl
        raise KeyError(hole_id)


@dataclass(frozen=True)
class Resolution:
    assignment: dict        # hole_id -> VarInfo
    distinct_count: int

    def name_of(self, hole_id):
        return self.assignment[hole_id].name


def _tier(var, location):
    if var.is_field:
        return FIELD
    if var.origin_kind == "local" and var.block_path == tuple(location.block_position.block_path):
        return SAME_BLOCK
    return ENCLOSING


def rank_candidates(variables, location, line):
    return sorted(variables, key=lambda v: (_tier(v, location), abs(v.decl_line - line), v.name, v.owner))


def build_candidates(placed_holes, analysis, restrictions=None, same_type=None):
    """
    placed_holes: (Hole, Location) の並び
    restrictions: {hole_id: VarInfo} クラスタ間のデータを運ぶ変数に固定する穴
    """
    restrictions = restrictions or {}
    same_type = same_type or (lambda a, b: a == b)
    lists = []
    for hole, location in placed_holes:
        if hole.hole_id in restrictions:
            lists.append(CandidateList(hole.hole_id, hole.type_name, (restrictions[hole.hole_id],)))
            continue
        line = analysis.location_line(location)
        usable = [v for v in analysis.visible_vars(location)
                  if v.must_initialized and same_type(v.type_name, hole.type_name)]
        lists.append(CandidateList(hole.hole_id, hole.type_name, tuple(rank_candidates(usable, location, line))))
    return lists


def build_problem(candidate_lists):
    literals = []
    clauses = []
    by_var = {}
    for cl in candidate_lists:
        clause = []
        for index, var in enumerate(cl.candidates):
            literal = (cl.hole_id, index)
            literals.append(literal)
            clause.append(literal)
            by_var.setdefault(var.key, []).append(literal)
        clauses.append(tuple(clause))
    equivalences = tuple(
        pair for group in by_var.values() for pair in itertools.combinations(group, 2)
    )
    return SelectionProblem(tuple(candidate_lists), tuple(literals), tuple(clauses), equivalences)


def solve_selection(problem):
    """制約を満たし、選ばれる異なる変数の数が最小となるリテラル集合"""
    empty = [cl.hole_id for cl in problem.holes if not cl.candidates]
    if empty:
        raise Unsatisfiable(empty)

    names = {}
    for cl in problem.holes:
        for var in cl.candidates:
            names.setdefault(var.key, var.name)
    universe = sorted(names, key=lambda key: (names[key], key))

    def cost(chosen):
        total = 0
        for cl in problem.holes:
            ranks = [i for i, var in enumerate(cl.candidates) if var.key in chosen]
            if not ranks:
                return None
            total += ranks[0]
        return total

    for size in range(0, len(problem.holes) + 1):
        best = None
        for combo in itertools.combinations(universe, size):
            chosen = set(combo)
            total = cost(chosen)
            if total is None:
                continue
            key = (total, sorted(names[k] for k in combo))
            if best is None or key < best[0]:
                best = (key, chosen)
        if best is not None:
            chosen = best[1]
            return frozenset(lit for lit in problem.literals if problem.variable(lit).key in chosen)
    # 穴の数だけ変数があれば必ず満たせる
    raise Unsatisfiable(empty)


def resolve(problem, selection=None):
    selection = selection if selection is not None else solve_selection(problem)
    assignment = {}
    for cl in problem.holes:
        picked = sorted(i for (h, i) in selection if h == cl.hole_id)
        assignment[cl.hole_id] = cl.candidates[picked[0]]
    distinct = len({var.key for var in assignment.values()})
    logger.info(f"resolved {len(assignment)} holes with {distinct} distinct variables")
    return Resolution(assignment, distinct)


def render_problem(problem):
    lines = []
    for hole_id, index in problem.literals:
        var = problem.variable((hole_id, index))
        lines.append(f"var h{hole_id}_{index} = {var.name} ({var.origin_kind} {var.type_name})")
    for cl, clause in zip(problem.holes, problem.at_least_one):
        body = " | ".join(f"h{h}_{i}" for h, i in clause) or "false"
        lines.append(f"clause h{cl.hole_id}: {body}")
    for (h1, i1), (h2, i2) in problem.equivalences:
        lines.append(f"equiv h{h1}_{i1} = h{h2}_{i2}")
    return lines


def render_resolution(resolution):
    lines = [f"assign ?{hole_id} = {var.name}" for hole_id, var in sorted(resolution.assignment.items())]
    lines.append(f"distinct {resolution.distinct_count}")
    return lines
