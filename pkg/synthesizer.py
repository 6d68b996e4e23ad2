"""
synthesizer.py - 解析 → 採点 → スケッチ → 穴の解決 → 織り込み をつなぐ
=====================================================
【設計意図】
- CLI と HTTP API はこのモジュールだけを呼ぶ
- ブランチを指定しなければ、依存を満たす配置が存在する最上位のブランチを使う
- 穴が解決できない（Unsatisfiable）配置は捨てて次の順位を試す
=====================================================
"""

import logging
from dataclasses import dataclass

from analysis import analyze
from annotator import Coefficients, rank_mapping_sets
from errors import ChannelFailure, NoFeasibleMapping, Unsatisfiable
from fspec import enumerate_branches
from resolver import build_candidates, build_problem, resolve, solve_selection
from sketcher import generate_sketches
from variables import SynthesisConfig
from weaver import ChannelPlanner, prepare_weave, weave

logger = logging.getLogger(__name__)


@dataclass
class Scored:
    branch: object
    ranked: list
    analysis: object


def select_branches(fspec, config, branch_index=None):
    branches = enumerate_branches(fspec, tau=config.tau)
    if branch_index is None:
        return branches
    chosen = [b for b in branches if b.index == branch_index]
    if not chosen:
        raise NoFeasibleMapping(f"FSpec {fspec.name} has no branch {branch_index} "
                                f"({len(branches)} branches)")
    return chosen


def score(program, fspec, config=None, branch_index=None, coefficients=None):
    """依存を満たす最上位ブランチと、その MappingSet ランキング"""
    config = config or SynthesisConfig()
    coefficients = coefficients or Coefficients.from_config(config)
    analysis = analyze(program)
    last_error = None
    for branch in select_branches(fspec, config, branch_index):
        try:
            ranked = rank_mapping_sets(branch, analysis, coefficients, fspec)
        except NoFeasibleMapping as e:
            logger.info(f"branch {branch.index}: {e}")
            last_error = e
            continue
        return Scored(branch, ranked, analysis)
    raise last_error or NoFeasibleMapping(f"FSpec {fspec.name} has no branch")


def selection_problem(scored, program, fspec, mapping_set):
    """MappingSet の穴の選択問題（織り込み計画つき）"""
    analysis = scored.analysis
    sketches = generate_sketches(scored.branch, fspec)
    plan = prepare_weave(program, analysis, fspec, scored.branch, mapping_set, sketches,
                         ChannelPlanner(analysis, fspec.canonical))
    lists = build_candidates(plan.placed_holes(), analysis, plan.restrictions, fspec.same_type)
    return plan, build_problem(lists)


def realize(scored, program, fspec, mapping_set, rank):
    """1 つの MappingSet を実際のコードにする"""
    plan, problem = selection_problem(scored, program, fspec, mapping_set)
    resolution = resolve(problem, solve_selection(problem))
    return weave(plan, resolution, rank=rank)


def synthesize(program, fspec, config=None, branch_index=None, rank=1, coefficients=None):
    scored = score(program, fspec, config, branch_index, coefficients)
    return synthesize_from(scored, program, fspec, rank)


def synthesize_from(scored, program, fspec, rank=1):
    """rank 位から順に織り込みを試し、最初に成功したものを返す"""
    if not 1 <= rank <= len(scored.ranked):
        raise NoFeasibleMapping(f"rank {rank} requested but only {len(scored.ranked)} mapping sets ranked")
    last_error = None
    for position in range(rank, len(scored.ranked) + 1):
        try:
            return realize(scored, program, fspec, scored.ranked[position - 1], position)
        except (Unsatisfiable, ChannelFailure) as e:
            logger.warning(f"mapping set rank {position} dropped: {e}")
            last_error = e
    raise last_error
