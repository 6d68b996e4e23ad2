"""
annotator.py - クラスタの配置候補の採点と MappingSet のランキング
=====================================================
【設計意図】
- クラスタ × ロケーションの局所スコア CLS
    MNS = 1 / (編集距離(ラベル, メソッド名) + 1)
    VAS = 必要な型ごとの min(見えている初期化済み変数の数 / 必要数, 1) の積
    CLS = (cMNS·MNS + cVAS·VAS) / (cMNS + cVAS)
- 全クラスタの配置（MappingSet）の大域スコア CAS
    CQS = (1/n) Σ_メソッド 1/(そのメソッドに置いたクラスタ数)
    CDS = クラスタ間の依存（実行順とデータの受け渡し）を満たせば 1、それ以外 0
    CAS = (cCQS·CQS + cCLS·平均CLS) / (cCQS + cCLS)  （CDS = 0 なら 0）
- 全組合せは爆発するので、平均 CLS の大きい順に best-first で取り出し、
  上位 listCap 件が確定した時点で打ち切る

【評価基準の切り替え】
- mns / vas / cqs / cas（既定）を Coefficients.for_criterion で選ぶ
=====================================================
"""

import heapq
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import networkx as nx

from analysis import iter_statements
from errors import ConfigError, InvalidLocation, NoFeasibleMapping, UnknownCluster
from fspec import levenshtein, strip_label
from minilang import Assign, LocalDecl
from variables import SynthesisConfig
from weaver import ChannelPlanner

logger = logging.getLogger(__name__)

CRITERIA = ("mns", "vas", "cqs", "cas")


# ============================================================
# 係数
# ============================================================

@dataclass(frozen=True)
class Coefficients:
    c_mns: float = 1.0
    c_vas: float = 1.0
    c_cls: float = 1.0
    c_cqs: float = 0.0001
    list_cap: int = 100
    explore_limit: int = 20000

    @classmethod
    def from_config(cls, config=None):
        config = config or SynthesisConfig()
        return cls(config.c_mns, config.c_vas, config.c_cls, config.c_cqs,
                   config.list_cap, config.explore_limit)

    @classmethod
    def for_criterion(cls, criterion, config=None):
        """評価用の比較基準: 名前だけ / 変数だけ / 凝集度だけ / 全部"""
        base = cls.from_config(config)
        if criterion == "cas":
            return base
        if criterion == "mns":
            return cls(1.0, 0.0, 1.0, 0.0, base.list_cap, base.explore_limit)
        if criterion == "vas":
            return cls(0.0, 1.0, 1.0, 0.0, base.list_cap, base.explore_limit)
        if criterion == "cqs":
            return cls(base.c_mns, base.c_vas, 0.0, 1.0, base.list_cap, base.explore_limit)
        raise ConfigError(f"unknown criterion {criterion!r} (expected one of {', '.join(CRITERIA)})")


# ============================================================
# 局所スコア
# ============================================================

def mns(cluster_label, method_name):
    return 1.0 / (levenshtein(strip_label(cluster_label), method_name) + 1)


def vas(cluster, location, analysis, canonical=None):
    if not cluster.slots:
        return 1.0
    canonical = canonical or (lambda t: t)
    usable = [v for v in analysis.visible_vars(location) if v.must_initialized]
    score = 1.0
    for type_name, needed in Counter(cluster.slot_types).items():
        available = sum(1 for v in usable if canonical(v.type_name) == type_name)
        score *= min(available / needed, 1.0)
    return score


def cls_score(mns_value, vas_value, coefficients):
    c = coefficients
    return (c.c_mns * mns_value + c.c_vas * vas_value) / (c.c_mns + c.c_vas)


@dataclass(frozen=True)
class Mapping:
    cluster_id: int
    location: object
    mns: float
    vas: float
    cls: float


def candidate_locations(cluster, analysis, canonical=None):
    """
    各メソッド本体の末尾（最後の return の前）と、
    クラスタが必要とする型の変数を定義・代入した文の直後
    """
    canonical = canonical or (lambda t: t)
    wanted = set(cluster.slot_types)
    found = {}
    program = analysis.program
    for qname in sorted(program.methods):
        top = [b for b in analysis.method_blocks(qname) if b.block_path == ()]
        if top:
            last = top[-1]
            loc = analysis.location(last.scope_id, last.max_offset)
            found[loc.key] = loc
        if not wanted:
            continue
        owner = analysis.owner_class(qname)
        for path, index, stmt in iter_statements(program.methods[qname].body):
            if isinstance(stmt, LocalDecl):
                type_name = analysis.resolve_type(stmt.type_name, owner)
            elif isinstance(stmt, Assign):
                type_name = analysis.expr_type(qname, stmt.target)
            else:
                continue
            if type_name is None or canonical(type_name) not in wanted:
                continue
            try:
                loc = analysis.location_at(qname, path, index + 1)
            except InvalidLocation:
                continue
            found[loc.key] = loc
    return [found[k] for k in sorted(found)]


def score_locations(cluster, analysis, coefficients, canonical=None):
    """クラスタの配置候補を CLS 降順で"""
    mappings = []
    for loc in candidate_locations(cluster, analysis, canonical):
        name = analysis.program.methods[loc.method_qname].name
        m = mns(cluster.label, name)
        v = vas(cluster, loc, analysis, canonical)
        mappings.append(Mapping(cluster.id, loc, m, v, cls_score(m, v, coefficients)))
    mappings.sort(key=lambda mp: (-mp.cls, mp.location.key))
    return mappings


# ============================================================
# 大域スコア
# ============================================================

def _locations(plan):
    items = plan.mappings if hasattr(plan, "mappings") else plan
    return [getattr(item, "location", item) for item in items]


def cqs(plan):
    hosts = Counter(loc.method_qname for loc in _locations(plan))
    if not hosts:
        return 0.0
    return math.fsum(1.0 / count for count in hosts.values()) / len(hosts)


def ccs(plan, analysis):
    """各ホストメソッドの Ce/(Ce+Ca) の平均（Ce=呼び出し先数, Ca=呼び出し元数）"""
    hosts = sorted({loc.method_qname for loc in _locations(plan)})
    if not hosts:
        return 0.0
    terms = []
    for host in hosts:
        ce, ca = len(analysis.callees(host)), len(analysis.callers(host))
        terms.append(ce / (ce + ca) if ce + ca else 0.0)
    return math.fsum(terms) / len(hosts)


def _ordered(a, b, acyclic, analysis):
    if a.scope_id == b.scope_id:
        return a.statement_index < b.statement_index or (a.statement_index == b.statement_index and acyclic)
    return analysis.executes_before(a.scope_id, b.scope_id)


def cds(plan, branch, analysis, planner=None, canonical=None):
    locations = {item.cluster_id: item.location for item in plan.mappings} \
        if hasattr(plan, "mappings") else dict(plan)
    planner = planner or ChannelPlanner(analysis, canonical)
    acyclic = nx.is_directed_acyclic_graph(branch.cluster_graph)
    for ice in branch.inter_cluster_edges:
        for cid in (ice.src_cluster, ice.dst_cluster):
            if cid not in locations:
                raise UnknownCluster(cid)
        if not _ordered(locations[ice.src_cluster], locations[ice.dst_cluster], acyclic, analysis):
            return 0
    for feed in branch.feeds:
        if feed.slot is None:
            continue
        if planner.plan(locations[feed.src_cluster], locations[feed.dst_cluster], feed.slot.type_name) is None:
            return 0
    return 1


def cas(cqs_value, mean_cls, cds_value, coefficients):
    if not cds_value:
        return 0.0
    c = coefficients
    return (c.c_cqs * cqs_value + c.c_cls * mean_cls) / (c.c_cqs + c.c_cls)


@dataclass(frozen=True)
class MappingSet:
    branch_index: int
    mappings: tuple
    mean_cls: float
    cqs: float
    cds: int
    cas: float

    @property
    def sort_key(self):
        return (-self.cas, -self.cqs, tuple(m.location.key for m in self.mappings))

    def location_of(self, cluster_id):
        for m in self.mappings:
            if m.cluster_id == cluster_id:
                return m.location
        raise UnknownCluster(cluster_id)


# ============================================================
# ランキング
# ============================================================

def best_first(per_cluster, evaluate, coefficients, branch_index=0):
    """
    per_cluster: クラスタごとの Mapping（CLS 降順）
    evaluate(mappings) -> (cqs, cds)
    平均 CLS の大きい順にインデックスの組を取り出し、CAS 上位 listCap 件を返す
    """
    if not per_cluster or any(not options for options in per_cluster):
        raise NoFeasibleMapping("some cluster has no candidate location")
    c = coefficients
    n = len(per_cluster)

    def mean_of(idx):
        return math.fsum(per_cluster[i][j].cls for i, j in enumerate(idx)) / n

    start = (0,) * n
    frontier = [(-mean_of(start), start)]
    seen = {start}
    results = []
    feasible = 0
    pops = 0
    budget = c.list_cap * n
    while frontier:
        neg_mean, idx = heapq.heappop(frontier)
        pops += 1
        mappings = tuple(per_cluster[i][j] for i, j in enumerate(idx))
        q, d = evaluate(mappings)
        score = cas(q, -neg_mean, d, c)
        if d:
            feasible += 1
            results.append(MappingSet(branch_index, mappings, -neg_mean, q, d, score))
        for i in range(n):
            if idx[i] + 1 < len(per_cluster[i]):
                nxt = idx[:i] + (idx[i] + 1,) + idx[i + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(frontier, (-mean_of(nxt), nxt))

        if not feasible and pops >= budget:
            break
        if pops >= c.explore_limit:
            logger.warning(f"best-first search stopped at explore limit {c.explore_limit}")
            break
        if len(results) >= c.list_cap and frontier:
            kth = sorted((r.cas for r in results), reverse=True)[c.list_cap - 1]
            bound = (c.c_cqs * 1.0 + c.c_cls * -frontier[0][0]) / (c.c_cqs + c.c_cls)
            if bound < kth:
                break

    if not feasible:
        raise NoFeasibleMapping(f"no dependency-satisfying mapping among {pops} explored")
    results.sort(key=lambda r: r.sort_key)
    logger.info(f"best-first: {pops} explored, {feasible} feasible, top CAS {results[0].cas:.4f}")
    return results[:c.list_cap]


def rank_mapping_sets(branch, analysis, coefficients=None, fspec=None):
    coefficients = coefficients or Coefficients()
    canonical = fspec.canonical if fspec is not None else None
    planner = ChannelPlanner(analysis, canonical)
    per_cluster = [score_locations(cluster, analysis, coefficients, canonical) for cluster in branch.clusters]
    for cluster, options in zip(branch.clusters, per_cluster):
        logger.debug(f"cluster {cluster.id} {cluster.label}: {len(options)} candidate locations")

    def evaluate(mappings):
        placed = {m.cluster_id: m.location for m in mappings}
        return cqs(mappings), cds(placed.items(), branch, analysis, planner)

    return best_first(per_cluster, evaluate, coefficients, branch.index)


def render_ranking(ranked, limit: Optional[int] = None):
    lines = []
    for rank, ms in enumerate(ranked[:limit] if limit else ranked, start=1):
        placed = " ".join(f"{m.cluster_id}@{m.location}" for m in ms.mappings)
        lines.append(f"rank {rank} cas={ms.cas:.4f} cqs={ms.cqs:.4f} cds={ms.cds} "
                     f"cls={ms.mean_cls:.4f} {placed}")
    return lines
