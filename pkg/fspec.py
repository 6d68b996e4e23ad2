"""
fspec.py - フレームワーク API 仕様グラフ（FSpec）
=====================================================
【設計意図】
- FSpec = API 呼び出しをノード、データ/制御依存をエッジとする DAG
- ファイル形式（行単位, `#` コメント）を読み書きし、読み込み時に検証する
  (非巡回, 全ノードが start→end 経路上, 未知ノードへのエッジなし)
- ブランチ = start→end の 1 経路 = 正しい使い方の 1 つ
- ブランチのノードを注釈の編集距離でクラスタリングし、
  クラスタ（= サブタスク）ごとに未充足のスロットを計算する

【ファイル形式】
    fspec <name>
    interface <typeName>
    alias <typeName> <canonicalTypeName>
    node <id> kind=<constructor|instance|static> class=<fqcn> method=<name>
         params=<t1,t2|-> return=<type|void> annotation=<label>
    edge <src> <dst> kind=<data|control> freq=<int>
    start <id> [<id>...]
    end <id> [<id>...]
=====================================================
"""

import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Optional

import networkx as nx

from errors import CycleError, DanglingEdgeError, FormatError, MissingAnnotation, UnreadableFile
from variables import TAU

logger = logging.getLogger(__name__)

# ファイル上の kind → ApiNode.kind
KIND_NAMES = {
    "constructor": "constructor",
    "instance": "instanceMethod",
    "static": "staticMethod",
}
FILE_KINDS = {v: k for k, v in KIND_NAMES.items()}

EDGE_KINDS = ("data", "control")
CONSTRUCTOR_NAME = "<init>"

TARGET = "target"
ARGUMENT = "argument"


# ============================================================
# 編集距離
# ============================================================

def levenshtein(a, b):
    """大文字小文字を区別する編集距離（挿入・削除・置換いずれもコスト 1）"""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def strip_label(label):
    return label[1:] if label.startswith("#") else label


def label_distance(a, b):
    return levenshtein(strip_label(a), strip_label(b))


_CAMEL = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z0-9]+")


def fallback_annotation(node):
    """注釈のない API はメンバー名をキャメルケースで分割したものを注釈にする"""
    constructor = node.is_constructor or node.member_name == CONSTRUCTOR_NAME
    name = node.owner_type.rsplit(".", 1)[-1] if constructor else node.member_name
    parts = _CAMEL.findall(name)
    return "_".join(parts) if parts else name


# ============================================================
# モデル
# ============================================================

@dataclass(frozen=True)
class ApiNode:
    id: int
    owner_type: str
    member_name: str
    kind: str                   # constructor / instanceMethod / staticMethod
    param_types: tuple = ()
    return_type: str = "void"
    annotation: Optional[str] = None

    @property
    def is_constructor(self):
        return self.kind == "constructor"

    @property
    def is_instance(self):
        return self.kind == "instanceMethod"

    @property
    def produced_type(self):
        """呼び出し結果の型（void なら None）"""
        if self.is_constructor:
            return self.owner_type
        return None if self.return_type == "void" else self.return_type

    @property
    def signature(self):
        name = self.owner_type.rsplit(".", 1)[-1] if self.is_constructor else self.member_name
        return f"{self.owner_type.rsplit('.', 1)[-1]}.{name}({', '.join(self.param_types)})"


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str
    freq: int = 1


@dataclass(frozen=True)
class FSpec:
    name: str
    nodes: tuple
    edges: tuple
    start_ids: tuple
    end_ids: tuple
    aliases: tuple = ()         # ((typeName, canonical), ...)
    interfaces: tuple = ()

    @cached_property
    def node_map(self):
        return {n.id: n for n in self.nodes}

    @cached_property
    def type_aliases(self):
        return dict(self.aliases)

    @cached_property
    def graph(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(self.node_map)
        for edge in self.edges:
            if graph.has_edge(edge.src, edge.dst):
                graph[edge.src][edge.dst]["freq"] += edge.freq
            else:
                graph.add_edge(edge.src, edge.dst, freq=edge.freq)
        return graph

    def node(self, node_id):
        return self.node_map[node_id]

    def canonical(self, type_name):
        return self.type_aliases.get(type_name, type_name)

    def same_type(self, a, b):
        return a is not None and b is not None and self.canonical(a) == self.canonical(b)

    def concrete_type(self, type_name):
        """インタフェース型なら alias で指定された具象型、なければ None"""
        if type_name not in self.interfaces:
            return type_name
        for alias, canonical in self.aliases:
            if canonical == type_name and alias not in self.interfaces:
                return alias
        return None

    def edges_between(self, node_ids):
        members = set(node_ids)
        return tuple(e for e in self.edges if e.src in members and e.dst in members)


# ============================================================
# 読み込み・保存
# ============================================================

def _fields(tokens, line):
    result = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not value:
            raise FormatError(f"expected key=value, got {token!r}", line)
        result[key] = value
    return result


def _int(text, line, what):
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{what} must be an integer, got {text!r}", line)


def parse_fspec(text, source="<memory>"):
    name = None
    nodes, edges, starts, ends, aliases, interfaces = {}, [], [], [], {}, []
    edge_lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        head, *rest = line.split()
        if head == "fspec":
            if len(rest) != 1:
                raise FormatError("expected 'fspec <name>'", number)
            name = rest[0]
        elif head == "interface":
            if len(rest) != 1:
                raise FormatError("expected 'interface <typeName>'", number)
            interfaces.append(rest[0])
        elif head == "alias":
            if len(rest) != 2:
                raise FormatError("expected 'alias <typeName> <canonicalTypeName>'", number)
            aliases[rest[0]] = rest[1]
        elif head == "node":
            node = _parse_node(rest, number)
            if node.id in nodes:
                raise FormatError(f"duplicate node id {node.id}", number)
            nodes[node.id] = node
        elif head == "edge":
            if len(rest) != 4:
                raise FormatError("expected 'edge <src> <dst> kind=<k> freq=<n>'", number)
            attrs = _fields(rest[2:], number)
            kind = attrs.get("kind")
            if kind not in EDGE_KINDS:
                raise FormatError(f"edge kind must be data or control, got {kind!r}", number)
            freq = _int(attrs.get("freq", ""), number, "freq")
            if freq < 1:
                raise FormatError(f"freq must be >= 1, got {freq}", number)
            edges.append(Edge(_int(rest[0], number, "src"), _int(rest[1], number, "dst"), kind, freq))
            edge_lines.append(number)
        elif head in ("start", "end"):
            if not rest:
                raise FormatError(f"'{head}' needs at least one node id", number)
            (starts if head == "start" else ends).extend(_int(t, number, head) for t in rest)
        else:
            raise FormatError(f"unknown record {head!r}", number)

    for edge, number in zip(edges, edge_lines):
        if edge.src not in nodes or edge.dst not in nodes:
            raise DanglingEdgeError(edge.src, edge.dst, number)
    for node_id in starts + ends:
        if node_id not in nodes:
            raise FormatError(f"start/end references unknown node {node_id}")
    if not nodes:
        raise FormatError(f"{source}: no nodes")
    if not starts or not ends:
        raise FormatError(f"{source}: missing start or end record")

    fspec = FSpec(
        name=name or Path(str(source)).stem,
        nodes=tuple(nodes[i] for i in sorted(nodes)),
        edges=tuple(edges),
        start_ids=tuple(sorted(set(starts))),
        end_ids=tuple(sorted(set(ends))),
        aliases=tuple(sorted(aliases.items())),
        interfaces=tuple(sorted(set(interfaces))),
    )
    validate(fspec)
    return fspec


def _strip_comment(line):
    # 注釈ラベル（annotation=#Init）の # はコメントではない
    out = []
    for token in line.split():
        if token.startswith("#"):
            break
        out.append(token)
    return " ".join(out)


def _parse_node(tokens, line):
    if not tokens:
        raise FormatError("expected 'node <id> key=value...'", line)
    node_id = _int(tokens[0], line, "node id")
    attrs = _fields(tokens[1:], line)
    for key in ("kind", "class", "method"):
        if key not in attrs:
            raise FormatError(f"node {node_id} lacks {key}=", line)
    if attrs["kind"] not in KIND_NAMES:
        raise FormatError(f"node kind must be constructor, instance or static, got {attrs['kind']!r}", line)
    kind = KIND_NAMES[attrs["kind"]]
    params = attrs.get("params", "-")
    param_types = () if params == "-" else tuple(params.split(","))
    owner = attrs["class"]
    return_type = attrs.get("return", owner if kind == "constructor" else "void")
    if kind == "constructor" and return_type != owner:
        raise FormatError(f"constructor node {node_id} must return {owner}", line)
    return ApiNode(node_id, owner, attrs["method"], kind, param_types, return_type, attrs.get("annotation"))


def validate(fspec):
    graph = fspec.graph
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        raise CycleError(f"FSpec {fspec.name} has a cycle through {[u for u, _ in cycle]}")
    reachable = set()
    for start in fspec.start_ids:
        reachable |= nx.descendants(graph, start) | {start}
    coreachable = set()
    for end in fspec.end_ids:
        coreachable |= nx.ancestors(graph, end) | {end}
    stray = sorted(set(fspec.node_map) - (reachable & coreachable))
    if stray:
        raise FormatError(f"nodes {stray} lie on no start->end path")
    return fspec


def load_fspec(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise UnreadableFile(path, e.strerror if isinstance(e, OSError) else "not UTF-8 text")
    fspec = parse_fspec(text, source=path)
    logger.info(f"loaded FSpec {fspec.name}: {len(fspec.nodes)} nodes, {len(fspec.edges)} edges")
    return fspec


def render_fspec(fspec):
    lines = [f"fspec {fspec.name}"]
    lines += [f"interface {t}" for t in fspec.interfaces]
    lines += [f"alias {t} {c}" for t, c in fspec.aliases]
    for node in fspec.nodes:
        params = ",".join(node.param_types) or "-"
        text = (f"node {node.id} kind={FILE_KINDS[node.kind]} class={node.owner_type} "
                f"method={node.member_name} params={params} return={node.return_type}")
        if node.annotation is not None:
            text += f" annotation={node.annotation}"
        lines.append(text)
    lines += [f"edge {e.src} {e.dst} kind={e.kind} freq={e.freq}" for e in fspec.edges]
    lines.append("start " + " ".join(str(i) for i in fspec.start_ids))
    lines.append("end " + " ".join(str(i) for i in fspec.end_ids))
    return "\n".join(lines) + "\n"


def save_fspec(fspec, path):
    Path(path).write_text(render_fspec(fspec), encoding="utf-8")


# ============================================================
# クラスタリング
# ============================================================

@dataclass(frozen=True)
class Slot:
    node_id: int
    position: int       # 0 = レシーバ, i+1 = 第 i 引数
    type_name: str
    role: str


@dataclass(frozen=True)
class Cluster:
    id: int
    label: str
    member_ids: tuple
    internal_edges: tuple
    slots: tuple

    @property
    def slot_types(self):
        return tuple(s.type_name for s in self.slots)


@dataclass(frozen=True)
class Merge:
    left: frozenset
    right: frozenset
    distance: int


@dataclass(frozen=True)
class Clustering:
    groups: tuple           # τ で止めた時点の分割（各要素はノード ID のタプル）
    greedy_groups: tuple    # 貪欲ペアリング直後の分割
    merges: tuple           # 根まで続けた併合の履歴
    labels: dict = field(compare=False, hash=False)


def node_positions(node):
    """(position, type, role) をレシーバ、引数の順に"""
    positions = []
    if node.is_instance:
        positions.append((0, node.owner_type, TARGET))
    positions += [(i + 1, t, ARGUMENT) for i, t in enumerate(node.param_types)]
    return positions


def fill_positions(fspec, member_ids, edges):
    """
    メンバーのシグネチャ上の位置を、データエッジが運ぶ値で埋める
    戻り値: ({(node_id, position): 供給元ノード}, [未充足 Slot])
    """
    filled = {}
    ordered = sorted(edges, key=lambda e: (e.dst, e.src))
    for edge in ordered:
        if edge.kind != "data":
            continue
        produced = fspec.node(edge.src).produced_type
        consumer = fspec.node(edge.dst)
        for position, type_name, _ in node_positions(consumer):
            if (edge.dst, position) not in filled and fspec.same_type(type_name, produced):
                filled[(edge.dst, position)] = edge.src
                break
        else:
            logger.warning(f"data edge {edge.src}->{edge.dst} matches no open position of {consumer.signature}")
    slots = []
    for node_id in member_ids:
        for position, type_name, role in node_positions(fspec.node(node_id)):
            if (node_id, position) not in filled:
                slots.append(Slot(node_id, position, fspec.canonical(type_name), role))
    return filled, slots


def annotations_of(nodes, fallback=True):
    labels = {}
    for node in nodes:
        if node.annotation:
            labels[node.id] = node.annotation
        elif fallback:
            labels[node.id] = fallback_annotation(node)
            logger.warning(f"node {node.id} has no annotation; using {labels[node.id]!r}")
        else:
            raise MissingAnnotation(node.id)
    return labels


def _pick_label(group, labels):
    def total(node_id):
        return sum(label_distance(labels[node_id], labels[other]) for other in group)
    return min((total(n), strip_label(labels[n]), labels[n]) for n in group)[2]


def cluster_nodes(nodes, tau=TAU, fallback=True):
    """
    1. 注釈間距離の昇順に、τ 以下のペアを貪欲にクラスタ化
       （選んだペアの API を含む残りのペアは捨てる）
    2. 単連結で併合。最小距離が τ を超えた時点の分割を記録し、根まで続ける
    """
    order = [n.id for n in nodes]
    rank = {node_id: i for i, node_id in enumerate(order)}
    labels = annotations_of(nodes, fallback)

    pairs = sorted(
        (label_distance(labels[a], labels[b]), rank[a], rank[b], a, b)
        for a, b in combinations(order, 2)
    )
    used = set()
    groups = []
    for distance, _, _, a, b in pairs:
        if distance > tau:
            break
        if a in used or b in used:
            continue
        groups.append(frozenset((a, b)))
        used |= {a, b}
    groups += [frozenset((n,)) for n in order if n not in used]
    greedy = _ordered_groups(groups, rank)

    merges = []
    flat = None
    current = list(groups)
    while len(current) > 1:
        candidates = []
        for i, j in combinations(range(len(current)), 2):
            linkage = min(label_distance(labels[a], labels[b]) for a in current[i] for b in current[j])
            firsts = sorted((min(rank[n] for n in current[i]), min(rank[n] for n in current[j])))
            candidates.append((linkage, firsts, i, j))
        linkage, _, i, j = min(candidates)
        if linkage > tau and flat is None:
            flat = list(current)
        merges.append(Merge(current[i], current[j], linkage))
        merged = current[i] | current[j]
        current = [g for k, g in enumerate(current) if k not in (i, j)] + [merged]
    if flat is None:
        flat = current

    return Clustering(_ordered_groups(flat, rank), greedy, tuple(merges), labels)


def _ordered_groups(groups, rank):
    ordered = [tuple(sorted(g, key=rank.get)) for g in groups]
    return tuple(sorted(ordered, key=lambda g: rank[g[0]]))


def build_clusters(fspec, clustering):
    clusters = []
    for index, group in enumerate(clustering.greedy_groups, start=1):
        internal = fspec.edges_between(group)
        _, slots = fill_positions(fspec, group, internal)
        label = _pick_label(group, clustering.labels)
        clusters.append(Cluster(index, label, group, internal, tuple(slots)))
    return clusters


def cluster_branch(fspec, node_ids, tau=TAU, fallback=True):
    """ブランチのノード列をクラスタに分ける -> (Cluster のリスト, Clustering)"""
    nodes = [fspec.node(n) for n in node_ids]
    clustering = cluster_nodes(nodes, tau, fallback)
    return build_clusters(fspec, clustering), clustering


# ============================================================
# ブランチ
# ============================================================

@dataclass(frozen=True)
class InterClusterEdge:
    src_cluster: int
    dst_cluster: int
    kind: str
    edge: Edge


@dataclass(frozen=True)
class Feed:
    """クラスタ間データエッジが埋める消費側のスロット"""
    edge: Edge
    src_cluster: int
    dst_cluster: int
    slot: Optional[Slot]


@dataclass(frozen=True)
class Branch:
    index: int
    node_ids: tuple
    weight: int
    edges: tuple
    clusters: tuple
    inter_cluster_edges: tuple
    feeds: tuple
    clustering: Clustering = field(compare=False, hash=False)

    def cluster(self, cluster_id):
        for cluster in self.clusters:
            if cluster.id == cluster_id:
                return cluster
        raise KeyError(cluster_id)

    def cluster_of(self, node_id):
        for cluster in self.clusters:
            if node_id in cluster.member_ids:
                return cluster
        raise KeyError(node_id)

    @property
    def cluster_graph(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(c.id for c in self.clusters)
        graph.add_edges_from((e.src_cluster, e.dst_cluster) for e in self.inter_cluster_edges)
        return graph

    def feeds_into(self, cluster_id):
        return [f for f in self.feeds if f.dst_cluster == cluster_id]


def branch_paths(fspec):
    """推移簡約したグラフ上の start→end 経路を (重み降順, ノード列) で並べる"""
    reduced = nx.transitive_reduction(fspec.graph)
    paths = []
    for start in fspec.start_ids:
        for end in fspec.end_ids:
            if start == end:
                paths.append((start,))
                continue
            for path in nx.all_simple_paths(reduced, start, end):
                paths.append(tuple(path))
    weighted = []
    for path in set(paths):
        weight = sum(fspec.graph[u][v]["freq"] for u, v in zip(path, path[1:]))
        weighted.append((weight, path))
    weighted.sort(key=lambda item: (-item[0], item[1]))
    return weighted


def make_branch(fspec, index, node_ids, weight, tau=TAU, fallback=True):
    clusters, clustering = cluster_branch(fspec, node_ids, tau, fallback)
    owner = {n: c.id for c in clusters for n in c.member_ids}
    edges = fspec.edges_between(node_ids)
    inter = tuple(InterClusterEdge(owner[e.src], owner[e.dst], e.kind, e)
                  for e in edges if owner[e.src] != owner[e.dst])

    feeds = []
    by_cluster = {c.id: c for c in clusters}
    taken = set()
    for ice in sorted(inter, key=lambda i: (i.edge.dst, i.edge.src)):
        if ice.kind != "data":
            continue
        produced = fspec.node(ice.edge.src).produced_type
        slot = None
        for candidate in by_cluster[ice.dst_cluster].slots:
            if candidate.node_id == ice.edge.dst and candidate not in taken \
                    and fspec.same_type(candidate.type_name, produced):
                slot = candidate
                taken.add(candidate)
                break
        feeds.append(Feed(ice.edge, ice.src_cluster, ice.dst_cluster, slot))
    return Branch(index, tuple(node_ids), weight, edges, tuple(clusters), inter, tuple(feeds), clustering)


def enumerate_branches(fspec, tau=TAU, fallback=True):
    branches = [make_branch(fspec, i, path, weight, tau, fallback)
                for i, (weight, path) in enumerate(branch_paths(fspec), start=1)]
    logger.info(f"FSpec {fspec.name}: {len(branches)} branches "
                f"(weights {[b.weight for b in branches]})")
    return branches


def render_branch(branch, fspec):
    lines = [f"branch {branch.index} weight={branch.weight} nodes={'-'.join(map(str, branch.node_ids))}"]
    for cluster in branch.clusters:
        members = ",".join(str(m) for m in cluster.member_ids)
        slots = ",".join(f"{s.type_name}:{s.role}" for s in cluster.slots) or "-"
        lines.append(f"cluster {cluster.id} label={cluster.label} members={members} slots={slots}")
    for ice in branch.inter_cluster_edges:
        lines.append(f"link {ice.src_cluster} {ice.dst_cluster} kind={ice.kind} "
                     f"via={ice.edge.src}->{ice.edge.dst}")
    for merge in branch.clustering.merges:
        left = ",".join(map(str, sorted(merge.left)))
        right = ",".join(map(str, sorted(merge.right)))
        lines.append(f"merge {{{left}}} {{{right}}} distance={merge.distance}")
    return lines
