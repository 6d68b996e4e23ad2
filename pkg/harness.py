"""
harness.py - 評価（HR@K / MRR）と適合度チェック
=====================================================
【設計意図】
- データセットはタスクごとのディレクトリ（.mj ソース + label.rec）
- ランキングの各 MappingSet は、全クラスタの配置行がラベルの範囲に入れば「正解」
- rank 1 の織り込み結果について構文（再パースできるか）と意味（正解 + 適合度 1.0）を判定
- 適合度: プログラムから FSpec の API 呼び出しとその間の制御・データ依存を取り出し、
  ブランチのノード・エッジのうち見つかった割合

【label.rec】
task T01
piece #Initialization file=JaasImplementor.mj lines=12-20
=====================================================
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from analysis import analyze
from annotator import Coefficients
from db import get_session_context, init_db
from errors import EmptyDataset, FormatError, IpweaveError, MissingLabel
from fspec import strip_label
from minilang import New, SOURCE_SUFFIX, parse_program, parse_sources
from models import EvalRun, TaskOutcome
from synthesizer import score, synthesize_from
from variables import SynthesisConfig

logger = logging.getLogger(__name__)

K_VALUES = (1, 2, 3, 4, 5, 10, 50, 100)
LABEL_FILE = "label.rec"


# ============================================================
# 指標
# ============================================================

def hr_at_k(ranks, k):
    if not ranks:
        raise EmptyDataset("rank list")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = sum(1 for r in ranks if r is not None and r <= k)
    return 100.0 * hits / len(ranks)


def mrr(ranks):
    if not ranks:
        raise EmptyDataset("rank list")
    return math.fsum(1.0 / r for r in ranks if r is not None) / len(ranks)


# ============================================================
# ラベル
# ============================================================

@dataclass
class TaskLabel:
    task_id: str
    pieces: dict = field(default_factory=dict)   # 注釈（# なし）-> [(file, ((a, b), ...))]

    def accepts(self, annotation, file, line):
        for path, ranges in self.pieces.get(strip_label(annotation), ()):
            if path == file and any(a <= line <= b for a, b in ranges):
                return True
        return False


def _ranges(text, number):
    ranges = []
    for part in text.split(","):
        low, sep, high = part.partition("-")
        try:
            a, b = int(low), int(high if sep else low)
        except ValueError:
            raise FormatError(f"bad line range {part!r}", number)
        if a < 1 or b < a:
            raise FormatError(f"bad line range {part!r}", number)
        ranges.append((a, b))
    return tuple(ranges)


def parse_label(text, default_id=""):
    label = TaskLabel(default_id)
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        if tokens[0] == "task" and len(tokens) == 2:
            label.task_id = tokens[1]
        elif tokens[0] == "piece" and len(tokens) >= 3:
            fields = dict(tok.partition("=")[::2] for tok in tokens[2:])
            if "file" not in fields or "lines" not in fields:
                raise FormatError("piece needs file= and lines=", number)
            label.pieces.setdefault(strip_label(tokens[1]), []).append(
                (fields["file"], _ranges(fields["lines"], number)))
        else:
            raise FormatError(f"unknown label record {raw.strip()!r}", number)
    return label


def load_label(task_dir):
    path = Path(task_dir) / LABEL_FILE
    if not path.is_file():
        raise MissingLabel(Path(task_dir).name)
    return parse_label(path.read_text(encoding="utf-8"), Path(task_dir).name)


def is_correct(mapping_set, branch, analysis, label):
    for m in mapping_set.mappings:
        cluster = branch.cluster(m.cluster_id)
        if not label.accepts(cluster.label, analysis.file_of(m.location), analysis.location_line(m.location)):
            return False
    return True


def first_correct_rank(ranked, branch, analysis, label):
    for rank, ms in enumerate(ranked, start=1):
        if is_correct(ms, branch, analysis, label):
            return rank
    return None


# ============================================================
# 適合度チェック
# ============================================================

@dataclass
class ConformanceReport:
    node_matches: dict          # node_id -> bool
    edge_matches: dict          # (src, dst, kind) -> bool
    intra: set                  # クラスタ内エッジの key

    def _count(self, inside, kind):
        keys = [k for k in self.edge_matches if (k in self.intra) == inside and k[2] == kind]
        return sum(1 for k in keys if self.edge_matches[k]), len(keys)

    @property
    def score(self):
        total = len(self.node_matches) + len(self.edge_matches)
        if not total:
            return 0.0
        matched = sum(self.node_matches.values()) + sum(self.edge_matches.values())
        return matched / total

    def lines(self):
        nodes = sum(self.node_matches.values())
        out = [f"api {nodes}/{len(self.node_matches)}"]
        for name, inside, kind in (("I-control", True, "control"), ("I-data", True, "data"),
                                   ("E-control", False, "control"), ("E-data", False, "data")):
            matched, total = self._count(inside, kind)
            out.append(f"{name} {matched}/{total}")
        for (src, dst, kind), ok in sorted(self.edge_matches.items()):
            if not ok:
                out.append(f"missing edge {src}->{dst} kind={kind}")
        for node_id, ok in sorted(self.node_matches.items()):
            if not ok:
                out.append(f"missing api {node_id}")
        out.append(f"score {self.score:.4f}")
        return out


def _occurrence_matches(node, occ, fspec, analysis):
    expr = occ.expr
    if len(expr.args) != len(node.param_types):
        return False
    if node.is_constructor:
        if not isinstance(expr, New):
            return False
        resolved = analysis.resolve_type(expr.type_name, analysis.owner_class(occ.method_qname))
        return fspec.same_type(resolved, node.owner_type)
    if isinstance(expr, New) or expr.name != node.member_name:
        return False
    return fspec.same_type(occ.receiver_type, node.owner_type)


def conformance_report(program, fspec, branch):
    analysis = analyze(program)
    flow = analysis.value_flow
    occurrences = {
        node_id: [o for o in flow.occurrences if _occurrence_matches(fspec.node(node_id), o, fspec, analysis)]
        for node_id in branch.node_ids
    }

    def before(a, b):
        if a.scope_id == b.scope_id:
            return a.order_key < b.order_key
        return analysis.executes_before(a.scope_id, b.scope_id)

    edges = {}
    intra = set()
    for edge in branch.edges:
        key = (edge.src, edge.dst, edge.kind)
        pairs = [(a, b) for a in occurrences[edge.src] for b in occurrences[edge.dst]]
        if edge.kind == "data":
            edges[key] = any(flow.flows(a.node, b.node) for a, b in pairs)
        else:
            edges[key] = any(before(a, b) for a, b in pairs)
        if branch.cluster_of(edge.src).id == branch.cluster_of(edge.dst).id:
            intra.add(key)
    nodes = {node_id: bool(found) for node_id, found in occurrences.items()}
    return ConformanceReport(nodes, edges, intra)


def conformance_score(program, fspec, branch):
    return conformance_report(program, fspec, branch).score


# ============================================================
# 評価
# ============================================================

@dataclass
class TaskOutcomeRow:
    task_id: str
    rank: Optional[int]
    syntax_ok: bool
    semantic_ok: bool
    conformance: float
    seconds: float = 0.0


@dataclass
class EvalResult:
    dataset: str
    criterion: str
    outcomes: list

    @property
    def ranks(self):
        return [o.rank for o in self.outcomes]

    @property
    def hr(self):
        return {k: hr_at_k(self.ranks, k) for k in K_VALUES}

    @property
    def mrr(self):
        return mrr(self.ranks)

    def records(self):
        lines = [f"hr k={k} value={value:.1f}" for k, value in self.hr.items()]
        lines.append(f"mrr value={self.mrr:.4f}")
        for o in self.outcomes:
            lines.append(f"task {o.task_id} rank={o.rank if o.rank is not None else '-'} "
                         f"syntax={'ok' if o.syntax_ok else 'fail'} "
                         f"semantic={'ok' if o.semantic_ok else 'fail'} conf={o.conformance:.4f}")
        return lines

    def summary_row(self):
        hr = self.hr
        return (f"{self.criterion:<4} " + " ".join(f"hr@{k}={hr[k]:.1f}" for k in K_VALUES)
                + f" mrr={self.mrr:.4f}")


def task_dirs(dataset_dir):
    root = Path(dataset_dir)
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and any(p.rglob(f"*{SOURCE_SUFFIX}"))) \
        if root.is_dir() else []
    if not dirs:
        raise EmptyDataset(str(root))
    return dirs


def evaluate_task(task_dir, fspec, config, coefficients):
    started = time.perf_counter()
    label = load_label(task_dir)
    program = parse_program(task_dir)
    task_id = label.task_id or Path(task_dir).name
    try:
        scored = score(program, fspec, config, coefficients=coefficients)
    except IpweaveError as e:
        logger.warning(f"task {task_id}: no ranking ({e})")
        return TaskOutcomeRow(task_id, None, False, False, 0.0, time.perf_counter() - started)

    rank = first_correct_rank(scored.ranked, scored.branch, scored.analysis, label)
    syntax_ok = semantic_ok = False
    conformance = 0.0
    try:
        result = synthesize_from(scored, program, fspec, 1)
        woven = parse_sources(result.files, root=program.root)
        syntax_ok = True
        conformance = conformance_score(woven, fspec, scored.branch)
        semantic_ok = (is_correct(result.mapping_set, scored.branch, scored.analysis, label)
                       and conformance == 1.0)
    except IpweaveError as e:
        logger.warning(f"task {task_id}: rank-1 weave failed ({e})")
    seconds = time.perf_counter() - started
    logger.info(f"task {task_id}: rank={rank} syntax={syntax_ok} semantic={semantic_ok} "
                f"conf={conformance:.4f} ({seconds:.2f}s)")
    return TaskOutcomeRow(task_id, rank, syntax_ok, semantic_ok, conformance, seconds)


def evaluate(dataset_dir, fspec, config=None, criterion="cas", out_dir=None):
    config = config or SynthesisConfig()
    coefficients = Coefficients.for_criterion(criterion, config)
    outcomes = [evaluate_task(d, fspec, config, coefficients) for d in task_dirs(dataset_dir)]
    result = EvalResult(str(dataset_dir), criterion, outcomes)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.rec").write_text("\n".join(result.records()) + "\n", encoding="utf-8")
    logger.info(f"evaluated {len(outcomes)} tasks ({criterion}): hr@1={result.hr[1]:.1f} mrr={result.mrr:.4f}")
    return result


# ============================================================
# 記録
# ============================================================

def record_run(result, fspec_name):
    init_db()
    hr = result.hr
    with get_session_context() as session:
        run = EvalRun(
            dataset=result.dataset,
            fspec_name=fspec_name,
            criterion=result.criterion,
            mrr=result.mrr,
            hr_at_1=hr[1],
            hr_at_5=hr[5],
            hr_at_100=hr[100],
            task_count=len(result.outcomes),
        )
        session.add(run)
        session.flush()
        session.add_all([
            TaskOutcome(run_id=run.id, task_id=o.task_id, rank=o.rank, syntax_ok=o.syntax_ok,
                        semantic_ok=o.semantic_ok, conformance=o.conformance)
            for o in result.outcomes
        ])
        session.commit()
        logger.info(f"recorded evaluation run {run.id} ({result.criterion}, {len(result.outcomes)} tasks)")
        return run.id


def list_runs(limit=20):
    init_db()
    with get_session_context() as session:
        runs = (session.query(EvalRun)
                .order_by(EvalRun.created_at.desc(), EvalRun.id.desc())
                .limit(limit)
                .all())
        return [
            {
                "id": run.id,
                "created_at": run.created_at.isoformat() if run.created_at else None,
                "dataset": run.dataset,
                "fspec": run.fspec_name,
                "criterion": run.criterion,
                "mrr": run.mrr,
                "hr_at_1": run.hr_at_1,
                "hr_at_5": run.hr_at_5,
                "hr_at_100": run.hr_at_100,
                "tasks": run.task_count,
            }
            for run in runs
        ]
