"""
harness のテスト
- HR@K / MRR
- label.rec
- 適合度チェック
- レプリカデータセットの評価と記録
"""
import shutil

import pytest

from conftest import REPLICA
from db import drop_all_tables, get_session_context
from errors import EmptyDataset, FormatError, MissingLabel
from harness import (
    EvalResult, TaskOutcomeRow, conformance_report, conformance_score, evaluate, hr_at_k,
    list_runs, load_label, mrr, parse_label, record_run,
)
from minilang import parse_sources
from models import EvalRun
from synthesizer import synthesize


# ====================
# 指標
# ====================

def test_hit_ratio():
    assert hr_at_k([1, 3], 1) == 50.0
    assert hr_at_k([1, 3], 3) == 100.0
    assert hr_at_k([None, None], 100) == 0.0
    assert hr_at_k([1, 1, 1], 1) == 100.0


def test_mrr():
    assert mrr([1, 2, 4]) == pytest.approx((1 + 0.5 + 0.25) / 3)
    assert mrr([None]) == 0.0
    assert mrr([1, 1]) == 1.0


def test_empty_rank_list():
    with pytest.raises(EmptyDataset):
        hr_at_k([], 1)
    with pytest.raises(EmptyDataset):
        mrr([])


# ====================
# ラベル
# ====================

def test_parse_label():
    label = parse_label(
        "task T99\n"
        "piece #Initialization file=A.mj lines=3-5,9\n"
        "piece Logging_In file=b/B.mj lines=7-7\n"
    )
    assert label.task_id == "T99"
    assert label.accepts("#Initialization", "A.mj", 4)
    assert label.accepts("Initialization", "A.mj", 9)
    assert not label.accepts("#Initialization", "A.mj", 6)
    assert not label.accepts("#Initialization", "b/B.mj", 4)
    assert label.accepts("#Logging_In", "b/B.mj", 7)
    assert not label.accepts("#Subject_Inspection", "A.mj", 4)


@pytest.mark.parametrize("text, line", [
    ("task T1\nwhatever\n", 2),
    ("piece #X file=A.mj lines=5-3\n", 1),
    ("piece #X file=A.mj\n", 1),
])
def test_bad_label(text, line):
    with pytest.raises(FormatError) as e:
        parse_label(text)
    assert e.value.line == line


def test_missing_label(tmp_path):
    with pytest.raises(MissingLabel):
        load_label(tmp_path)


def test_replica_labels():
    label = load_label(REPLICA / "task10")
    assert label.task_id == "T10"
    assert label.accepts("#Logging_In", "app/auth/SessionManager.mj", 15)


# ====================
# 適合度
# ====================

def test_conformance_of_woven_program(task01, jaas_fspec, jaas_branch):
    woven = parse_sources(synthesize(task01, jaas_fspec).files)
    report = conformance_report(woven, jaas_fspec, jaas_branch)
    assert report.score == 1.0
    assert report.lines()[0] == "api 5/5"
    assert report.lines()[-1] == "score 1.0000"


def test_conformance_without_apis(task01, jaas_fspec, jaas_branch):
    assert conformance_score(task01, jaas_fspec, jaas_branch) == 0.0


def test_conformance_missing_call(task01, jaas_fspec, jaas_branch):
    files = synthesize(task01, jaas_fspec).files
    text = files["JaasImplementor.mj"]
    trimmed = "\n".join(line for line in text.splitlines() if "getPrincipals" not in line) + "\n"
    report = conformance_report(parse_sources({"JaasImplementor.mj": trimmed}), jaas_fspec, jaas_branch)
    assert 0.0 < report.score < 1.0
    assert "missing api 5" in report.lines()


# ====================
# 評価
# ====================

@pytest.fixture(scope="module")
def replica_eval(jaas_fspec):
    return evaluate(REPLICA, jaas_fspec)


def test_replica_evaluation(replica_eval):
    assert len(replica_eval.outcomes) == 10
    assert all(o.syntax_ok for o in replica_eval.outcomes)
    assert sum(o.semantic_ok for o in replica_eval.outcomes) >= 8
    hr = replica_eval.hr
    assert hr[1] >= 80.0
    assert replica_eval.mrr >= 0.85
    assert all(hr[a] <= hr[b] for a, b in zip(sorted(hr), sorted(hr)[1:]))
    assert replica_eval.mrr >= hr[1] / 100


def test_replica_conformance_and_budget(replica_eval):
    for o in replica_eval.outcomes:
        if o.syntax_ok:
            assert o.conformance == 1.0, o.task_id
        assert o.seconds < 1.0, o.task_id
    assert sum(o.seconds for o in replica_eval.outcomes) < 30.0


def test_single_task_dataset(tmp_path, jaas_fspec):
    shutil.copytree(REPLICA / "task01", tmp_path / "task01")
    result = evaluate(tmp_path, jaas_fspec, out_dir=tmp_path / "out")
    assert result.hr[1] == 100.0
    assert result.mrr == 1.0
    assert (tmp_path / "out" / "eval.rec").is_file()


def test_evaluation_records(replica_eval):
    records = replica_eval.records()
    assert records[0].startswith("hr k=1 value=")
    assert records[8].startswith("mrr value=")
    assert records[9].startswith("task T01 rank=")


def test_empty_dataset(tmp_path, jaas_fspec):
    with pytest.raises(EmptyDataset):
        evaluate(tmp_path, jaas_fspec)


def test_record_and_list_runs():
    drop_all_tables()
    result = EvalResult("replica", "cas", [
        TaskOutcomeRow("T01", 1, True, True, 1.0),
        TaskOutcomeRow("T02", None, True, False, 0.5),
    ])
    run_id = record_run(result, "jaas")
    runs = list_runs()
    assert [r["id"] for r in runs] == [run_id]
    mine = runs[0]
    assert mine["fspec"] == "jaas"
    assert mine["tasks"] == 2
    assert mine["hr_at_1"] == 50.0
    assert mine["mrr"] == pytest.approx(0.5)
    with get_session_context() as session:
        ranks = sorted((o.task_id, o.rank) for o in session.get(EvalRun, run_id).outcomes)
    assert ranks == [("T01", 1), ("T02", None)]
