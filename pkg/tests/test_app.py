"""
Flask API のテスト
- ソースと FSpec を JSON で渡して採点・合成・スケッチ
- 入力エラーは 400、配置できないときは 422
"""
import pytest

from app import app
from conftest import DATA, REPLICA


@pytest.fixture(scope="module")
def client():
    app.config["TESTING"] = True
    with app.test_client() as client:
        yield client


@pytest.fixture(scope="module")
def body():
    source = (REPLICA / "task01" / "JaasImplementor.mj").read_text(encoding="utf-8")
    return {
        "sources": {"JaasImplementor.mj": source},
        "fspec": (DATA / "jaas.fspec").read_text(encoding="utf-8"),
    }


def test_score(client, body):
    r = client.post("/api/score", json=body)
    assert r.status_code == 200
    j = r.get_json()
    assert j["branch"] == 1
    top = j["ranking"][0]
    assert top["rank"] == 1 and top["cds"] == 1
    assert [p["line"] for p in top["placements"]] == [18, 23, 27]
    assert [p["label"] for p in top["placements"]] == ["#Initialization", "#Logging_In", "#Subject_Inspection"]


def test_score_with_config(client, body):
    r = client.post("/api/score", json={**body, "config": {"listCap": 2}})
    assert r.status_code == 200
    assert len(r.get_json()["ranking"]) <= 2


def test_synth(client, body):
    r = client.post("/api/synth", json=body)
    assert r.status_code == 200
    j = r.get_json()
    assert j["rank"] == 1
    assert "lc.login();" in j["files"]["JaasImplementor.mj"]
    assert "channel 1 2 returnValue" in j["report"]


def test_sketch(client, body):
    r = client.post("/api/sketch", json={"fspec": body["fspec"], "branch": 1})
    assert r.status_code == 200
    j = r.get_json()
    assert [b["branch"] for b in j] == [1]
    assert len(j[0]["sketches"]) == 3


def test_runs(client):
    r = client.get("/api/runs")
    assert r.status_code == 200
    assert isinstance(r.get_json(), list)


@pytest.mark.parametrize("payload", [
    None,
    {"fspec": "fspec x\n"},
    {"sources": {"A.mj": "class A { }"}, "fspec": ""},
    {"sources": {"A.mj": "class A { }"}, "fspec": "fspec x\n", "branch": "one"},
])
def test_bad_request(client, payload):
    r = client.post("/api/score", json=payload) if payload is not None \
        else client.post("/api/score", data="not json", content_type="text/plain")
    assert r.status_code == 400
    assert "msg" in r.get_json()


def test_bad_config(client, body):
    r = client.post("/api/score", json={**body, "config": {"listCap": 0}})
    assert r.status_code == 400


def test_syntax_error_is_400(client, body):
    r = client.post("/api/synth", json={**body, "sources": {"A.mj": "class A {"}})
    assert r.status_code == 400
    assert r.get_json()["msg"].startswith("A.mj:")


def test_no_placement_is_422(client, body):
    r = client.post("/api/synth", json={**body, "sources": {"E.mj": "class E { }"}})
    assert r.status_code == 422


def test_not_found(client):
    r = client.get("/api/nothing")
    assert r.status_code == 404
