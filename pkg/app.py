"""
Flask API
合成器（ipweave）を HTTP から使うための JSON API

【設計意図】
- ソースは {相対パス: テキスト} で受け取り、ディスクには書かない
- 入力エラーは 400、依存を満たす配置や変数割り当てが無いときは 422
- 評価実行の記録（eval_runs）を一覧できる
"""

import logging

from flask import Flask, jsonify, request

from annotator import render_ranking
from errors import INFEASIBLE, IpweaveError
from fspec import enumerate_branches, parse_fspec
from harness import list_runs
from minilang import parse_sources
from sketcher import generate_sketches, render_sketch
from synthesizer import score, synthesize
from variables import DEBUG_MODE, LOG_LEVEL, SynthesisConfig, apply_overrides

# --------------------
# Flask 初期化
# --------------------
app = Flask(__name__)
app.config["DEBUG"] = DEBUG_MODE
app.json.sort_keys = False

# ロギング設定
logging.basicConfig(level=LOG_LEVEL)
logger = logging.getLogger(__name__)


class BadRequest(Exception):
    pass


# ====================
# ヘルパー関数
# ====================

def _payload():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise BadRequest("JSON object body required")
    return data


def _config(data):
    overrides = data.get("config") or {}
    if not isinstance(overrides, dict):
        raise BadRequest("config must be an object")
    return apply_overrides(SynthesisConfig(), overrides)


def _fspec(data):
    text = data.get("fspec")
    if not isinstance(text, str) or not text.strip():
        raise BadRequest("fspec text required")
    return parse_fspec(text, "<request>")


def _program(data):
    sources = data.get("sources")
    if not isinstance(sources, dict) or not all(isinstance(v, str) for v in sources.values()):
        raise BadRequest("sources must map paths to text")
    return parse_sources(sources)


def _branch(data):
    branch = data.get("branch")
    if branch is not None and not isinstance(branch, int):
        raise BadRequest("branch must be an integer")
    return branch


def _mapping_rows(scored):
    rows = []
    for rank, ms in enumerate(scored.ranked, start=1):
        rows.append({
            "rank": rank,
            "cas": ms.cas,
            "cqs": ms.cqs,
            "cds": ms.cds,
            "mean_cls": ms.mean_cls,
            "placements": [
                {
                    "cluster": m.cluster_id,
                    "label": scored.branch.cluster(m.cluster_id).label,
                    "scope": m.location.scope_id,
                    "index": m.location.statement_index,
                    "file": scored.analysis.file_of(m.location),
                    "line": scored.analysis.location_line(m.location),
                    "cls": m.cls,
                }
                for m in ms.mappings
            ],
        })
    return rows


@app.errorhandler(BadRequest)
def bad_request(error):
    return jsonify({"msg": str(error)}), 400


@app.errorhandler(IpweaveError)
def ipweave_error(error):
    status = 422 if error.exit_code == INFEASIBLE else 400
    logger.error(f"{request.path}: {error}")
    return jsonify({"msg": str(error)}), status


# ====================
# API
# ====================

@app.route("/api/score", methods=["POST"], strict_slashes=False)
def api_score():
    """API: MappingSet のランキング"""
    data = _payload()
    config = _config(data)
    scored = score(_program(data), _fspec(data), config, _branch(data))
    logger.info(f"API score: branch {scored.branch.index}, {len(scored.ranked)} mapping sets")
    return jsonify({
        "branch": scored.branch.index,
        "ranking": _mapping_rows(scored),
        "listing": render_ranking(scored.ranked),
    })


@app.route("/api/synth", methods=["POST"], strict_slashes=False)
def api_synth():
    """API: 合成して織り込み済みソースを返す"""
    data = _payload()
    rank = data.get("rank", 1)
    if not isinstance(rank, int) or rank < 1:
        raise BadRequest("rank must be a positive integer")
    result = synthesize(_program(data), _fspec(data), _config(data), _branch(data), rank)
    return jsonify({
        "rank": result.report.rank,
        "files": result.files,
        "report": result.report.records(),
    })


@app.route("/api/sketch", methods=["POST"], strict_slashes=False)
def api_sketch():
    """API: ブランチのスケッチ（穴つき）"""
    data = _payload()
    fspec = _fspec(data)
    config = _config(data)
    branches = enumerate_branches(fspec, tau=config.tau)
    wanted = _branch(data)
    if wanted is not None:
        branches = [b for b in branches if b.index == wanted]
        if not branches:
            raise BadRequest(f"no branch {wanted}")
    return jsonify([
        {
            "branch": branch.index,
            "sketches": [render_sketch(s, fspec) for s in generate_sketches(branch, fspec)],
        }
        for branch in branches
    ])


@app.route("/api/runs", methods=["GET"], strict_slashes=False)
def api_runs():
    """API: 評価実行の記録"""
    return jsonify(list_runs())


# ====================
# エラーハンドリング
# ====================

@app.errorhandler(404)
def not_found(error):
    return jsonify({"msg": "not found"}), 404


@app.errorhandler(500)
def internal_error(error):
    return jsonify({"msg": "internal error"}), 500


# ====================
# 起動
# ====================

if __name__ == "__main__":
    if DEBUG_MODE:
        app.logger.setLevel(logging.DEBUG)

    app.run(debug=DEBUG_MODE, host="0.0.0.0", port=5000)
