"""
共通フィクスチャ
- リポジトリ直下のモジュールを import できるようにする
- 評価記録の DB は一時ファイルの SQLite に向ける（variables より先に設定）
"""
import os
import sys
import tempfile
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

_db_dir = tempfile.mkdtemp(prefix="ipweave-test-")
os.environ["DATABASE_URL"] = f"sqlite:///{_db_dir}/ledger.db"

DATA = ROOT / "data"
REPLICA = DATA / "replica"


@pytest.fixture(scope="session")
def jaas_fspec():
    from fspec import load_fspec
    return load_fspec(DATA / "jaas.fspec")


@pytest.fixture(scope="session")
def task01():
    from minilang import parse_program
    return parse_program(REPLICA / "task01")


@pytest.fixture(scope="session")
def jaas_branch(jaas_fspec):
    from fspec import enumerate_branches
    return enumerate_branches(jaas_fspec, tau=3)[0]
