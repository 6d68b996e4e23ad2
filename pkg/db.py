"""
db.py - データベース接続・セッション管理
=====================================================
【設計意図】
- 評価実行の記録（eval_runs / task_outcomes）用のセッション管理を一元化
- ローカル（SQLite）と共有環境（PostgreSQL）の切り替え対応

【セッション利用方法】
with get_session_context() as session:
    run = session.get(EvalRun, run_id)
=====================================================
"""

import logging
from contextlib import contextmanager

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from models import Base
from variables import DATABASE_URL, DEBUG_MODE

logger = logging.getLogger(__name__)

# ============================================================
# エンジン作成
# - echo: DEBUG_MODE のときだけ発行SQLを表示
# - future=True: SQLAlchemy 2.0スタイルを使用
# ============================================================
engine = create_engine(
    DATABASE_URL,
    echo=DEBUG_MODE,
    future=True
)

# ============================================================
# セッションファクトリ
# - expire_on_commit=False: コミット後もオブジェクトにアクセス可能
# - autoflush=False: 明示的なflush/commitを要求
# ============================================================
SessionLocal = sessionmaker(
    bind=engine,
    expire_on_commit=False,
    autoflush=False,
    future=True
)


@contextmanager
def get_session_context():
    """
    コンテキストマネージャーでセッションを管理
    例外時はロールバックし、最後に必ず close する
    """
    session = SessionLocal()
    try:
        yield session
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def init_db():
    """テーブル作成（既存テーブルはそのまま）"""
    Base.metadata.create_all(bind=engine)
    logger.info(f"ledger tables ready at {engine.url.render_as_string(hide_password=True)}")


def drop_all_tables():
    """全テーブル削除（テスト・開発用）"""
    Base.metadata.drop_all(bind=engine)
    logger.warning("dropped all ledger tables")


# ============================================================
# スクリプトとして実行時: テーブル初期化
# ============================================================
if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    init_db()
