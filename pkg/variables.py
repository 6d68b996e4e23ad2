"""
variables.py - 環境変数・設定値管理
=====================================================
【設計意図】
- 合成器の係数・上限値を一元管理（環境変数 / .env で上書き可能）
- `key = value` 形式の設定ファイルを読み、SynthesisConfig を返す
- 不正な値は起動時に ConfigError で止める

【既定値】
- cMNS = cVAS = cCLS = 1, cCQS = 0.0001
- ランキングの上限 100 件, クラスタ併合しきい値 τ = 3
=====================================================
"""

import os
from dataclasses import dataclass, replace
from pathlib import Path

from dotenv import load_dotenv

from errors import ConfigError, UnreadableFile

# .envファイルがあれば読み込む
load_dotenv()

# ============================================================
# データベース接続設定（評価結果の記録用）
# ============================================================
DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///ipweave.db")

# postgres:// → postgresql:// の変換
if DATABASE_URL.startswith("postgres://"):
    DATABASE_URL = DATABASE_URL.replace("postgres://", "postgresql://", 1)

# ============================================================
# 実行環境
# ============================================================
DEBUG_MODE = os.getenv("DEBUG_MODE", "False").lower() == "true"
LOG_LEVEL = os.getenv("IPWEAVE_LOG_LEVEL", "INFO").upper()

# ============================================================
# スコア係数（合成ロジック）
# ============================================================
C_MNS = float(os.getenv("IPWEAVE_C_MNS", "1"))
C_VAS = float(os.getenv("IPWEAVE_C_VAS", "1"))
C_CLS = float(os.getenv("IPWEAVE_C_CLS", "1"))
# CLS が同点のときだけ差が出る程度の重み
C_CQS = float(os.getenv("IPWEAVE_C_CQS", "0.0001"))

# ランキングに残す MappingSet の最大数
LIST_CAP = int(os.getenv("IPWEAVE_LIST_CAP", "100"))

# クラスタ併合しきい値（注釈間の編集距離）
TAU = int(os.getenv("IPWEAVE_TAU", "3"))

# best-first 探索で取り出すノード数の絶対上限
EXPLORE_LIMIT = int(os.getenv("IPWEAVE_EXPLORE_LIMIT", "20000"))


@dataclass(frozen=True)
class SynthesisConfig:
    c_mns: float = C_MNS
    c_vas: float = C_VAS
    c_cls: float = C_CLS
    c_cqs: float = C_CQS
    list_cap: int = LIST_CAP
    tau: int = TAU
    explore_limit: int = EXPLORE_LIMIT

    def validate(self):
        weights = {"cMNS": self.c_mns, "cVAS": self.c_vas, "cCLS": self.c_cls, "cCQS": self.c_cqs}
        for key, value in weights.items():
            if value < 0:
                raise ConfigError(f"{key} must be >= 0, got {value}")
        if self.c_mns + self.c_vas <= 0:
            raise ConfigError("cMNS + cVAS must be > 0")
        if self.c_cls + self.c_cqs <= 0:
            raise ConfigError("cCLS + cCQS must be > 0")
        if self.list_cap < 1:
            raise ConfigError(f"listCap must be >= 1, got {self.list_cap}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if self.explore_limit < 1:
            raise ConfigError(f"exploreLimit must be >= 1, got {self.explore_limit}")
        return self


# 設定ファイルのキー → (フィールド名, 型)
CONFIG_KEYS = {
    "cMNS": ("c_mns", float),
    "cVAS": ("c_vas", float),
    "cCLS": ("c_cls", float),
    "cCQS": ("c_cqs", float),
    "listCap": ("list_cap", int),
    "tau": ("tau", int),
    "exploreLimit": ("explore_limit", int),
}


def apply_overrides(config, overrides, line_of=None):
    """{key: value} を SynthesisConfig に反映する（HTTP API の "config" もここを通る）"""
    changes = {}
    for key, raw in overrides.items():
        line = line_of.get(key) if line_of else None
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}", line)
        name, cast = CONFIG_KEYS[key]
        try:
            changes[name] = cast(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot read {raw!r} as {cast.__name__}", line)
    return replace(config, **changes).validate()


def load_config(path=None):
    """環境変数の既定値に、設定ファイルの値を上書きして返す"""
    config = SynthesisConfig()
    if path is None:
        return config.validate()

    overrides, line_of = {}, {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise UnreadableFile(path, e.strerror if isinstance(e, OSError) else "not UTF-8 text")
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"expected 'key = value', got {line!r}", number)
        overrides[key.strip()] = value.strip()
        line_of[key.strip()] = number
    return apply_overrides(config, overrides, line_of)


# ============================================================
# 設定内容の確認（デバッグ用）
# ============================================================
if __name__ == "__main__":
    print("=" * 50)
    print("現在の設定値")
    print("=" * 50)
    print(f"DATABASE_URL: {DATABASE_URL[:30]}...")
    print(f"cMNS={C_MNS} cVAS={C_VAS} cCLS={C_CLS} cCQS={C_CQS}")
    print(f"listCap={LIST_CAP} tau={TAU} exploreLimit={EXPLORE_LIMIT}")
    print(f"LOG_LEVEL: {LOG_LEVEL}")
    print(f"DEBUG_MODE: {DEBUG_MODE}")
