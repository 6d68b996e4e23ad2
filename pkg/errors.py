"""
errors.py - 例外定義
=====================================================
【設計意図】
- パイプライン全体で使う例外を一箇所にまとめる
- exit_code で CLI の終了コードを決める
  (1: 入力エラー, 2: 合成不能)
- HTTP API 側は exit_code を 400 / 422 に読み替える
=====================================================
"""

INPUT_ERROR = 1
INFEASIBLE = 2


class IpweaveError(Exception):
    exit_code = INPUT_ERROR


class UnreadableFile(IpweaveError):
    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"cannot read {self.path}: {reason}")


class ConfigError(IpweaveError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


# ============================================================
# minilang
# ============================================================

class NoSourcesFound(IpweaveError):
    def __init__(self, root):
        self.root = root
        super().__init__(f"no .mj sources under {root}")


class MiniSyntaxError(IpweaveError):
    def __init__(self, file, line, expected, found=None):
        self.file = file
        self.line = line
        self.expected = expected
        self.found = found
        got = f", found {found!r}" if found is not None else ""
        super().__init__(f"{file}:{line}: expected {expected}{got}")


class DuplicateClassError(IpweaveError):
    def __init__(self, qualified_name, files=()):
        self.qualified_name = qualified_name
        self.files = tuple(files)
        super().__init__(f"class {qualified_name} declared more than once {list(self.files)}")


class DuplicateDeclarationError(IpweaveError):
    def __init__(self, owner, name):
        self.owner = owner
        self.name = name
        super().__init__(f"{name} declared more than once in {owner}")


class InvalidLocation(IpweaveError):
    pass


# ============================================================
# analysis
# ============================================================

class UnknownScope(IpweaveError):
    def __init__(self, scope_id):
        self.scope_id = scope_id
        super().__init__(f"unknown scope {scope_id}")


# ============================================================
# fspec
# ============================================================

class FormatError(IpweaveError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class CycleError(IpweaveError):
    pass


class DanglingEdgeError(IpweaveError):
    def __init__(self, src, dst, line=None):
        self.src = src
        self.dst = dst
        self.line = line
        super().__init__(f"edge {src}->{dst} references an unknown node")


class MissingAnnotation(IpweaveError):
    def __init__(self, node_id):
        self.node_id = node_id
        super().__init__(f"node {node_id} has no annotation")


# ============================================================
# annotator / sketcher / resolver / weaver
# ============================================================

class UnknownCluster(IpweaveError):
    def __init__(self, cluster_id):
        self.cluster_id = cluster_id
        super().__init__(f"cluster {cluster_id} has no mapping")


class NoFeasibleMapping(IpweaveError):
    exit_code = INFEASIBLE


class CyclicClusterError(IpweaveError):
    def __init__(self, cluster_id):
        self.cluster_id = cluster_id
        super().__init__(f"cluster {cluster_id} has cyclic internal dependencies")


class AbstractTypeError(IpweaveError):
    def __init__(self, type_name):
        self.type_name = type_name
        super().__init__(f"{type_name} is an interface; the FSpec needs an alias to a concrete type")


class Unsatisfiable(IpweaveError):
    exit_code = INFEASIBLE

    def __init__(self, empty_holes):
        self.empty_holes = tuple(empty_holes)
        super().__init__(f"no candidate variable for holes {list(self.empty_holes)}")


class WeaveConflict(IpweaveError):
    pass


class ChannelFailure(IpweaveError):
    exit_code = INFEASIBLE


# ============================================================
# harness
# ============================================================

class EmptyDataset(IpweaveError):
    def __init__(self, what="dataset"):
        super().__init__(f"{what} is empty")


class MissingLabel(IpweaveError):
    def __init__(self, task_id):
        self.task_id = task_id
        super().__init__(f"task {task_id} has no label.rec")
