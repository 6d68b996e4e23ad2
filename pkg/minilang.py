"""
minilang.py - Java 風ミニ言語 (.mj) の字句解析・構文解析・AST・出力
=====================================================
【設計意図】
- 合成器が解析・変更する対象プログラムの表現
- AST は frozen dataclass（不変）。変換は常に新しい値を返す
- 行番号は compare=False のフィールドに持つので、== は構造比較になる
  parse(emit(parse(x))) == parse(x) が往復の性質
- コメントは次のトークンに付随させ、文・メンバー・クラスの trivia として再出力

【文法（サブセット）】
package / import / class（入れ子可）/ field（初期化子・static 任意）/ method
文: ローカル宣言, 代入, 呼び出し, return, if/else, while, 式文
ジェネリクス・ラムダ・try/catch・コンストラクタ宣言は扱わない
=====================================================
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional, Union

from errors import (
    DuplicateClassError, DuplicateDeclarationError, InvalidLocation,
    MiniSyntaxError, NoSourcesFound,
)

logger = logging.getLogger(__name__)

SOURCE_SUFFIX = ".mj"
INDENT = "    "

PRIMITIVE_TYPES = frozenset({
    "int", "long", "double", "float", "boolean", "char", "byte", "short", "void",
})

# java.lang は import なしで解決される
JAVA_LANG = frozenset({
    "String", "Object", "Integer", "Long", "Double", "Float", "Boolean",
    "Character", "Byte", "Short", "Number", "Math", "System", "StringBuilder",
    "Exception", "RuntimeException", "Thread", "Runnable", "Iterable", "Void",
})

_RESERVED = frozenset({
    "package", "import", "class", "static", "final", "public", "private",
    "protected", "abstract", "void", "return", "if", "else", "while", "new",
    "this", "null", "true", "false",
})

_MODIFIERS = ("public", "private", "protected", "static", "final", "abstract")

_OPERATORS = (
    "&&", "||", "==", "!=", "<=", ">=",
    "{", "}", "(", ")", "[", "]", ";", ",", ".", "=",
    "<", ">", "+", "-", "*", "/", "%", "!",
)

_BINARY_PRECEDENCE = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, ">": 4, "<=": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}


# ============================================================
# 式
# ============================================================

@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class FieldAccess:
    target: "Expr"
    name: str


@dataclass(frozen=True)
class Call:
    receiver: Optional["Expr"]
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class New:
    type_name: str
    args: tuple = ()


@dataclass(frozen=True)
class Index:
    target: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Paren:
    inner: "Expr"


Expr = Union[Literal, Name, FieldAccess, Call, New, Index, Unary, Binary, Paren]


# ============================================================
# 文・ブロック
# ============================================================

@dataclass(frozen=True)
class Block:
    statements: tuple = ()
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)
    trailing_comments: tuple = ()


@dataclass(frozen=True)
class LocalDecl:
    name: str
    type_name: str
    init: Optional[Expr] = None
    line: int = field(default=0, compare=False)
    comments: tuple = ()

    @property
    def has_initializer(self):
        return self.init is not None


@dataclass(frozen=True)
class Assign:
    target: Expr
    value: Expr
    line: int = field(default=0, compare=False)
    comments: tuple = ()


@dataclass(frozen=True)
class CallStmt:
    call: Call
    line: int = field(default=0, compare=False)
    comments: tuple = ()


@dataclass(frozen=True)
class Return:
    value: Optional[Expr] = None
    line: int = field(default=0, compare=False)
    comments: tuple = ()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Block
    orelse: Optional[Block] = None
    line: int = field(default=0, compare=False)
    comments: tuple = ()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: Block
    line: int = field(default=0, compare=False)
    comments: tuple = ()


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    line: int = field(default=0, compare=False)
    comments: tuple = ()


Statement = Union[LocalDecl, Assign, CallStmt, Return, If, While, ExprStmt]


# ============================================================
# 宣言
# ============================================================

@dataclass(frozen=True)
class Param:
    name: str
    type_name: str


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type_name: str
    modifiers: tuple = ()
    initializer: Optional[Expr] = None
    line: int = field(default=0, compare=False)
    comments: tuple = ()

    @property
    def is_static(self):
        return "static" in self.modifiers

    @property
    def has_initializer(self):
        return self.initializer is not None


@dataclass(frozen=True)
class MethodDecl:
    name: str
    qualified_name: str
    modifiers: tuple
    return_type: str
    params: tuple
    body: Block
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)
    comments: tuple = ()

    @property
    def simple_name(self):
        return self.name

    @property
    def is_static(self):
        return "static" in self.modifiers


@dataclass(frozen=True)
class ClassDecl:
    name: str
    qualified_name: str
    modifiers: tuple = ()
    members: tuple = ()
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)
    comments: tuple = ()
    trailing_comments: tuple = ()

    @property
    def fields(self):
        return tuple(m for m in self.members if isinstance(m, FieldDecl))

    @property
    def methods(self):
        return tuple(m for m in self.members if isinstance(m, MethodDecl))

    @property
    def inner_classes(self):
        return tuple(m for m in self.members if isinstance(m, ClassDecl))

    @property
    def is_static(self):
        return "static" in self.modifiers


@dataclass(frozen=True)
class Import:
    name: str
    comments: tuple = ()


@dataclass(frozen=True)
class SourceFile:
    path: str
    package: str
    imports: tuple
    classes: tuple
    header_comments: tuple = ()
    trailing_comments: tuple = ()
    raw_text: str = field(default="", compare=False, repr=False)

    @cached_property
    def lines(self):
        return self.raw_text.splitlines()

    def line_text(self, line):
        """1 始まりの行番号からソース行を返す"""
        if 1 <= line <= len(self.lines):
            return self.lines[line - 1]
        return ""


class BlockPosition(NamedTuple):
    """メソッド内のブロック（path で特定）と、その中の文インデックス"""
    method_qname: str
    block_path: tuple
    index: int


# ============================================================
# プログラム全体
# ============================================================

@dataclass(frozen=True)
class MiniProgram:
    files: tuple
    root: str = field(default="", compare=False)

    @cached_property
    def _index(self):
        classes, class_file, methods, method_class, parents = {}, {}, {}, {}, {}

        def visit(cls, sf, parent):
            classes[cls.qualified_name] = cls
            class_file[cls.qualified_name] = sf
            parents[cls.qualified_name] = parent
            for method in cls.methods:
                methods[method.qualified_name] = method
                method_class[method.qualified_name] = cls.qualified_name
            for inner in cls.inner_classes:
                visit(inner, sf, cls.qualified_name)

        for sf in self.files:
            for cls in sf.classes:
                visit(cls, sf, None)
        return classes, class_file, methods, method_class, parents

    @property
    def classes(self):
        return self._index[0]

    @property
    def methods(self):
        return self._index[2]

    def file(self, path):
        for sf in self.files:
            if sf.path == path:
                return sf
        return None

    def file_of_class(self, class_qname):
        return self._index[1][class_qname]

    def owner_of(self, method_qname):
        """メソッドを宣言しているクラス"""
        return self.classes[self._index[3][method_qname]]

    def file_of_method(self, method_qname):
        return self.file_of_class(self._index[3][method_qname])

    def enclosing_classes(self, class_qname):
        """内側から外側へ向かうクラスの連鎖"""
        chain = []
        current = class_qname
        while current is not None:
            chain.append(self.classes[current])
            current = self._index[4][current]
        return chain

    def top_level_class(self, class_qname):
        return self.enclosing_classes(class_qname)[-1]

    def resolve_type(self, name, context_class=None, source=None):
        """型名を完全修飾名に解決する（解決できなければそのまま返す）"""
        base, dims = name, ""
        while base.endswith("[]"):
            base, dims = base[:-2], dims + "[]"
        if base in PRIMITIVE_TYPES:
            return name
        if source is None and context_class is not None:
            source = self.file_of_class(context_class)
        head, _, rest = base.partition(".")
        resolved = self._resolve_simple(head, context_class, source)
        if resolved is None:
            return name
        return resolved + (f".{rest}" if rest else "") + dims

    def _resolve_simple(self, simple, context_class, source):
        if context_class is not None:
            for cls in self.enclosing_classes(context_class):
                if cls.name == simple:
                    return cls.qualified_name
                for inner in cls.inner_classes:
                    if inner.name == simple:
                        return inner.qualified_name
        if source is not None:
            for qname, cls in self.classes.items():
                if cls.name == simple and self.file_of_class(qname) is source:
                    return qname
            for imp in source.imports:
                if imp.name.endswith(f".{simple}"):
                    return imp.name
            candidate = f"{source.package}.{simple}" if source.package else simple
            if candidate in self.classes:
                return candidate
            for imp in source.imports:
                if imp.name.endswith(".*"):
                    candidate = f"{imp.name[:-2]}.{simple}"
                    if candidate in self.classes:
                        return candidate
        if simple in JAVA_LANG:
            return f"java.lang.{simple}"
        return None


# ============================================================
# 字句解析
# ============================================================

@dataclass(frozen=True)
class Token:
    kind: str   # ident / number / string / char / op / eof
    text: str
    line: int
    comments: tuple = ()


def tokenize(text, path="<memory>"):
    tokens = []
    pending = []
    i, line, n = 0, 1, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            continue
        if ch in " \t\r\f":
            i += 1
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            end = n if end < 0 else end
            pending.append(text[i:end].rstrip())
            i = end
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise MiniSyntaxError(path, line, "'*/'", "end of file")
            chunk = text[i:end + 2]
            pending.append(chunk)
            line += chunk.count("\n")
            i = end + 2
            continue

        start_line = line
        if ch.isalpha() or ch in "_$":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] in "_$"):
                j += 1
            kind = "ident"
        elif ch.isdigit():
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "."):
                j += 1
            kind = "number"
        elif ch in "\"'":
            j = i + 1
            while j < n and text[j] != ch:
                if text[j] == "\n":
                    raise MiniSyntaxError(path, line, "closing quote", "end of line")
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                raise MiniSyntaxError(path, line, "closing quote", "end of file")
            j += 1
            kind = "string" if ch == '"' else "char"
        else:
            for op in _OPERATORS:
                if text.startswith(op, i):
                    j = i + len(op)
                    kind = "op"
                    break
            else:
                raise MiniSyntaxError(path, line, "a token", ch)
        tokens.append(Token(kind, text[i:j], start_line, tuple(pending)))
        pending = []
        i = j
    tokens.append(Token("eof", "", line, tuple(pending)))
    return tokens


# ============================================================
# 構文解析（再帰下降）
# ============================================================

class _Parser:
    def __init__(self, tokens, path):
        self.tokens = tokens
        self.path = path
        self.pos = 0
        # 構文要素に付かなかったコメント（式の途中など）。囲む文・宣言の前に移す
        self.stray = []
        self._claimed = set()

    # ---- トークン操作 ----

    def peek(self, k=0):
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            if tok.comments and id(tok) not in self._claimed:
                self.stray.extend(tok.comments)
            self.pos += 1
        return tok

    def claim(self, tok):
        self._claimed.add(id(tok))
        return tok.comments

    def collecting(self, parse, *args):
        """parse の間に拾った行き場のないコメントを、結果の comments の後ろに足す"""
        outer, self.stray = self.stray, []
        node = parse(*args)
        if self.stray:
            node = replace(node, comments=tuple(node.comments) + tuple(self.stray))
        self.stray = outer
        return node

    def at(self, text, k=0):
        tok = self.peek(k)
        return tok.kind in ("op", "ident") and tok.text == text

    def fail(self, expected):
        tok = self.peek()
        raise MiniSyntaxError(self.path, tok.line, expected, tok.text or "end of file")

    def expect(self, text):
        if not self.at(text):
            self.fail(f"'{text}'")
        return self.advance()

    def ident(self):
        tok = self.peek()
        if tok.kind != "ident" or tok.text in _RESERVED:
            self.fail("an identifier")
        return self.advance()

    # ---- ファイル・クラス ----

    def source_file(self):
        first = self.peek()
        header = self.claim(first) if first.text in ("package", "import") else ()
        package = ""
        if self.at("package"):
            self.advance()
            package = self.qualified_name()
            self.expect(";")
        imports = []
        while self.at("import"):
            tok = self.peek()
            comments = () if tok is first else self.claim(tok)
            self.advance()
            name = self.qualified_name(allow_star=True)
            self.expect(";")
            imports.append(Import(name, comments))
        header = header + tuple(self.stray)
        self.stray = []
        classes = []
        while self.peek().kind != "eof":
            tok = self.peek()
            comments = self.claim(tok)
            classes.append(self.collecting(self._top_class, package, comments, tok.line))
        return package, tuple(imports), tuple(classes), header, self.peek().comments

    def _top_class(self, package, comments, line):
        modifiers = self.modifiers()
        return self.class_body(package, comments, line, modifiers)

    def qualified_name(self, allow_star=False):
        parts = [self.ident().text]
        while self.at("."):
            self.advance()
            if allow_star and self.at("*"):
                self.advance()
                parts.append("*")
                break
            parts.append(self.ident().text)
        return ".".join(parts)

    def type_name(self):
        name = self.qualified_name()
        while self.at("[") and self.at("]", 1):
            self.advance()
            self.advance()
            name += "[]"
        return name

    def modifiers(self):
        mods = []
        while self.peek().kind == "ident" and self.peek().text in _MODIFIERS:
            mods.append(self.advance().text)
        return tuple(mods)

    def class_body(self, outer, comments, line, modifiers):
        self.expect("class")
        name = self.ident().text
        qname = f"{outer}.{name}" if outer else name
        self.expect("{")
        members = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.fail("'}'")
            members.append(self.collecting(self.member, qname))
        trailing = self.claim(self.peek())
        close = self.advance()
        return ClassDecl(name, qname, modifiers, tuple(members), line, close.line,
                         comments, trailing)

    def member(self, owner):
        tok = self.peek()
        comments, line = self.claim(tok), tok.line
        modifiers = self.modifiers()
        if self.at("class"):
            return self.class_body(owner, comments, line, modifiers)
        if self.at("void"):
            self.advance()
            type_name = "void"
        else:
            type_name = self.type_name()
        name = self.ident().text
        if self.at("("):
            params = self.params()
            body = self.block()
            return MethodDecl(name, f"{owner}.{name}", modifiers, type_name, params, body,
                              line, body.end_line, comments)
        if type_name == "void":
            self.fail("'('")
        init = None
        if self.at("="):
            self.advance()
            init = self.expression()
        self.expect(";")
        return FieldDecl(name, type_name, modifiers, init, line, comments)

    def params(self):
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                type_name = self.type_name()
                params.append(Param(self.ident().text, type_name))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        return tuple(params)

    # ---- 文 ----

    def block(self):
        open_tok = self.expect("{")
        statements = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.fail("'}'")
            statements.append(self.collecting(self.statement))
        trailing = self.claim(self.peek())
        close = self.advance()
        return Block(tuple(statements), open_tok.line, close.line, trailing)

    def statement(self):
        tok = self.peek()
        comments, line = self.claim(tok), tok.line
        if tok.kind == "ident":
            if tok.text == "if":
                return self.if_statement(comments, line)
            if tok.text == "while":
                self.advance()
                self.expect("(")
                cond = self.expression()
                self.expect(")")
                return While(cond, self.block(), line, comments)
            if tok.text == "return":
                self.advance()
                value = None if self.at(";") else self.expression()
                self.expect(";")
                return Return(value, line, comments)
            if self._declaration_ahead():
                type_name = self.type_name()
                name = self.ident().text
                init = None
                if self.at("="):
                    self.advance()
                    init = self.expression()
                self.expect(";")
                return LocalDecl(name, type_name, init, line, comments)
        expr = self.expression()
        if self.at("="):
            if not isinstance(expr, (Name, FieldAccess, Index)):
                self.fail("an assignable expression")
            self.advance()
            value = self.expression()
            self.expect(";")
            return Assign(expr, value, line, comments)
        self.expect(";")
        if isinstance(expr, Call):
            return CallStmt(expr, line, comments)
        return ExprStmt(expr, line, comments)

    def if_statement(self, comments, line):
        self.expect("if")
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        then = self.block()
        orelse = None
        if self.at("else"):
            self.advance()
            if self.at("if"):
                tok = self.peek()
                nested = self.collecting(self.if_statement, self.claim(tok), tok.line)
                orelse = Block((nested,), tok.line, statement_end_line(nested))
            else:
                orelse = self.block()
        return If(cond, then, orelse, line, comments)

    def _declaration_ahead(self):
        """`Type name =` / `Type name;` の形かを先読みで判定する"""
        tok = self.peek()
        if tok.kind != "ident" or tok.text in _RESERVED:
            return False
        k = 1
        while self.at(".", k) and self.peek(k + 1).kind == "ident":
            k += 2
        while self.at("[", k) and self.at("]", k + 1):
            k += 2
        nxt = self.peek(k)
        if nxt.kind != "ident" or nxt.text in _RESERVED:
            return False
        return self.at("=", k + 1) or self.at(";", k + 1)

    # ---- 式 ----

    def expression(self, min_prec=1):
        left = self.unary()
        while True:
            tok = self.peek()
            prec = _BINARY_PRECEDENCE.get(tok.text) if tok.kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.expression(prec + 1)
            left = Binary(tok.text, left, right)

    def unary(self):
        if self.at("!") or self.at("-"):
            op = self.advance().text
            return Unary(op, self.unary())
        return self.postfix(self.primary())

    def primary(self):
        tok = self.peek()
        if tok.kind in ("number", "string", "char"):
            self.advance()
            return Literal(tok.text)
        if tok.kind == "ident" and tok.text in ("true", "false", "null"):
            self.advance()
            return Literal(tok.text)
        if self.at("new"):
            self.advance()
            type_name = self.qualified_name()
            return New(type_name, self.arguments())
        if self.at("("):
            self.advance()
            inner = self.expression()
            self.expect(")")
            return Paren(inner)
        if tok.kind == "ident" and (tok.text == "this" or tok.text not in _RESERVED):
            self.advance()
            if self.at("("):
                return Call(None, tok.text, self.arguments())
            return Name(tok.text)
        self.fail("an expression")

    def postfix(self, expr):
        while True:
            if self.at("."):
                self.advance()
                name = self.ident().text
                if self.at("("):
                    expr = Call(expr, name, self.arguments())
                else:
                    expr = FieldAccess(expr, name)
            elif self.at("["):
                self.advance()
                index = self.expression()
                self.expect("]")
                expr = Index(expr, index)
            else:
                return expr

    def arguments(self):
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.expression())
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        return tuple(args)


def statement_end_line(stmt):
    if isinstance(stmt, If):
        return (stmt.orelse or stmt.then).end_line
    if isinstance(stmt, While):
        return stmt.body.end_line
    return stmt.line


# ============================================================
# 読み込み
# ============================================================

def parse_source(text, path="<memory>"):
    tokens = tokenize(text, path)
    package, imports, classes, header, trailing = _Parser(tokens, path).source_file()
    return SourceFile(path, package, imports, classes, header, trailing, text)


def parse_sources(sources, root=""):
    """{相対パス: テキスト} からプログラムを組み立てる"""
    if not sources:
        raise NoSourcesFound(root or "<memory>")
    files = tuple(parse_source(sources[path], path) for path in sorted(sources))
    program = MiniProgram(files, root=str(root))
    _validate(program)
    return program


def parse_program(root_dir):
    root = Path(root_dir)
    paths = sorted(p for p in root.rglob(f"*{SOURCE_SUFFIX}") if p.is_file()) if root.is_dir() else []
    if not paths:
        raise NoSourcesFound(root)
    sources = {p.relative_to(root).as_posix(): p.read_text(encoding="utf-8") for p in paths}
    program = parse_sources(sources, root=root)
    logger.info(f"parsed {len(program.files)} files, {len(program.classes)} classes, "
                f"{len(program.methods)} methods from {root}")
    return program


def _validate(program):
    seen = {}
    for sf in program.files:
        stack = list(sf.classes)
        while stack:
            cls = stack.pop()
            if cls.qualified_name in seen:
                raise DuplicateClassError(cls.qualified_name, (seen[cls.qualified_name], sf.path))
            seen[cls.qualified_name] = sf.path
            names = set()
            for member in cls.members:
                if isinstance(member, ClassDecl):
                    stack.append(member)
                    continue
                key = ("field" if isinstance(member, FieldDecl) else "method", member.name)
                if key in names:
                    raise DuplicateDeclarationError(cls.qualified_name, member.name)
                names.add(key)
                if isinstance(member, MethodDecl):
                    params = [p.name for p in member.params]
                    if len(params) != len(set(params)):
                        raise DuplicateDeclarationError(member.qualified_name, "parameter")


# ============================================================
# 出力
# ============================================================

def emit_program(program):
    return {sf.path: emit_source(sf) for sf in program.files}


def emit_source(sf):
    out = list(sf.header_comments)
    if sf.package:
        out.append(f"package {sf.package};")
        out.append("")
    for imp in sf.imports:
        out.extend(imp.comments)
        out.append(f"import {imp.name};")
    if sf.imports:
        out.append("")
    for i, cls in enumerate(sf.classes):
        if i:
            out.append("")
        _emit_class(cls, 0, out)
    out.extend(sf.trailing_comments)
    return "\n".join(out) + "\n"


def _emit_class(cls, depth, out):
    pad = INDENT * depth
    out.extend(pad + c for c in cls.comments)
    head = pad + " ".join(cls.modifiers + ("class", cls.name))
    if not cls.members and not cls.trailing_comments:
        out.append(f"{head} {{ }}")
        return
    out.append(f"{head} {{")
    previous = None
    for member in cls.members:
        if previous is not None and not (isinstance(previous, FieldDecl) and isinstance(member, FieldDecl)):
            out.append("")
        if isinstance(member, ClassDecl):
            _emit_class(member, depth + 1, out)
        elif isinstance(member, FieldDecl):
            _emit_field(member, depth + 1, out)
        else:
            _emit_method(member, depth + 1, out)
        previous = member
    out.extend(pad + INDENT + c for c in cls.trailing_comments)
    out.append(pad + "}")


def _emit_field(decl, depth, out):
    pad = INDENT * depth
    out.extend(pad + c for c in decl.comments)
    head = " ".join(decl.modifiers + (decl.type_name, decl.name))
    init = f" = {emit_expr(decl.initializer)}" if decl.initializer is not None else ""
    out.append(f"{pad}{head}{init};")


def _emit_method(method, depth, out):
    pad = INDENT * depth
    out.extend(pad + c for c in method.comments)
    params = ", ".join(f"{p.type_name} {p.name}" for p in method.params)
    head = " ".join(method.modifiers + (method.return_type, method.name))
    _emit_braced(f"{pad}{head}({params})", method.body, depth, out)


def _emit_braced(head, block, depth, out):
    if not block.statements and not block.trailing_comments:
        out.append(f"{head} {{ }}")
        return
    out.append(f"{head} {{")
    for stmt in block.statements:
        emit_statement(stmt, depth + 1, out)
    out.extend(INDENT * (depth + 1) + c for c in block.trailing_comments)
    out.append(INDENT * depth + "}")


def emit_statement(stmt, depth, out):
    pad = INDENT * depth
    out.extend(pad + c for c in stmt.comments)
    if isinstance(stmt, LocalDecl):
        init = f" = {emit_expr(stmt.init)}" if stmt.init is not None else ""
        out.append(f"{pad}{stmt.type_name} {stmt.name}{init};")
    elif isinstance(stmt, Assign):
        out.append(f"{pad}{emit_expr(stmt.target)} = {emit_expr(stmt.value)};")
    elif isinstance(stmt, CallStmt):
        out.append(f"{pad}{emit_expr(stmt.call)};")
    elif isinstance(stmt, ExprStmt):
        out.append(f"{pad}{emit_expr(stmt.expr)};")
    elif isinstance(stmt, Return):
        value = f" {emit_expr(stmt.value)}" if stmt.value is not None else ""
        out.append(f"{pad}return{value};")
    elif isinstance(stmt, If):
        _emit_braced(f"{pad}if ({emit_expr(stmt.cond)})", stmt.then, depth, out)
        if stmt.orelse is not None:
            _emit_braced(out.pop() + " else", stmt.orelse, depth, out)
    elif isinstance(stmt, While):
        _emit_braced(f"{pad}while ({emit_expr(stmt.cond)})", stmt.body, depth, out)
    else:
        raise TypeError(f"not a statement: {stmt!r}")


def emit_expr(expr):
    if isinstance(expr, Literal):
        return expr.text
    if isinstance(expr, Name):
        return expr.ident
    if isinstance(expr, FieldAccess):
        return f"{emit_expr(expr.target)}.{expr.name}"
    if isinstance(expr, Call):
        args = ", ".join(emit_expr(a) for a in expr.args)
        prefix = f"{emit_expr(expr.receiver)}." if expr.receiver is not None else ""
        return f"{prefix}{expr.name}({args})"
    if isinstance(expr, New):
        args = ", ".join(emit_expr(a) for a in expr.args)
        return f"new {expr.type_name}({args})"
    if isinstance(expr, Index):
        return f"{emit_expr(expr.target)}[{emit_expr(expr.index)}]"
    if isinstance(expr, Unary):
        return f"{expr.op}{emit_expr(expr.operand)}"
    if isinstance(expr, Binary):
        return f"{emit_expr(expr.left)} {expr.op} {emit_expr(expr.right)}"
    if isinstance(expr, Paren):
        return f"({emit_expr(expr.inner)})"
    raise TypeError(f"not an expression: {expr!r}")


# ============================================================
# 走査ヘルパー
# ============================================================

def statement_expressions(stmt):
    """文が直接評価する式（入れ子ブロックの中身は含まない）"""
    if isinstance(stmt, LocalDecl):
        return (stmt.init,) if stmt.init is not None else ()
    if isinstance(stmt, Assign):
        target = stmt.target
        lhs = (target.target,) if isinstance(target, FieldAccess) else ()
        if isinstance(target, Index):
            lhs = (target.target, target.index)
        return lhs + (stmt.value,)
    if isinstance(stmt, CallStmt):
        return (stmt.call,)
    if isinstance(stmt, ExprStmt):
        return (stmt.expr,)
    if isinstance(stmt, Return):
        return (stmt.value,) if stmt.value is not None else ()
    if isinstance(stmt, (If, While)):
        return (stmt.cond,)
    return ()


def walk_expr(expr):
    """後行順（評価順）で部分式を列挙する"""
    if isinstance(expr, FieldAccess):
        yield from walk_expr(expr.target)
    elif isinstance(expr, Call):
        if expr.receiver is not None:
            yield from walk_expr(expr.receiver)
        for arg in expr.args:
            yield from walk_expr(arg)
    elif isinstance(expr, New):
        for arg in expr.args:
            yield from walk_expr(arg)
    elif isinstance(expr, Index):
        yield from walk_expr(expr.target)
        yield from walk_expr(expr.index)
    elif isinstance(expr, Unary):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, Paren):
        yield from walk_expr(expr.inner)
    yield expr


def child_blocks(stmt):
    """(branch 名, Block) の組"""
    if isinstance(stmt, If):
        pairs = [("then", stmt.then)]
        if stmt.orelse is not None:
            pairs.append(("else", stmt.orelse))
        return pairs
    if isinstance(stmt, While):
        return [("body", stmt.body)]
    return []


def block_at(block, path):
    for index, branch in path:
        if not 0 <= index < len(block.statements):
            raise InvalidLocation(f"no statement {index} on block path {path}")
        children = dict(child_blocks(block.statements[index]))
        if branch not in children:
            raise InvalidLocation(f"statement {index} has no {branch} block")
        block = children[branch]
    return block


# ============================================================
# 純粋な変換（常に新しい MiniProgram を返す）
# ============================================================

def _block_position(where):
    if isinstance(where, BlockPosition):
        return where
    position = getattr(where, "block_position", None)
    if isinstance(position, BlockPosition):
        return position
    raise InvalidLocation(f"not a location: {where!r}")


def _update_block(block, path, fn):
    if not path:
        return fn(block)
    (index, branch), rest = path[0], path[1:]
    if not 0 <= index < len(block.statements):
        raise InvalidLocation(f"no statement {index} on block path")
    stmt = block.statements[index]
    if branch == "then" and isinstance(stmt, If):
        stmt = replace(stmt, then=_update_block(stmt.then, rest, fn))
    elif branch == "else" and isinstance(stmt, If) and stmt.orelse is not None:
        stmt = replace(stmt, orelse=_update_block(stmt.orelse, rest, fn))
    elif branch == "body" and isinstance(stmt, While):
        stmt = replace(stmt, body=_update_block(stmt.body, rest, fn))
    else:
        raise InvalidLocation(f"statement {index} has no {branch} block")
    statements = block.statements[:index] + (stmt,) + block.statements[index + 1:]
    return replace(block, statements=statements)


def _map_class(cls, target, fn):
    if cls.qualified_name == target:
        return fn(cls)
    if not target.startswith(cls.qualified_name + "."):
        return cls
    members = tuple(_map_class(m, target, fn) if isinstance(m, ClassDecl) else m for m in cls.members)
    return replace(cls, members=members)


def relayout(sf):
    """出力して読み直し、行番号を出力テキストに合わせる"""
    return parse_source(emit_source(sf), sf.path)


def replace_class(program, class_qname, fn):
    if class_qname not in program.classes:
        raise InvalidLocation(f"unknown class {class_qname}")
    sf = program.file_of_class(class_qname)
    changed = replace(sf, classes=tuple(_map_class(c, class_qname, fn) for c in sf.classes))
    changed = relayout(changed)
    files = tuple(changed if f.path == sf.path else f for f in program.files)
    return MiniProgram(files, root=program.root)


def _replace_method_body(program, method_qname, fn):
    if method_qname not in program.methods:
        raise InvalidLocation(f"unknown method {method_qname}")
    method = program.methods[method_qname]
    updated = replace(method, body=fn(method.body))

    def swap(cls):
        members = tuple(updated if isinstance(m, MethodDecl) and m.name == method.name else m
                        for m in cls.members)
        return replace(cls, members=members)

    return replace_class(program, program.owner_of(method_qname).qualified_name, swap)


def insert_statements(program, where, stmts):
    """ブロックの index 位置に文を差し込む。入力は変更しない"""
    pos = _block_position(where)
    stmts = tuple(stmts)

    def splice(block):
        if not 0 <= pos.index <= len(block.statements):
            raise InvalidLocation(f"index {pos.index} outside block of {len(block.statements)} statements")
        return replace(block, statements=block.statements[:pos.index] + stmts + block.statements[pos.index:])

    return _replace_method_body(program, pos.method_qname,
                                lambda body: _update_block(body, pos.block_path, splice))


def replace_statement(program, where, stmt):
    pos = _block_position(where)

    def swap(block):
        if not 0 <= pos.index < len(block.statements):
            raise InvalidLocation(f"no statement at index {pos.index}")
        return replace(block, statements=block.statements[:pos.index] + (stmt,) + block.statements[pos.index + 1:])

    return _replace_method_body(program, pos.method_qname,
                                lambda body: _update_block(body, pos.block_path, swap))


def add_field(program, class_qname, decl):
    """フィールド宣言の並びの末尾に追加する"""
    def append(cls):
        if any(f.name == decl.name for f in cls.fields):
            raise DuplicateDeclarationError(cls.qualified_name, decl.name)
        last = max((i for i, m in enumerate(cls.members) if isinstance(m, FieldDecl)), default=-1)
        members = cls.members[:last + 1] + (decl,) + cls.members[last + 1:]
        return replace(cls, members=members)

    return replace_class(program, class_qname, append)
