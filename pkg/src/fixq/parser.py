"""Recursive-descent parser for the query language.

Precedence, loosest first: ``,`` < ``or`` < ``and`` < ``union``/``|``/``except``
< comparisons < ``+ -`` < ``* idiv div mod`` < unary ``-`` < ``/`` < ``[]``.
"""

from __future__ import annotations

import re
from typing import Optional

from .errors import QuerySyntaxError, UnknownFunction
from .expr import (
    BUILTINS,
    Arith,
    BuiltinCall,
    Closure,
    ContextItem,
    DoubleLit,
    ElemConstructor,
    EmptySeq,
    Expr,
    Fixpoint,
    For,
    FunCall,
    FunctionDecl,
    GeneralComparison,
    If,
    IntLit,
    Let,
    Logical,
    NodeSetOp,
    PathExpr,
    PathStep,
    Predicate,
    Program,
    SeqConcat,
    SeqType,
    StringLit,
    TextConstructor,
    Typeswitch,
    ValueComparison,
    VarRef,
    walk,
)
from .xdm import AXES, KindTest, NameTest

_NAME = re.compile(r"[A-Za-z_][\w\-.]*(?::[A-Za-z_][\w\-.]*)?")
_NUMBER = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
_SYMBOLS = ("//", "::", ":=", "!=", "<=", ">=", "..", "(", ")", "[", "]", "{", "}",
            ",", ";", "/", "@", ".", "=", "<", ">", "+", "-", "*", "|", "?", "$")
_KIND_TESTS = {"node", "text", "element", "attribute", "document-node"}
_SEQTYPES = {"node()", "element()", "attribute()", "text()", "xs:string",
             "xs:integer", "xs:boolean", "xs:double", "empty-sequence()", "item()"}
_GENERAL = {"=", "!=", "<", "<=", ">", ">="}
_VALUE = {"eq", "ne", "lt", "le", "gt", "ge"}
_ENTITIES = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}


class Token:
    __slots__ = ("kind", "value", "pos", "end")

    def __init__(self, kind, value, pos, end):
        self.kind = kind  # name, var, string, int, double, sym, eof
        self.value = value
        self.pos = pos
        self.end = end

    def is_(self, kind, value=None):
        return self.kind == kind and (value is None or self.value == value)

    def __repr__(self):
        return f"Token({self.kind}, {self.value!r}, {self.pos})"


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self._tok: Optional[Token] = None

    # -- lexing ------------------------------------------------------------

    def _skip_ws(self, i):
        t = self.text
        while i < len(t):
            if t[i].isspace():
                i += 1
            elif t.startswith("(:", i):
                depth, i = 1, i + 2
                while depth and i < len(t):
                    if t.startswith("(:", i):
                        depth, i = depth + 1, i + 2
                    elif t.startswith(":)", i):
                        depth, i = depth - 1, i + 2
                    else:
                        i += 1
                if depth:
                    raise QuerySyntaxError(i, "end of comment ':)'")
            else:
                break
        return i

    def _lex(self, i) -> Token:
        t = self.text
        i = self._skip_ws(i)
        if i >= len(t):
            return Token("eof", None, i, i)
        c = t[i]
        if c in "\"'":
            j, buf = i + 1, []
            while True:
                k = t.find(c, j)
                if k < 0:
                    raise QuerySyntaxError(i, "closing quote")
                buf.append(t[j:k])
                if t.startswith(c * 2, k):
                    buf.append(c)
                    j = k + 2
                    continue
                return Token("string", _decode_entities("".join(buf), i), i, k + 1)
        if c.isdigit() or (c == "." and i + 1 < len(t) and t[i + 1].isdigit()):
            m = _NUMBER.match(t, i)
            s = m.group(0)
            if m.group(2) or "." in s:
                return Token("double", float(s), i, m.end())
            return Token("int", int(s), i, m.end())
        if c == "$":
            m = _NAME.match(t, self._skip_ws(i + 1))
            if not m:
                raise QuerySyntaxError(i + 1, "variable name")
            return Token("var", m.group(0), i, m.end())
        m = _NAME.match(t, i)
        if m:
            name = m.group(0)
            return Token("name", name, i, m.end())
        for s in _SYMBOLS:
            if t.startswith(s, i):
                return Token("sym", s, i, i + len(s))
        raise QuerySyntaxError(i, "a token")

    @property
    def tok(self) -> Token:
        if self._tok is None:
            self._tok = self._lex(self.pos)
        return self._tok

    def peek(self, n=1) -> Token:
        tok = self.tok
        for _ in range(n):
            tok = self._lex(tok.end)
        return tok

    def advance(self) -> Token:
        tok = self.tok
        self.pos = tok.end
        self._tok = None
        return tok

    def at(self, kind, value=None) -> bool:
        return self.tok.is_(kind, value)

    def at_sym(self, value) -> bool:
        return self.tok.is_("sym", value)

    def at_kw(self, value) -> bool:
        return self.tok.is_("name", value)

    def expect(self, kind, value=None) -> Token:
        if not self.tok.is_(kind, value):
            raise QuerySyntaxError(self.tok.pos, repr(value) if value else kind)
        return self.advance()

    def expect_sym(self, value):
        return self.expect("sym", value)

    def expect_kw(self, value):
        return self.expect("name", value)

    # -- program ---------------------------------------------------------

    def parse_program(self) -> Program:
        functions, variables = [], []
        while self.at_kw("declare"):
            self.advance()
            if self.at_kw("function"):
                self.advance()
                functions.append(self._function_decl())
            elif self.at_kw("variable"):
                self.advance()
                name = self.expect("var").value
                self._skip_type_annotation()
                self.expect_sym(":=")
                variables.append((name, self.parse_expr_single()))
            else:
                raise QuerySyntaxError(self.tok.pos, "'function' or 'variable'")
            self.expect_sym(";")
        main = self.parse_expr()
        if not self.at("eof"):
            raise QuerySyntaxError(self.tok.pos, "end of query")
        prog = Program(tuple(functions), tuple(variables), main)
        _check_calls(prog)
        return prog

    def _function_decl(self) -> FunctionDecl:
        name = _strip_prefix(self.expect("name").value)
        self.expect_sym("(")
        params = []
        if not self.at_sym(")"):
            while True:
                params.append(self.expect("var").value)
                self._skip_type_annotation()
                if not self.at_sym(","):
                    break
                self.advance()
        self.expect_sym(")")
        self._skip_type_annotation()
        self.expect_sym("{")
        body = EmptySeq() if self.at_sym("}") else self.parse_expr()
        self.expect_sym("}")
        return FunctionDecl(name, tuple(params), body)

    def _skip_type_annotation(self):
        if self.at_kw("as"):
            self.advance()
            self._seqtype()

    def _seqtype(self) -> SeqType:
        tok = self.expect("name")
        name = tok.value
        if self.at_sym("("):
            self.advance()
            self.expect_sym(")")
            name += "()"
        if name not in _SEQTYPES:
            raise QuerySyntaxError(tok.pos, "a supported sequence type")
        occ = ""
        if self.tok.kind == "sym" and self.tok.value in ("?", "*", "+") and self.tok.pos == self.pos:
            occ = self.advance().value
        return SeqType(name, occ)

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        e = self.parse_expr_single()
        while self.at_sym(","):
            self.advance()
            e = SeqConcat(e, self.parse_expr_single())
        return e

    def parse_expr_single(self) -> Expr:
        tok = self.tok
        if tok.kind == "name":
            nxt = self.peek()
            if tok.value in ("for", "let") and nxt.kind == "var":
                return self._flwor()
            if tok.value == "if" and nxt.is_("sym", "("):
                return self._if()
            if tok.value == "with" and nxt.kind == "var":
                return self._fixpoint()
            if tok.value == "typeswitch" and nxt.is_("sym", "("):
                return self._typeswitch()
        return self._or()

    def _flwor(self) -> Expr:
        clauses = []
        while self.at_kw("for") or self.at_kw("let"):
            kw = self.advance().value
            while True:
                var = self.expect("var").value
                if kw == "for":
                    posvar = None
                    if self.at_kw("at"):
                        self.advance()
                        posvar = self.expect("var").value
                    self.expect_kw("in")
                    clauses.append(("for", var, posvar, self.parse_expr_single()))
                else:
                    self.expect_sym(":=")
                    clauses.append(("let", var, None, self.parse_expr_single()))
                if not self.at_sym(","):
                    break
                self.advance()
        where = None
        if self.at_kw("where"):
            self.advance()
            where = self.parse_expr_single()
        self.expect_kw("return")
        body = self.parse_expr_single()
        if where is not None:
            body = If(where, body, EmptySeq())
        for kind, var, posvar, e in reversed(clauses):
            body = For(var, posvar, e, body) if kind == "for" else Let(var, e, body)
        return body

    def _if(self) -> Expr:
        self.expect_kw("if")
        self.expect_sym("(")
        cond = self.parse_expr()
        self.expect_sym(")")
        self.expect_kw("then")
        then = self.parse_expr_single()
        self.expect_kw("else")
        return If(cond, then, self.parse_expr_single())

    def _fixpoint(self) -> Expr:
        self.expect_kw("with")
        var = self.expect("var").value
        self.expect_kw("seeded")
        self.expect_kw("by")
        seed = self.parse_expr_single()
        self.expect_kw("recurse")
        return Fixpoint(var, seed, self.parse_expr_single())

    def _typeswitch(self) -> Expr:
        self.expect_kw("typeswitch")
        self.expect_sym("(")
        operand = self.parse_expr()
        self.expect_sym(")")
        cases = []
        while self.at_kw("case"):
            self.advance()
            t = self._seqtype()
            self.expect_kw("return")
            cases.append((t, self.parse_expr_single()))
        if not cases:
            raise QuerySyntaxError(self.tok.pos, "'case'")
        self.expect_kw("default")
        self.expect_kw("return")
        return Typeswitch(operand, tuple(cases), self.parse_expr_single())

    def _or(self) -> Expr:
        e = self._and()
        while self.at_kw("or"):
            self.advance()
            e = Logical("or", e, self._and())
        return e

    def _and(self) -> Expr:
        e = self._union()
        while self.at_kw("and"):
            self.advance()
            e = Logical("and", e, self._union())
        return e

    def _union(self) -> Expr:
        e = self._comparison()
        while self.at_kw("union") or self.at_kw("except") or self.at_sym("|"):
            op = self.advance().value
            e = NodeSetOp("except" if op == "except" else "union", e, self._comparison())
        return e

    def _comparison(self) -> Expr:
        e = self._additive()
        tok = self.tok
        if tok.kind == "sym" and tok.value in _GENERAL:
            self.advance()
            return GeneralComparison(tok.value, e, self._additive())
        if tok.kind == "name" and tok.value in _VALUE:
            self.advance()
            return ValueComparison(tok.value, e, self._additive())
        return e

    def _additive(self) -> Expr:
        e = self._multiplicative()
        while self.at_sym("+") or self.at_sym("-"):
            op = self.advance().value
            e = Arith(op, e, self._multiplicative())
        return e

    def _multiplicative(self) -> Expr:
        e = self._unary()
        while self.at_sym("*") or self.tok.kind == "name" and self.tok.value in ("idiv", "div", "mod"):
            op = self.advance().value
            e = Arith(op, e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.at_sym("-"):
            self.advance()
            e = self._unary()
            if isinstance(e, (IntLit, DoubleLit)):
                return type(e)(-e.value)
            return Arith("-", IntLit(0), e)
        if self.at_sym("+"):
            self.advance()
            return self._unary()
        return self._path()

    # -- paths -------------------------------------------------------------

    def _path(self) -> Expr:
        if self.at_sym("/") or self.at_sym("//"):
            slash = self.advance().value
            root = BuiltinCall("root", (ContextItem(),))
            if slash == "//":
                root = PathStep(root, "descendant-or-self", KindTest("node"))
            elif not self._starts_step():
                return root
            return self._relative(self._fold(root, *self._step_expr()))
        first, _ = self._step_expr()
        return self._relative(first)

    def _starts_step(self) -> bool:
        tok = self.tok
        if tok.kind in ("name", "var", "string", "int", "double"):
            return True
        return tok.kind == "sym" and tok.value in ("@", ".", "..", "*", "(", "<")

    def _relative(self, lhs: Expr) -> Expr:
        while self.at_sym("/") or self.at_sym("//"):
            slash = self.advance().value
            if slash == "//":
                lhs = PathStep(lhs, "descendant-or-self", KindTest("node"))
            lhs = self._fold(lhs, *self._step_expr())
        return lhs

    @staticmethod
    def _fold(lhs, rhs, bare):
        if bare:
            return PathStep(lhs, rhs.axis, rhs.test)
        return PathExpr(lhs, rhs)

    def _step_expr(self):
        """Returns (expr, is_bare_axis_step)."""
        tok = self.tok
        axis_step = None
        if tok.is_("sym", "@"):
            self.advance()
            axis_step = PathStep(ContextItem(), "attribute", self._node_test("attribute"))
        elif tok.is_("sym", ".."):
            self.advance()
            axis_step = PathStep(ContextItem(), "parent", KindTest("node"))
        elif tok.is_("sym", "*"):
            self.advance()
            axis_step = PathStep(ContextItem(), "child", NameTest("*"))
        elif tok.kind == "name":
            nxt = self.peek()
            if nxt.is_("sym", "::"):
                if tok.value not in AXES:
                    raise QuerySyntaxError(tok.pos, "a supported axis")
                self.advance()
                self.advance()
                axis_step = PathStep(ContextItem(), tok.value, self._node_test(tok.value))
            elif nxt.is_("sym", "(") and tok.value in _KIND_TESTS:
                axis = "attribute" if tok.value == "attribute" else "child"
                axis_step = PathStep(ContextItem(), axis, self._node_test(axis))
            elif not self._is_primary_keyword(tok, nxt):
                self.advance()
                axis_step = PathStep(ContextItem(), "child", NameTest(tok.value))
        if axis_step is not None:
            e = axis_step
        else:
            e = self._primary()
        had_pred = False
        while self.at_sym("["):
            self.advance()
            e = Predicate(e, self.parse_expr())
            self.expect_sym("]")
            had_pred = True
        return e, axis_step is not None and not had_pred

    def _is_primary_keyword(self, tok, nxt) -> bool:
        if nxt.is_("sym", "("):
            return True  # function call
        if tok.value in ("element", "text") and (nxt.is_("sym", "{") or
                                                 tok.value == "element" and nxt.kind == "name"
                                                 and self.peek(2).is_("sym", "{")):
            return True
        return False

    def _node_test(self, axis):
        tok = self.tok
        if tok.is_("sym", "*"):
            self.advance()
            return NameTest("*")
        name = self.expect("name").value
        if self.at_sym("(") and name in _KIND_TESTS:
            self.advance()
            self.expect_sym(")")
            return KindTest(name)
        return NameTest(name)

    # -- primaries -------------------------------------------------------------

    def _primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "string":
            self.advance()
            return StringLit(tok.value)
        if tok.kind == "int":
            self.advance()
            return IntLit(tok.value)
        if tok.kind == "double":
            self.advance()
            return DoubleLit(tok.value)
        if tok.kind == "var":
            self.advance()
            return VarRef(tok.value)
        if tok.is_("sym", "."):
            self.advance()
            return ContextItem()
        if tok.is_("sym", "("):
            self.advance()
            if self.at_sym(")"):
                self.advance()
                return EmptySeq()
            e = self.parse_expr()
            self.expect_sym(")")
            return e
        if tok.is_("sym", "<"):
            return self._direct_constructor()
        if tok.kind == "name":
            nxt = self.peek()
            if tok.value == "text" and nxt.is_("sym", "{"):
                self.advance()
                return TextConstructor(self._enclosed())
            if tok.value == "element" and not nxt.is_("sym", "("):
                self.advance()
                name = self.expect("name").value
                return ElemConstructor(name, (), (self._enclosed(),))
            if nxt.is_("sym", "("):
                return self._call()
        raise QuerySyntaxError(tok.pos, "an expression")

    def _enclosed(self) -> Expr:
        self.expect_sym("{")
        if self.at_sym("}"):
            self.advance()
            return EmptySeq()
        e = self.parse_expr()
        self.expect_sym("}")
        return e

    def _call(self) -> Expr:
        tok = self.advance()
        name = _strip_prefix(tok.value)
        self.expect_sym("(")
        args = []
        if not self.at_sym(")"):
            args.append(self.parse_expr_single())
            while self.at_sym(","):
                self.advance()
                args.append(self.parse_expr_single())
        self.expect_sym(")")
        if name == "closure":
            if len(args) != 1:
                raise QuerySyntaxError(tok.pos, "closure() with one argument")
            return Closure(args[0])
        if name in BUILTINS:
            if len(args) not in BUILTINS[name]:
                raise QuerySyntaxError(tok.pos, f"{name}() with {BUILTINS[name]} arguments")
            return BuiltinCall(name, tuple(args))
        return FunCall(name, tuple(args))

    # -- direct element constructors ------------------------------------------

    def _direct_constructor(self) -> Expr:
        start = self.tok.pos
        self._tok = None
        e, self.pos = self._direct_element(start)
        return e

    def _direct_element(self, i):
        t = self.text
        m = _NAME.match(t, i + 1)
        if not m:
            raise QuerySyntaxError(i + 1, "element name")
        name = m.group(0)
        i = m.end()
        attrs = []
        while True:
            j = self._skip_ws(i)
            if t.startswith("/>", j):
                return ElemConstructor(name, tuple(attrs), ()), j + 2
            if t.startswith(">", j):
                i = j + 1
                break
            if j == i:
                raise QuerySyntaxError(j, "attribute or '>'")
            am = _NAME.match(t, j)
            if not am:
                raise QuerySyntaxError(j, "attribute name")
            k = self._skip_ws(am.end())
            if not t.startswith("=", k):
                raise QuerySyntaxError(k, "'='")
            k = self._skip_ws(k + 1)
            if k >= len(t) or t[k] not in "\"'":
                raise QuerySyntaxError(k, "quoted attribute value")
            end = t.find(t[k], k + 1)
            if end < 0:
                raise QuerySyntaxError(k, "closing quote")
            attrs.append((am.group(0), _decode_entities(t[k + 1:end], k)))
            i = end + 1
        content = []
        buf = []

        def flush_text():
            s = "".join(buf)
            buf.clear()
            if s.strip():
                content.append(TextConstructor(StringLit(s)))

        while True:
            if i >= len(t):
                raise QuerySyntaxError(i, f"</{name}>")
            c = t[i]
            if t.startswith("</", i):
                flush_text()
                em = _NAME.match(t, i + 2)
                if not em or em.group(0) != name:
                    raise QuerySyntaxError(i, f"</{name}>")
                k = self._skip_ws(em.end())
                if not t.startswith(">", k):
                    raise QuerySyntaxError(k, "'>'")
                return ElemConstructor(name, tuple(attrs), tuple(content)), k + 1
            if c == "<":
                flush_text()
                child, i = self._direct_element(i)
                content.append(child)
            elif c == "{":
                if t.startswith("{{", i):
                    buf.append("{")
                    i += 2
                    continue
                flush_text()
                self.pos, self._tok = i + 1, None
                if self.at_sym("}"):
                    e = EmptySeq()
                else:
                    e = self.parse_expr()
                if not self.at_sym("}"):
                    raise QuerySyntaxError(self.tok.pos, "'}'")
                content.append(e)
                i = self.tok.end
                self._tok = None
            elif c == "}":
                if t.startswith("}}", i):
                    buf.append("}")
                    i += 2
                    continue
                raise QuerySyntaxError(i, "'}}' or content")
            elif c == "&":
                k = t.find(";", i)
                if k < 0:
                    raise QuerySyntaxError(i, "entity reference")
                buf.append(_decode_entities(t[i:k + 1], i))
                i = k + 1
            else:
                buf.append(c)
                i += 1


def _decode_entities(s: str, pos: int) -> str:
    if "&" not in s:
        return s

    def rep(m):
        ent = m.group(1)
        if ent in _ENTITIES:
            return _ENTITIES[ent]
        if ent.startswith("#x"):
            return chr(int(ent[2:], 16))
        if ent.startswith("#"):
            return chr(int(ent[1:]))
        raise QuerySyntaxError(pos, "a predefined entity")

    return re.sub(r"&([^;]*);", rep, s)


def _strip_prefix(name: str) -> str:
    return name[3:] if name.startswith("fn:") else name


def _check_calls(prog: Program) -> None:
    table = prog.function_table()
    if len(table) != len(prog.functions):
        raise QuerySyntaxError(0, "unique function names")
    roots = [f.body for f in prog.functions] + [v for _, v in prog.variables] + [prog.main]
    for r in roots:
        for n in walk(r):
            if isinstance(n, FunCall):
                f = table.get(n.name)
                if f is None:
                    raise UnknownFunction(n.name)
                if len(f.params) != len(n.args):
                    raise UnknownFunction(f"{n.name}#{len(n.args)}")


def parse_query(text: str) -> Program:
    return Parser(text).parse_program()


def parse_expr(text: str) -> Expr:
    """Parse a single expression without function declarations."""
    return parse_query(text).main
