"""Expression trees for the query language, free variables, desugaring, unparsing."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

from .xdm import NodeTest


class Expr:
    """Base class of all AST nodes.  Instances are immutable."""

    def __str__(self):
        return unparse(self)


@dataclass(frozen=True)
class StringLit(Expr):
    value: str


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class DoubleLit(Expr):
    value: float


@dataclass(frozen=True)
class EmptySeq(Expr):
    pass


@dataclass(frozen=True)
class ContextItem(Expr):
    pass


@dataclass(frozen=True)
class VarRef(Expr):
    name: str


@dataclass(frozen=True)
class SeqConcat(Expr):
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class NodeSetOp(Expr):
    op: str  # union | except
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class PathStep(Expr):
    """``input/axis::test``; a bare step has ``ContextItem()`` as input."""

    input: Expr
    axis: str
    test: NodeTest


@dataclass(frozen=True)
class PathExpr(Expr):
    """``e1/e2`` where ``e2`` is re-evaluated with each node of ``e1`` as focus."""

    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class Predicate(Expr):
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class For(Expr):
    var: str
    posvar: Optional[str]
    in_: Expr
    ret: Expr


@dataclass(frozen=True)
class Let(Expr):
    var: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    else_: Expr


@dataclass(frozen=True)
class SeqType:
    name: str  # node(), element(), attribute(), text(), xs:string, ...
    occurrence: str = ""  # "", "?", "*", "+"

    def __str__(self):
        return self.name + self.occurrence


@dataclass(frozen=True)
class Typeswitch(Expr):
    operand: Expr
    cases: tuple  # of (SeqType, Expr)
    default: Expr


@dataclass(frozen=True)
class GeneralComparison(Expr):
    op: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class ValueComparison(Expr):
    op: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class Arith(Expr):
    op: str
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class Logical(Expr):
    op: str  # and | or
    e1: Expr
    e2: Expr


@dataclass(frozen=True)
class FunCall(Expr):
    name: str
    args: tuple


@dataclass(frozen=True)
class BuiltinCall(Expr):
    name: str
    args: tuple


@dataclass(frozen=True)
class ElemConstructor(Expr):
    name: str
    attrs: tuple  # of (name, literal value)
    content: tuple  # of Expr


@dataclass(frozen=True)
class TextConstructor(Expr):
    content: Expr


@dataclass(frozen=True)
class Fixpoint(Expr):
    var: str
    seed: Expr
    body: Expr


@dataclass(frozen=True)
class Closure(Expr):
    e: Expr


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    params: tuple
    body: Expr


@dataclass(frozen=True)
class Program:
    functions: tuple = ()
    variables: tuple = ()  # of (name, Expr), in declaration order
    main: Expr = EmptySeq()

    def function_table(self) -> dict:
        return {f.name: f for f in self.functions}


BUILTINS = {
    "count": (1,),
    "empty": (1,),
    "exists": (1,),
    "not": (1,),
    "boolean": (1,),
    "data": (1,),
    "string": (0, 1),
    "name": (0, 1),
    "id": (1, 2),
    "doc": (1,),
    "position": (0,),
    "last": (0,),
    "root": (0, 1),
    "deep-equal": (2,),
    "true": (0,),
    "false": (0,),
    "max": (1,),
    "min": (1,),
    "sum": (1,),
    "distinct-values": (1,),
}

CONSTRUCTORS = (ElemConstructor, TextConstructor)


# -- generic traversal ---------------------------------------------------------


def children(e: Expr) -> list:
    out = []
    for f in dataclasses.fields(e):
        v = getattr(e, f.name)
        if isinstance(v, Expr):
            out.append(v)
        elif isinstance(v, tuple):
            for x in v:
                if isinstance(x, Expr):
                    out.append(x)
                elif isinstance(x, tuple):
                    out.extend(y for y in x if isinstance(y, Expr))
    return out


def map_children(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    changes = {}
    for f in dataclasses.fields(e):
        v = getattr(e, f.name)
        if isinstance(v, Expr):
            changes[f.name] = fn(v)
        elif isinstance(v, tuple):
            changes[f.name] = tuple(_map_tuple_entry(x, fn) for x in v)
    return dataclasses.replace(e, **changes) if changes else e


def _map_tuple_entry(x, fn):
    if isinstance(x, Expr):
        return fn(x)
    if isinstance(x, tuple):
        return tuple(fn(y) if isinstance(y, Expr) else y for y in x)
    return x


def walk(e: Expr):
    yield e
    for c in children(e):
        yield from walk(c)


# -- free variables ----------------------------------------------------------


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, VarRef):
        return frozenset((e.name,))
    if isinstance(e, For):
        bound = {e.var} | ({e.posvar} if e.posvar else set())
        return free_vars(e.in_) | (free_vars(e.ret) - bound)
    if isinstance(e, Let):
        return free_vars(e.e1) | (free_vars(e.e2) - {e.var})
    if isinstance(e, Fixpoint):
        return free_vars(e.seed) | (free_vars(e.body) - {e.var})
    out = frozenset()
    for c in children(e):
        out |= free_vars(c)
    return out


def binder_names(e: Expr) -> set:
    """Names of all variables bound anywhere inside ``e``."""
    out = set()
    for n in walk(e):
        if isinstance(n, (For, Let, Fixpoint)):
            out.add(n.var)
            if isinstance(n, For) and n.posvar:
                out.add(n.posvar)
    return out


def contains_constructor(e: Expr) -> bool:
    return any(isinstance(n, CONSTRUCTORS) for n in walk(e))


# -- desugaring ----------------------------------------------------------------


def _bound_names(e: Expr) -> set:
    out = set()
    for n in walk(e):
        if isinstance(n, VarRef):
            out.add(n.name)
        elif isinstance(n, (For, Let, Fixpoint)):
            out.add(n.var)
            if isinstance(n, For) and n.posvar:
                out.add(n.posvar)
    return out


def fresh_var(avoid, base="x") -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def desugar(e: Expr) -> Expr:
    """Replace every ``closure(s)`` by ``with $x seeded by . recurse $x/s``."""
    e = map_children(e, desugar)
    if isinstance(e, Closure):
        x = fresh_var(_bound_names(e.e))
        return Fixpoint(x, ContextItem(), PathExpr(VarRef(x), e.e))
    return e


def desugar_program(p: Program) -> Program:
    return Program(
        tuple(FunctionDecl(f.name, f.params, desugar(f.body)) for f in p.functions),
        tuple((n, desugar(v)) for n, v in p.variables),
        desugar(p.main),
    )


def substitute_var(e: Expr, old: str, new: str) -> Expr:
    """Rename free occurrences of ``$old`` to ``$new`` (``new`` must be fresh)."""
    if isinstance(e, VarRef):
        return VarRef(new) if e.name == old else e
    if isinstance(e, For):
        in_ = substitute_var(e.in_, old, new)
        if old in (e.var, e.posvar):
            return dataclasses.replace(e, in_=in_)
        return dataclasses.replace(e, in_=in_, ret=substitute_var(e.ret, old, new))
    if isinstance(e, Let):
        e1 = substitute_var(e.e1, old, new)
        if e.var == old:
            return dataclasses.replace(e, e1=e1)
        return dataclasses.replace(e, e1=e1, e2=substitute_var(e.e2, old, new))
    if isinstance(e, Fixpoint):
        seed = substitute_var(e.seed, old, new)
        if e.var == old:
            return dataclasses.replace(e, seed=seed)
        return dataclasses.replace(e, seed=seed, body=substitute_var(e.body, old, new))
    return map_children(e, lambda c: substitute_var(c, old, new))


# -- unparsing -----------------------------------------------------------------


def _quote(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def _test(t: NodeTest) -> str:
    return str(t)


def unparse(e: Expr) -> str:
    """Concrete syntax that parses back to an equal tree (fully parenthesized)."""
    u = unparse
    if isinstance(e, StringLit):
        return _quote(e.value)
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, DoubleLit):
        return repr(float(e.value))
    if isinstance(e, EmptySeq):
        return "()"
    if isinstance(e, ContextItem):
        return "."
    if isinstance(e, VarRef):
        return f"${e.name}"
    if isinstance(e, SeqConcat):
        return f"({u(e.e1)}, {u(e.e2)})"
    if isinstance(e, (NodeSetOp, Logical)):
        return f"({u(e.e1)} {e.op} {u(e.e2)})"
    if isinstance(e, (GeneralComparison, ValueComparison, Arith)):
        return f"({u(e.e1)} {e.op} {u(e.e2)})"
    if isinstance(e, PathStep):
        step = f"{e.axis}::{_test(e.test)}"
        if isinstance(e.input, ContextItem):
            return f"(./{step})"
        return f"({u(e.input)}/{step})"
    if isinstance(e, PathExpr):
        return f"({u(e.e1)}/{u(e.e2)})"
    if isinstance(e, Predicate):
        return f"({u(e.e1)})[{u(e.e2)}]"
    if isinstance(e, For):
        at = f" at ${e.posvar}" if e.posvar else ""
        return f"(for ${e.var}{at} in {u(e.in_)} return {u(e.ret)})"
    if isinstance(e, Let):
        return f"(let ${e.var} := {u(e.e1)} return {u(e.e2)})"
    if isinstance(e, If):
        return f"(if ({u(e.cond)}) then {u(e.then)} else {u(e.else_)})"
    if isinstance(e, Typeswitch):
        cases = " ".join(f"case {t} return {u(c)}" for t, c in e.cases)
        return f"(typeswitch ({u(e.operand)}) {cases} default return {u(e.default)})"
    if isinstance(e, (FunCall, BuiltinCall)):
        return f"{e.name}({', '.join(u(a) for a in e.args)})"
    if isinstance(e, ElemConstructor):
        attrs = "".join(f" {n}={_quote(v)}" for n, v in e.attrs)
        body = "".join("{" + u(c) + "}" for c in e.content)
        return f"<{e.name}{attrs}>{body}</{e.name}>"
    if isinstance(e, TextConstructor):
        return f"text {{{u(e.content)}}}"
    if isinstance(e, Fixpoint):
        return f"(with ${e.var} seeded by {u(e.seed)} recurse {u(e.body)})"
    if isinstance(e, Closure):
        return f"closure({u(e.e)})"
    raise TypeError(f"cannot unparse {e!r}")


def unparse_program(p: Program) -> str:
    parts = []
    for name, value in p.variables:
        parts.append(f"declare variable ${name} := {unparse(value)};")
    for f in p.functions:
        params = ", ".join(f"${v}" for v in f.params)
        parts.append(f"declare function {f.name}({params}) {{ {unparse(f.body)} }};")
    parts.append(unparse(p.main))
    return "\n".join(parts)
