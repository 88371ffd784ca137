"""Dynamic semantics: evaluate expression trees against a node store."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from itertools import islice
from typing import Optional

from . import xdm
from .errors import DynamicError, NoFocus, TypeErr, UnboundVariable
from .expr import (
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
    StringLit,
    TextConstructor,
    Typeswitch,
    ValueComparison,
    VarRef,
    binder_names,
    children,
    desugar,
    free_vars,
    walk,
)
from .xdm import Node, NodeStore

STRATEGIES = ("naive", "delta", "auto")
CHECKS = ("syntactic", "algebraic", "both")


@dataclass
class EngineConfig:
    id_attribute: str = "id"
    max_fixpoint_iterations: int = 10_000
    strategy: str = "naive"
    check: str = "both"
    recursive_calls: str = "assume"  # or "reject"
    base_dir: str = "."
    # keep the seed nodes in the result (res_0 = seed instead of body(seed))
    seed_in_result: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.check not in CHECKS:
            raise ValueError(f"unknown check {self.check!r}")
        if self.max_fixpoint_iterations < 1:
            raise ValueError("max_fixpoint_iterations must be positive")


@dataclass(frozen=True)
class Focus:
    item: object
    position: int = 1
    last: int = 1


@dataclass
class Env:
    vars: dict = field(default_factory=dict)
    focus: Optional[Focus] = None

    def bind(self, name: str, value: list) -> "Env":
        vars = dict(self.vars)
        vars[name] = value
        return Env(vars, self.focus)

    def with_focus(self, item, position=1, last=1) -> "Env":
        return Env(self.vars, Focus(item, position, last))


# -- atomization and comparison ----------------------------------------------


def atomize(seq) -> list:
    return [i.string_value if isinstance(i, Node) else i for i in seq]


def as_number(v):
    """Numeric reading of an atomic value, or None."""
    if isinstance(v, bool):
        return None
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, str):
        s = v.strip()
        try:
            return int(s)
        except ValueError:
            try:
                f = float(s)
            except ValueError:
                return None
            return None if math.isnan(f) else f
    return None


_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}
_VALUE_OPS = {"eq": "=", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}


def compare_atomic(op: str, a, b) -> bool:
    """Untyped comparison: numeric when both sides read as numbers, else string."""
    fn = _OPS[_VALUE_OPS.get(op, op)]
    if isinstance(a, bool) and isinstance(b, bool):
        return fn(a, b)
    na, nb = as_number(a), as_number(b)
    if na is not None and nb is not None:
        return fn(na, nb)
    return fn(xdm.format_atomic(a), xdm.format_atomic(b))


def general_compare(op: str, s1, s2) -> bool:
    if op == "=" and len(s1) * len(s2) > 16:
        if len(s1) > len(s2):
            s1, s2 = s2, s1
        k2 = _eq_keys(s2)
        if k2 is not None:
            k1 = _eq_keys(s1, cache=False)
            if k1 is not None:
                return not k1.isdisjoint(k2)
    a1, a2 = atomize(s1), atomize(s2)
    return any(compare_atomic(op, a, b) for a in a1 for b in a2)


_key_cache: list = [None, None]  # (sequence, keys); loop-invariant operands repeat


def _eq_keys(seq, cache=True):
    """Hash keys under which ``compare_atomic("=")`` is key equality, or None."""
    if cache and _key_cache[0] is seq:
        return _key_cache[1]
    keys = set()
    for v in atomize(seq):
        if isinstance(v, bool) or (isinstance(v, float) and math.isnan(v)):
            keys = None
            break
        n = as_number(v)
        keys.add(("n", n) if n is not None else ("s", xdm.format_atomic(v)))
    if cache:
        _key_cache[:] = [seq, keys]
    return keys


_FOCUS_BUILTINS = {"position": 0, "last": 0, "string": 0, "name": 0, "root": 0, "id": 1}


def focus_dependent(e: Expr) -> bool:
    """True when ``e`` may read the context item, position or size."""
    if isinstance(e, (ContextItem, Closure)):
        return True
    if isinstance(e, (PathExpr, Predicate)):
        return focus_dependent(e.e1)
    if isinstance(e, PathStep):
        return focus_dependent(e.input)
    if isinstance(e, BuiltinCall) and len(e.args) <= _FOCUS_BUILTINS.get(e.name, -1):
        return True
    return any(focus_dependent(c) for c in children(e))


def _hoistable(e: Expr, bound: set) -> bool:
    if isinstance(e, (VarRef, StringLit, IntLit, DoubleLit, EmptySeq)):
        return False
    for n in walk(e):
        if isinstance(n, (FunCall, Fixpoint, ElemConstructor, TextConstructor)):
            return False
    return not (free_vars(e) & bound) and not focus_dependent(e)


def invariant_parts(region: Expr, bound: set) -> list:
    """Maximal subexpressions of ``region`` that read neither ``bound`` nor the focus.

    ``bound`` is extended with every variable bound inside ``region``, so the
    parts evaluate to the same value wherever they occur in it.
    """
    bound = set(bound) | binder_names(region)
    out: list = []
    stack = [region]
    while stack:
        e = stack.pop()
        if _hoistable(e, bound):
            out.append(e)
        else:
            stack.extend(children(e))
    return out


def _is_dos_step(e) -> bool:
    return (isinstance(e, PathStep) and e.axis == "descendant-or-self"
            and isinstance(e.test, xdm.KindTest) and e.test.kind == "node")


def _is_filtered_child_step(e) -> bool:
    from .distcheck import statically_non_numeric, uses_outer_position

    return (isinstance(e, Predicate) and isinstance(e.e1, PathStep)
            and isinstance(e.e1.input, ContextItem) and e.e1.axis == "child"
            and statically_non_numeric(e.e2) and not uses_outer_position(e.e2))


_ABSENT = object()
_PENDING = object()


class _HoistScope:
    """Registers invariant parts as pending for the duration of a loop."""

    def __init__(self, table: dict, keys: tuple):
        self.table, self.keys = table, keys
        self.saved: dict = {}

    def __enter__(self):
        for k in self.keys:
            if k in self.table:
                self.saved[k] = self.table[k]
            self.table[k] = _PENDING
        return self

    def __exit__(self, *exc):
        for k in self.keys:
            if k in self.saved:
                self.table[k] = self.saved[k]
            else:
                self.table.pop(k, None)
        return False


def effective_boolean_value(seq) -> bool:
    if not seq:
        return False
    first = seq[0]
    if isinstance(first, Node):
        return True
    if len(seq) > 1:
        raise TypeErr("effective boolean value of a multi-item atomic sequence")
    if isinstance(first, bool):
        return first
    if isinstance(first, (int, float)):
        return first != 0 and not (isinstance(first, float) and math.isnan(first))
    return first != ""


def is_numeric(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def deep_equal_items(a, b) -> bool:
    if isinstance(a, Node) and isinstance(b, Node):
        return _deep_equal_nodes(a, b)
    if isinstance(a, Node) or isinstance(b, Node):
        return False
    if is_numeric(a) and is_numeric(b):
        return a == b
    return type(a) is type(b) and a == b


def _deep_equal_nodes(a: Node, b: Node) -> bool:
    if a.kind != b.kind or a.name != b.name:
        return False
    if a.kind in (xdm.TEXT, xdm.ATTRIBUTE):
        return a.value == b.value
    if {(x.name, x.value) for x in a.attributes} != {(x.name, x.value) for x in b.attributes}:
        return False
    if len(a.children) != len(b.children):
        return False
    return all(_deep_equal_nodes(x, y) for x, y in zip(a.children, b.children))


_SEQTYPE_ITEM = {
    "node()": lambda i: isinstance(i, Node),
    "element()": lambda i: isinstance(i, Node) and i.kind == xdm.ELEMENT,
    "attribute()": lambda i: isinstance(i, Node) and i.kind == xdm.ATTRIBUTE,
    "text()": lambda i: isinstance(i, Node) and i.kind == xdm.TEXT,
    "xs:string": lambda i: isinstance(i, str),
    "xs:integer": lambda i: isinstance(i, int) and not isinstance(i, bool),
    "xs:boolean": lambda i: isinstance(i, bool),
    "xs:double": lambda i: isinstance(i, float),
    "item()": lambda i: True,
}


def matches_seqtype(seq, t) -> bool:
    if t.name == "empty-sequence()":
        return not seq
    n = len(seq)
    if t.occurrence == "" and n != 1 or t.occurrence == "?" and n > 1:
        return False
    if t.occurrence == "+" and n == 0:
        return False
    return all(_SEQTYPE_ITEM[t.name](i) for i in seq)


def _arith(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0 and op in ("idiv", "div", "mod") and not isinstance(b, float):
        raise DynamicError(f"division by zero in {op}")
    if op == "idiv":
        if isinstance(b, float) and b == 0:
            raise DynamicError("division by zero in idiv")
        return int(a / b) if isinstance(a, float) or isinstance(b, float) else _trunc_div(a, b)
    if op == "div":
        if isinstance(a, int) and isinstance(b, int) and a % b == 0:
            return a // b
        return a / b if b != 0 else math.copysign(math.inf, a) if a else math.nan
    if op == "mod":
        if isinstance(a, int) and isinstance(b, int):
            return a - b * _trunc_div(a, b)
        return math.fmod(a, b)
    raise DynamicError(f"unknown operator {op}")


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


# -- the evaluator -------------------------------------------------------------


class Evaluator:
    """Evaluates expressions of one program against one store.

    ``fixpoint_runs`` accumulates a record per evaluated fixpoint
    (statistics plus the strategy decision).
    """

    def __init__(self, store: NodeStore, program: Optional[Program] = None,
                 config: Optional[EngineConfig] = None):
        self.store = store
        self.program = program or Program()
        self.functions = self.program.function_table()
        self.config = config or EngineConfig()
        self.globals: dict = {}
        self.fixpoint_runs: list = []
        self._decisions: dict = {}
        self._hoisted: dict = {}  # id(expr) -> cached value of a loop-invariant part
        self._invariants: dict = {}
        self._keep: list = []
        self._desugared: dict = {}
        self._dispatch = {
            StringLit: lambda e, env: [e.value],
            IntLit: lambda e, env: [e.value],
            DoubleLit: lambda e, env: [float(e.value)],
            EmptySeq: lambda e, env: [],
            ContextItem: self._context_item,
            VarRef: self._var,
            SeqConcat: lambda e, env: self.eval(e.e1, env) + self.eval(e.e2, env),
            NodeSetOp: self._node_set_op,
            PathStep: self._path_step,
            PathExpr: self._path_expr,
            Predicate: self._predicate,
            For: self._for,
            Let: lambda e, env: self.eval(e.e2, env.bind(e.var, self.eval(e.e1, env))),
            If: self._if,
            Typeswitch: self._typeswitch,
            GeneralComparison: lambda e, env: [
                general_compare(e.op, self.eval(e.e1, env), self.eval(e.e2, env))],
            ValueComparison: self._value_comparison,
            Arith: self._arith,
            Logical: self._logical,
            FunCall: self._funcall,
            BuiltinCall: self._builtin,
            ElemConstructor: self._elem_constructor,
            TextConstructor: self._text_constructor,
            Fixpoint: self._fixpoint,
            Closure: self._closure,
        }

    # entry points

    def run(self, focus_item=None) -> list:
        env = self.global_env()
        if focus_item is not None:
            env = env.with_focus(focus_item)
        return self.eval(self.program.main, env)

    def global_env(self) -> Env:
        if len(self.globals) != len(self.program.variables):
            for name, value in self.program.variables:
                self.globals[name] = self.eval(value, Env(dict(self.globals)))
        return Env(dict(self.globals))

    def eval(self, e: Expr, env: Env) -> list:
        if self._hoisted:
            v = self._hoisted.get(id(e), _ABSENT)
            if v is not _ABSENT:
                if v is _PENDING:
                    v = self._hoisted[id(e)] = self._dispatch[type(e)](e, env)
                return v
        try:
            fn = self._dispatch[type(e)]
        except KeyError:
            raise TypeError(f"no evaluation rule for {type(e).__name__}") from None
        return fn(e, env)

    def _closure(self, e, env):
        d = self._desugared.get(id(e))
        if d is None:
            d = self._desugared[id(e)] = desugar(e)
            self._keep.append(e)
        return self.eval(d, env)

    def _loop(self, scope: Expr, region: Expr, bound: tuple):
        """Enter a loop over ``region``: its invariant parts get evaluated once."""
        keys = self._invariants.get(id(scope))
        if keys is None:
            parts = invariant_parts(region, set(bound))
            keys = self._invariants[id(scope)] = tuple(id(p) for p in parts)
            self._keep.append(scope)  # ids stay valid while the tree is referenced
        return _HoistScope(self._hoisted, keys)

    def resolve_doc(self, uri: str) -> Node:
        doc = self.store.documents.get(uri)
        if doc is not None:
            return doc
        path = uri if os.path.isabs(uri) else os.path.join(self.config.base_dir, uri)
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise DynamicError(f"cannot open document {uri!r}: {exc}") from None
        return self.store.parse_document(text, uri)

    # basic forms

    def _context_item(self, e, env):
        if env.focus is None:
            raise NoFocus("context item is undefined")
        return [env.focus.item]

    def _var(self, e, env):
        try:
            return env.vars[e.name]
        except KeyError:
            raise UnboundVariable(f"${e.name}") from None

    def _node_set_op(self, e, env):
        s1, s2 = self.eval(e.e1, env), self.eval(e.e2, env)
        if e.op == "union":
            return xdm.node_union(s1, s2)
        return xdm.node_except(s1, s2)

    def _nodes(self, seq, what):
        for i in seq:
            if not isinstance(i, Node):
                raise TypeErr(f"{what}: atomic value {i!r} where a node is required")
        return seq

    def _path_step(self, e, env):
        if e.axis == "child" and _is_dos_step(e.input):
            # X//T read as X/descendant::T
            base = self._nodes(self.eval(e.input.input, env), "path step")
            return self._descendants(base, e.test)
        inp = self._nodes(self.eval(e.input, env), "path step")
        if len(inp) == 1:
            return xdm.axis_step(inp[0], e.axis, e.test)
        out = []
        for n in inp:
            out.extend(xdm.axis_step(n, e.axis, e.test))
        return xdm.ddo(out)

    def _descendants(self, base, test) -> list:
        out = []
        for n in base:
            out.extend(xdm.axis_step(n, "descendant", test))
        return xdm.ddo(out) if len(base) > 1 else out

    def _path_expr(self, e, env):
        if _is_dos_step(e.e1) and _is_filtered_child_step(e.e2):
            # X//T[p] with a filtering predicate read as X/descendant::T[p]
            base = self._nodes(self.eval(e.e1.input, env), "path expression")
            out = []
            cands = self._descendants(base, e.e2.e1.test)
            with self._loop(e, e.e2.e2, ()):
                for n in cands:
                    if effective_boolean_value(self.eval(e.e2.e2, env.with_focus(n, 1, 1))):
                        out.append(n)
            return out
        inp = xdm.ddo(self._nodes(self.eval(e.e1, env), "path expression"))
        out = []
        last = len(inp)
        if last > 1 and not isinstance(e.e2, PathStep):
            with self._loop(e, e.e2, ()):
                for i, n in enumerate(inp, 1):
                    out.extend(self.eval(e.e2, env.with_focus(n, i, last)))
        else:
            for i, n in enumerate(inp, 1):
                out.extend(self.eval(e.e2, env.with_focus(n, i, last)))
        if all(isinstance(i, Node) for i in out):
            return xdm.ddo(out)
        if any(isinstance(i, Node) for i in out):
            raise TypeErr("path expression yields a mix of nodes and atomic values")
        return out

    def _predicate(self, e, env):
        base = e.e1
        reverse = (isinstance(base, PathStep) and isinstance(base.input, ContextItem)
                   and base.axis in xdm.REVERSE_AXES)
        if (isinstance(e.e2, IntLit) and isinstance(base, PathStep)
                and isinstance(base.input, ContextItem)):
            # positional shortcut: walk the axis lazily
            ctx = self._context_item(base.input, env)[0]
            self._nodes([ctx], "path step")
            if e.e2.value < 1:
                return []
            hits = (n for n in xdm.iter_axis(ctx, base.axis) if xdm.matches(n, base.axis, base.test))
            return list(islice(hits, e.e2.value - 1, e.e2.value))
        seq = self.eval(base, env)
        if reverse:
            seq = seq[::-1]
        if isinstance(e.e2, IntLit):
            k = e.e2.value
            return [seq[k - 1]] if 1 <= k <= len(seq) else []
        last = len(seq)
        out = []
        with self._loop(e, e.e2, ()):
            for i, item in enumerate(seq, 1):
                v = self.eval(e.e2, env.with_focus(item, i, last))
                if len(v) == 1 and is_numeric(v[0]):
                    if v[0] == i:
                        out.append(item)
                elif effective_boolean_value(v):
                    out.append(item)
        if reverse:
            out.reverse()
        return out

    def _for(self, e, env):
        out = []
        seq = self.eval(e.in_, env)
        if len(seq) < 2:
            return self._for_items(e, env, seq, out)
        with self._loop(e, e.ret, (e.var, e.posvar)):
            return self._for_items(e, env, seq, out)

    def _for_items(self, e, env, seq, out):
        for i, item in enumerate(seq, 1):
            inner = env.bind(e.var, [item])
            if e.posvar:
                inner = inner.bind(e.posvar, [i])
            out.extend(self.eval(e.ret, inner))
        return out

    def _if(self, e, env):
        if effective_boolean_value(self.eval(e.cond, env)):
            return self.eval(e.then, env)
        return self.eval(e.else_, env)

    def _typeswitch(self, e, env):
        v = self.eval(e.operand, env)
        for t, branch in e.cases:
            if matches_seqtype(v, t):
                return self.eval(branch, env)
        return self.eval(e.default, env)

    def _singleton_atomic(self, seq, what):
        vals = atomize(seq)
        if len(vals) > 1:
            raise TypeErr(f"{what}: sequence of more than one item")
        return vals[0] if vals else None

    def _value_comparison(self, e, env):
        a = self._singleton_atomic(self.eval(e.e1, env), e.op)
        b = self._singleton_atomic(self.eval(e.e2, env), e.op)
        if a is None or b is None:
            return []
        return [compare_atomic(e.op, a, b)]

    def _arith(self, e, env):
        a = self._singleton_atomic(self.eval(e.e1, env), e.op)
        b = self._singleton_atomic(self.eval(e.e2, env), e.op)
        if a is None or b is None:
            return []
        na, nb = as_number(a), as_number(b)
        if na is None or nb is None:
            raise TypeErr(f"non-numeric operand to {e.op}: {a!r}, {b!r}")
        return [_arith(e.op, na, nb)]

    def _logical(self, e, env):
        left = effective_boolean_value(self.eval(e.e1, env))
        if e.op == "and":
            return [left and effective_boolean_value(self.eval(e.e2, env))]
        return [left or effective_boolean_value(self.eval(e.e2, env))]

    def _funcall(self, e, env):
        f = self.functions[e.name]
        args = [self.eval(a, env) for a in e.args]
        vars = dict(self.globals)
        vars.update(zip(f.params, args))
        return self.eval(f.body, Env(vars))

    # constructors

    def _elem_constructor(self, e, env):
        store = self.store
        kids = [store.construct_node(xdm.ATTRIBUTE, name=n, value=v) for n, v in e.attrs]
        for c in e.content:
            atoms = []
            for item in self.eval(c, env):
                if isinstance(item, Node):
                    if atoms:
                        kids.append(store.construct_node(xdm.TEXT, value=" ".join(atoms)))
                        atoms = []
                    kids.append(item)
                else:
                    atoms.append(xdm.format_atomic(item))
            if atoms:
                kids.append(store.construct_node(xdm.TEXT, value=" ".join(atoms)))
        return [store.construct_node(xdm.ELEMENT, name=e.name, children=kids)]

    def _text_constructor(self, e, env):
        vals = atomize(self.eval(e.content, env))
        if not vals:
            return []
        return [self.store.construct_node(xdm.TEXT, value=" ".join(map(xdm.format_atomic, vals)))]

    def _fixpoint(self, e, env):
        from .fixpoint import evaluate_fixpoint

        return evaluate_fixpoint(self, e, env)

    # builtins

    def _focus_node(self, env, what):
        if env.focus is None:
            raise NoFocus(f"{what} needs a context item")
        return env.focus.item

    def _builtin(self, e, env):
        name = e.name
        if name == "position":
            if env.focus is None:
                raise NoFocus("position()")
            return [env.focus.position]
        if name == "last":
            if env.focus is None:
                raise NoFocus("last()")
            return [env.focus.last]
        if name == "true":
            return [True]
        if name == "false":
            return [False]
        args = [self.eval(a, env) for a in e.args]
        if name == "count":
            return [len(args[0])]
        if name == "empty":
            return [not args[0]]
        if name == "exists":
            return [bool(args[0])]
        if name == "not":
            return [not effective_boolean_value(args[0])]
        if name == "boolean":
            return [effective_boolean_value(args[0])]
        if name == "data":
            return atomize(args[0])
        if name in ("string", "name"):
            seq = args[0] if args else [self._focus_node(env, name + "()")]
            if not seq:
                return [""]
            if len(seq) > 1:
                raise TypeErr(f"{name}() of a multi-item sequence")
            item = seq[0]
            if name == "name":
                if not isinstance(item, Node):
                    raise TypeErr("name() of an atomic value")
                return [item.name or ""]
            return [item.string_value if isinstance(item, Node) else xdm.format_atomic(item)]
        if name == "root":
            seq = args[0] if args else [self._focus_node(env, "root()")]
            return xdm.ddo([n.root for n in self._nodes(seq, "root()")])
        if name == "doc":
            uri = self._singleton_atomic(args[0], "doc()")
            if uri is None:
                return []
            return [self.resolve_doc(str(uri))]
        if name == "id":
            return self._id(args, env)
        if name == "deep-equal":
            a, b = args
            return [len(a) == len(b) and all(deep_equal_items(x, y) for x, y in zip(a, b))]
        if name == "distinct-values":
            seen, out = set(), []
            for v in atomize(args[0]):
                k = xdm.item_key(v)
                if k not in seen:
                    seen.add(k)
                    out.append(v)
            return out
        if name in ("max", "min", "sum"):
            return self._aggregate(name, atomize(args[0]))
        raise DynamicError(f"unknown builtin {name}()")

    def _aggregate(self, name, vals):
        if not vals:
            return [0] if name == "sum" else []
        nums = [as_number(v) for v in vals]
        if any(n is None for n in nums):
            if name == "sum":
                raise TypeErr("sum() over non-numeric values")
            strs = [xdm.format_atomic(v) for v in vals]
            return [max(strs) if name == "max" else min(strs)]
        if name == "sum":
            return [sum(nums)]
        return [max(nums) if name == "max" else min(nums)]

    def _id(self, args, env):
        if len(args) == 2:
            nodes = self._nodes(args[1], "id()")
            if len(nodes) != 1:
                raise TypeErr("id(): second argument must be a single node")
            root = nodes[0].root
        elif env.focus is not None:
            item = env.focus.item
            if not isinstance(item, Node):
                raise TypeErr("id(): context item is not a node")
            root = item.root
        else:
            docs = {d.id: d for d in self.store.documents.values()}
            if len(docs) != 1:
                raise DynamicError("id(): no context item and no unique open document")
            root = next(iter(docs.values()))
        index = self.store.id_index(root, self.config.id_attribute)
        out = set()
        for v in atomize(args[0]):
            for tok in xdm.format_atomic(v).split():
                hit = index.get(tok)
                if hit is not None:
                    out.add(hit)
        return xdm.ddo(out)


def evaluate_query(text: str, store: Optional[NodeStore] = None,
                   config: Optional[EngineConfig] = None, focus_item=None):
    """Parse and run a query; returns (result, evaluator)."""
    from .parser import parse_query

    ev = Evaluator(store or NodeStore(), parse_query(text), config)
    return ev.run(focus_item), ev
