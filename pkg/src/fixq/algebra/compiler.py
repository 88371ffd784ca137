"""Loop-lifting compiler from expression trees to plan DAGs.

Every compiled expression is a plan producing an ``iter|pos|item`` table
relative to the ``loop`` relation of its scope (one row per live iteration).
Entering a ``for``, a path step's right-hand side or a predicate tags each
input row with a fresh inner iteration; variables of the enclosing scope are
lifted into the inner scope by joining with the outer/inner map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ..distcheck import statically_non_numeric, uses_outer_position
from ..errors import Unsupported
from ..expr import (
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
    SeqConcat,
    StringLit,
    TextConstructor,
    ValueComparison,
    VarRef,
    contains_constructor,
    desugar,
    free_vars,
    walk,
)
from ..xdm import REVERSE_AXES
from .plan import CompiledPlan, PlanNode, PlanTemplate, next_id, topo_order

ITEM_COLS = ("iter", "pos", "item")
FOCUS = (".", "position()", "last()")


def N(op, *children, order_only=False, **params) -> PlanNode:
    return PlanNode(op, params, list(children), order_only)


def project(q, *specs) -> PlanNode:
    """``project(q, "iter", "item:val")`` keeps/renames columns (``out:in``)."""
    cols = tuple(tuple(s.split(":")) if ":" in s else (s, s) for s in specs)
    return N("Project", q, cols=cols)


def join(left, right, *conds) -> PlanNode:
    """Equi-join; each cond is ``(left_col, op, right_col)`` with op ``eq`` or ``token``."""
    return N("Join", left, right, conds=tuple(conds))


def literal(cols, rows, name=None) -> PlanNode:
    params = {"cols": tuple(cols), "rows": list(rows)}
    if name is not None:
        params["name"] = name
    return N("LiteralTable", **params)


def const(q, col, value) -> PlanNode:
    return N("MapOp", q, fn="const", out=col, ins=(), value=value)


def empty_seq() -> PlanNode:
    return literal(ITEM_COLS, [])


class LazyEnv:
    """Variable plans of a scope; derived scopes build their plans on first use."""

    def __init__(self, base: Optional[dict] = None, parent: "LazyEnv" = None,
                 derive: Optional[Callable] = None):
        self._plans = dict(base or {})
        self.parent = parent
        self.derive = derive

    def get(self, name) -> Optional[PlanNode]:
        if name in self._plans:
            return self._plans[name]
        if self.parent is None:
            return None
        outer = self.parent.get(name)
        if outer is None:
            return None
        plan = self.derive(outer)
        self._plans[name] = plan
        return plan

    def child(self, derive=None, **binds) -> "LazyEnv":
        env = LazyEnv(parent=self, derive=derive or (lambda p: p))
        env._plans.update(binds)
        return env

    def bind(self, name, plan) -> "LazyEnv":
        return self.child(**{name: plan})


@dataclass
class Scope:
    loop: PlanNode  # single column: iter
    env: LazyEnv


@dataclass
class _State:
    functions: dict
    templates: list = field(default_factory=list)
    calls: list = field(default_factory=list)
    fixpoint_op: str = "Mu"
    seed_in_result: bool = False


class Compiler:
    def __init__(self, functions: Optional[dict] = None, fixpoint_op="Mu", seed_in_result=False):
        self.st = _State(functions or {}, fixpoint_op=fixpoint_op, seed_in_result=seed_in_result)

    # -- helpers -----------------------------------------------------------

    def lit(self, sc: Scope, value) -> PlanNode:
        return N("Cross", sc.loop, literal(("pos", "item"), [(1, value)]))

    def ddo_seq(self, q) -> PlanNode:
        """(iter, item) -> duplicate-free iter|pos|item in document order."""
        d = N("Distinct", project(q, "iter", "item"), order_only=True)
        r = N("RowNum", d, out="pos", order=("item",), partition="iter", desc=False,
              order_only=True)
        return project(r, *ITEM_COLS)

    def restrict(self, q, iters) -> PlanNode:
        """Rows of ``q`` whose iter occurs in the single-column table ``iters``."""
        return project(join(q, project(iters, "riter:iter"), ("iter", "eq", "riter")), *ITEM_COLS)

    def lift(self, sc: Scope, tagged: PlanNode, body: Expr, focus: dict) -> Scope:
        """Inner scope for a loop whose iterations are the rows of ``tagged`` (iter, inner)."""
        mapping = project(tagged, "outer:iter", "inner")

        def derive(outer_plan):
            j = join(mapping, project(outer_plan, "viter:iter", "pos", "item"),
                     ("outer", "eq", "viter"))
            return project(j, "iter:inner", "pos", "item")

        env = sc.env.child(derive)
        for name in FOCUS:
            env._plans[name] = None  # focus does not leak into the inner scope
        for name, plan in focus.items():
            env._plans[name] = plan
        return Scope(project(tagged, "iter:inner"), env)

    def _template(self, name, inp, entry, exit_, mark, certified):
        interior = frozenset(n.id for n in topo_order(exit_) if n.id > mark)
        self.st.templates.append(PlanTemplate(name, inp, entry, exit_, interior, certified))

    # -- expressions ---------------------------------------------------------

    def compile(self, e: Expr, sc: Scope) -> PlanNode:
        if isinstance(e, (StringLit, IntLit)):
            return self.lit(sc, e.value)
        if isinstance(e, DoubleLit):
            return self.lit(sc, float(e.value))
        if isinstance(e, EmptySeq):
            return empty_seq()
        if isinstance(e, VarRef):
            return self.var(sc, e.name)
        if isinstance(e, ContextItem):
            return self.var(sc, ".")
        if isinstance(e, SeqConcat):
            q1 = const(self.compile(e.e1, sc), "ord", 1)
            q2 = const(self.compile(e.e2, sc), "ord", 2)
            u = N("Union", q1, q2)
            r = N("RowNum", u, out="npos", order=("ord", "pos"), partition="iter", desc=False,
                  order_only=True)
            return project(r, "iter", "pos:npos", "item")
        if isinstance(e, NodeSetOp):
            return self.node_set_op(e, sc)
        if isinstance(e, PathStep):
            return self.path_step(e, sc)
        if isinstance(e, PathExpr):
            return self.path_expr(e, sc)
        if isinstance(e, Predicate):
            return self.predicate(e, sc)
        if isinstance(e, For):
            return self.for_(e, sc)
        if isinstance(e, Let):
            return self.compile(e.e2, Scope(sc.loop, sc.env.bind(e.var, self.compile(e.e1, sc))))
        if isinstance(e, If):
            return self.if_(e, sc)
        if isinstance(e, (GeneralComparison, Logical)):
            return self.bool_value(e, sc)
        if isinstance(e, (ValueComparison, Arith)):
            return self.binary_map(e, sc)
        if isinstance(e, BuiltinCall):
            return self.builtin(e, sc)
        if isinstance(e, FunCall):
            return self.funcall(e, sc)
        if isinstance(e, ElemConstructor):
            contents = [self.compile(c, sc) for c in e.content]
            return N("NodeConstructor", sc.loop, *contents, kind="element", name=e.name,
                     attrs=tuple(e.attrs))
        if isinstance(e, TextConstructor):
            return N("NodeConstructor", sc.loop, self.compile(e.content, sc), kind="text")
        if isinstance(e, Fixpoint):
            return self.fixpoint(e, sc)
        if isinstance(e, Closure):
            return self.compile(desugar(e), sc)
        raise Unsupported(type(e).__name__)

    def var(self, sc, name) -> PlanNode:
        plan = sc.env.get(name)
        if plan is None:
            if name in FOCUS:
                raise Unsupported(f"{name} without a focus")
            raise Unsupported(f"unbound variable ${name}")
        return plan

    def node_set_op(self, e, sc):
        q1 = project(self.compile(e.e1, sc), "iter", "item")
        q2 = project(self.compile(e.e2, sc), "iter", "item")
        if e.op == "union":
            return self.ddo_seq(N("Union", q1, q2))
        diff = N("DifferenceAll", N("Distinct", q1), N("Distinct", q2))
        r = N("RowNum", diff, out="pos", order=("item",), partition="iter", desc=False,
              order_only=True)
        return project(r, *ITEM_COLS)

    def path_step(self, e, sc):
        q = self.compile(e.input, sc)
        mark = next_id()
        entry = project(q, "iter", "item")
        s = N("StepJoin", entry, axis=e.axis, test=e.test)
        out = self.ddo_seq(s)
        self._template("step", q, entry, out, mark, True)
        return out

    def _tag(self, q1, ordered_by="pos", desc=False, keep_positions=False):
        """Number the rows of q1 per iter (column p) and tag each with an inner iter."""
        r = N("RowNum", q1, out="p", order=(ordered_by,), partition="iter", desc=desc,
              order_only=not keep_positions)
        return N("RowTag", r, out="inner")

    def _focus(self, tagged, q1):
        dot = const(project(tagged, "iter:inner", "item"), "pos", 1)
        position = const(project(tagged, "iter:inner", "item:p"), "pos", 1)
        counts = N("CountAgg", project(q1, "iter", "item"), out="n", group="iter")
        j = join(project(tagged, "iter", "inner"), project(counts, "citer:iter", "n"),
                 ("iter", "eq", "citer"))
        last = const(project(j, "iter:inner", "item:n"), "pos", 1)
        return {".": project(dot, *ITEM_COLS), "position()": project(position, *ITEM_COLS),
                "last()": project(last, *ITEM_COLS)}

    def path_expr(self, e, sc):
        q1 = self.compile(e.e1, sc)
        mark = next_id()
        positional = uses_outer_position(e.e2)
        entry = N("Distinct", project(q1, "iter", "item"), order_only=True)
        tagged = self._tag(entry, "item", keep_positions=positional)
        inner = self.lift(sc, tagged, e.e2, self._focus(tagged, entry))
        r = self.compile(e.e2, inner)
        back = join(r, project(tagged, "outer:iter", "inner"), ("iter", "eq", "inner"))
        exit_ = project(back, "iter:outer", "item")
        self._template("loop", q1, entry, exit_, mark,
                       not positional and not contains_constructor(e.e2))
        return self.ddo_seq(exit_)

    def predicate(self, e, sc):
        base = e.e1
        q1 = self.compile(base, sc)
        mark = next_id()
        desc = (isinstance(base, PathStep) and isinstance(base.input, ContextItem)
                and base.axis in REVERSE_AXES)
        positional = uses_outer_position(e.e2) or not statically_non_numeric(e.e2)
        entry = project(q1, *ITEM_COLS)
        tagged = self._tag(entry, "pos", desc=desc, keep_positions=positional)
        inner = self.lift(sc, tagged, e.e2, self._focus(tagged, entry))
        if positional:
            v = self.compile(e.e2, inner)
            j = join(v, project(inner.env.get("position()"), "piter:iter", "p:item"),
                     ("iter", "eq", "piter"))
            truth = N("Select", N("MapOp", j, fn="predtruth", out="t", ins=("item", "p")), col="t")
            truth = project(truth, "iter")
        else:
            truth = self.bool_(e.e2, inner)
        keep = N("Distinct", project(truth, "titer:iter"), order_only=True)
        kept = join(tagged, keep, ("inner", "eq", "titer"))
        exit_ = project(kept, *ITEM_COLS)
        self._template("loop", q1, entry, exit_, mark,
                       not positional and not contains_constructor(e.e2))
        r = N("RowNum", exit_, out="npos", order=("pos",), partition="iter", desc=False,
              order_only=True)
        return project(r, "iter", "pos:npos", "item")

    def for_(self, e, sc):
        q1 = self.compile(e.in_, sc)
        mark = next_id()
        entry = project(q1, *ITEM_COLS)
        tagged = self._tag(entry, "pos", keep_positions=e.posvar is not None)
        focus = {}
        inner = self.lift(sc, tagged, e.ret, focus)
        # the focus of the enclosing scope stays visible inside a for body
        for name in FOCUS:
            inner.env._plans.pop(name, None)
        binds = {e.var: project(const(project(tagged, "iter:inner", "item"), "pos", 1),
                                *ITEM_COLS)}
        if e.posvar:
            binds[e.posvar] = project(const(project(tagged, "iter:inner", "item:p"), "pos", 1),
                                      *ITEM_COLS)
        inner = Scope(inner.loop, inner.env.child(**binds))
        r = self.compile(e.ret, inner)
        back = join(r, project(tagged, "outer:iter", "inner", "opos:p"), ("iter", "eq", "inner"))
        exit_ = project(back, "iter:outer", "opos", "ipos:pos", "item")
        self._template("loop", q1, entry, exit_, mark,
                       e.posvar is None and not contains_constructor(e.ret))
        r = N("RowNum", exit_, out="pos", order=("opos", "ipos"), partition="iter", desc=False,
              order_only=True)
        return project(r, *ITEM_COLS)

    def if_(self, e, sc):
        t = self.bool_(e.cond, sc)
        t_loop = N("Distinct", project(t, "iter"), order_only=True)
        out = self._branch(e.then, sc, t_loop)
        if not isinstance(e.else_, EmptySeq):
            f_loop = N("DifferenceAll", sc.loop, project(t_loop, "iter"))
            other = self._branch(e.else_, sc, f_loop)
            out = other if out is None else N("Union", out, other)
        return out if out is not None else empty_seq()

    def _branch(self, branch, sc, loop):
        if isinstance(branch, EmptySeq):
            return None
        env = sc.env.child(lambda p: self.restrict(p, loop))
        return self.compile(branch, Scope(loop, env))

    # -- booleans ------------------------------------------------------------

    def bool_(self, e: Expr, sc: Scope) -> PlanNode:
        """Single-column table of the iters in which ``e`` has effective boolean value true."""
        if isinstance(e, GeneralComparison):
            a = project(self.compile(e.e1, sc), "iter", "a:item")
            b = project(self.compile(e.e2, sc), "biter:iter", "b:item")
            m = N("MapOp", join(a, b, ("iter", "eq", "biter")), fn=e.op, out="t", ins=("a", "b"))
            return N("Distinct", project(N("Select", m, col="t"), "iter"), order_only=True)
        if isinstance(e, Logical):
            t1, t2 = self.bool_(e.e1, sc), self.bool_(e.e2, sc)
            if e.op == "and":
                return project(join(t1, project(t2, "iter2:iter"), ("iter", "eq", "iter2")), "iter")
            return N("Distinct", N("Union", t1, t2), order_only=True)
        if isinstance(e, BuiltinCall):
            if e.name == "true":
                return project(sc.loop, "iter")
            if e.name == "false":
                return literal(("iter",), [])
            if e.name == "not":
                return N("DifferenceAll", sc.loop, self.bool_(e.args[0], sc))
            if e.name == "empty":
                return N("DifferenceAll", sc.loop, project(self.compile(e.args[0], sc), "iter"))
            if e.name == "exists":
                return N("Distinct", project(self.compile(e.args[0], sc), "iter"), order_only=True)
            if e.name == "boolean":
                return self.bool_(e.args[0], sc)
        q = self.compile(e, sc)
        m = N("MapOp", q, fn="ebv", out="t", ins=("item",))
        return N("Distinct", project(N("Select", m, col="t"), "iter"), order_only=True)

    def bool_value(self, e, sc):
        t = N("Distinct", self.bool_(e, sc), order_only=True)
        yes = N("Cross", t, literal(("pos", "item"), [(1, True)]))
        no = N("Cross", N("DifferenceAll", sc.loop, t), literal(("pos", "item"), [(1, False)]))
        return N("Union", yes, no)

    def binary_map(self, e, sc):
        a = project(self.compile(e.e1, sc), "iter", "a:item")
        b = project(self.compile(e.e2, sc), "biter:iter", "b:item")
        m = N("MapOp", join(a, b, ("iter", "eq", "biter")), fn=e.op, out="item2", ins=("a", "b"))
        return project(const(m, "pos", 1), "iter", "pos", "item:item2")

    # -- builtins and calls ------------------------------------------------------

    def builtin(self, e, sc):
        name = e.name
        if name in ("empty", "exists", "not", "boolean", "true", "false"):
            return self.bool_value(e, sc)
        if name in ("position", "last"):
            return self.var(sc, name + "()")
        if name == "count":
            q = self.compile(e.args[0], sc)
            counts = N("CountAgg", project(q, "iter", "item"), out="item", group="iter")
            zeros = N("Cross", N("DifferenceAll", sc.loop, project(q, "iter")),
                      literal(("item",), [(0,)]))
            return project(const(N("Union", counts, zeros), "pos", 1), *ITEM_COLS)
        if name == "doc":
            arg = e.args[0]
            if not isinstance(arg, StringLit):
                raise Unsupported("doc() with a computed URI")
            return N("Cross", sc.loop, N("DocLookup", uri=arg.value))
        if name == "root":
            q = self.compile(e.args[0], sc) if e.args else self.var(sc, ".")
            return self.ddo_seq(N("MapOp", project(q, "iter", "node:item"), fn="root",
                                  out="item", ins=("node",)))
        if name == "data":
            q = self.compile(e.args[0], sc)
            m = N("MapOp", q, fn="atomize", out="value", ins=("item",))
            return project(m, "iter", "pos", "item:value")
        if name == "id":
            return self.id_lookup(e, sc)
        raise Unsupported(f"{name}()")

    def id_lookup(self, e, sc):
        keys = project(self.compile(e.args[0], sc), "iter", "key:item")
        ctx = self.compile(e.args[1], sc) if len(e.args) == 2 else self.var(sc, ".")
        roots = N("MapOp", project(ctx, "riter:iter", "node:item"), fn="root", out="root",
                  ins=("node",))
        kr = join(N("MapOp", keys, fn="string", out="skey", ins=("key",)), roots,
                  ("iter", "eq", "riter"))
        hits = join(kr, N("IdLookup"), ("root", "eq", "idroot"), ("skey", "token", "idkey"))
        return self.ddo_seq(project(hits, "iter", "item:idref"))

    def funcall(self, e, sc):
        try:
            f = self.st.functions[e.name]
        except KeyError:
            raise Unsupported(f"unknown function {e.name}") from None
        if e.name in self.st.calls:
            raise Unsupported(f"recursive function {e.name}")
        args = [self.compile(a, sc) for a in e.args]
        env = LazyEnv(dict(zip(f.params, args)))
        self.st.calls.append(e.name)
        try:
            return self.compile(f.body, Scope(sc.loop, env))
        finally:
            self.st.calls.pop()

    def fixpoint(self, e, sc):
        seed = self.compile(e.seed, sc)
        rec = N("RecInput", var=e.var)
        env = sc.env.bind(e.var, project(rec, *ITEM_COLS))
        body = self.compile(e.body, Scope(sc.loop, env))
        out = N("RecOutput", project(body, "iter", "item"))
        return N(self.st.fixpoint_op, seed, var=e.var, rec=rec, body=out,
                 seed_in_result=self.st.seed_in_result)


def _placeholder(name):
    return literal(ITEM_COLS, [], name=name)


def compile_query(e: Expr, functions: Optional[dict] = None, variables=(), focus=False,
                  fixpoint_op="Mu", seed_in_result=False) -> CompiledPlan:
    """Compile ``e`` for a single iteration.

    ``variables`` (and ``"."`` when ``focus``) become named literal tables that
    the caller binds when evaluating the plan.
    """
    c = Compiler(functions, fixpoint_op, seed_in_result)
    holders = {v: _placeholder(v) for v in variables}
    if focus:
        holders["."] = _placeholder(".")
    loop = literal(("iter",), [(1,)], name="loop")
    root = c.compile(desugar(e), Scope(loop, LazyEnv(holders)))
    return CompiledPlan(root, c.st.templates, None, holders)


def compile_body(var: str, body: Expr, functions: Optional[dict] = None) -> CompiledPlan:
    """Compile a recursion body between a RecInput for ``$var`` and a RecOutput."""
    body = desugar(body)
    c = Compiler(functions)
    rec = N("RecInput", var=var)
    holders = {v: _placeholder(v) for v in free_vars(body) - {var}}
    if any(isinstance(n, ContextItem) for n in walk(body)):
        holders["."] = _placeholder(".")
    env = LazyEnv(holders).bind(var, project(rec, *ITEM_COLS))
    loop = literal(("iter",), [(1,)], name="loop")
    out = c.compile(body, Scope(loop, env))
    root = N("RecOutput", project(out, "iter", "item"))
    return CompiledPlan(root, c.st.templates, rec, holders)
