"""Syntactic distributivity-safety judgment and the distributivity hint rewrite.

``dist_safe(x, e)`` is a sufficient condition: when it holds, evaluating ``e``
on a sequence bound to ``$x`` gives (up to duplicates and order) the same nodes
as evaluating it item by item.  Expressions that do not mention ``$x`` are
safe unless they build new nodes.  Expressions that mention ``$x`` are safe
only if a structural rule applies; everything else is rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import UnknownFunction
from .expr import (
    Arith,
    BuiltinCall,
    CONSTRUCTORS,
    DoubleLit,
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
    Typeswitch,
    ValueComparison,
    VarRef,
    _bound_names,
    children,
    desugar,
    free_vars,
    fresh_var,
    substitute_var,
    walk,
)


@dataclass
class DistVerdict:
    safe: bool
    witness: Optional[dict] = None  # {"expr", "rule", "reason"} of the innermost failure
    rule_trace: list = field(default_factory=list)

    def witness_text(self) -> str:
        if self.witness is None:
            return ""
        w = self.witness
        return f"rule {w['rule']}: {w['reason']} at {w['expr']}"

    def to_dict(self) -> dict:
        out = {"safe": self.safe, "rule_trace": list(self.rule_trace)}
        if self.witness is not None:
            out["witness"] = dict(self.witness)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


_LITERALS = (StringLit, IntLit, DoubleLit, EmptySeq)
_BOOLEAN_BUILTINS = frozenset({"not", "boolean", "empty", "exists", "true", "false",
                               "string", "name", "deep-equal"})


def uses_outer_position(e: Expr) -> bool:
    """Does ``e`` call position()/last() against the focus it is evaluated in?"""
    if isinstance(e, BuiltinCall) and e.name in ("position", "last"):
        return True
    if isinstance(e, (PathExpr, Predicate)):
        return uses_outer_position(e.e1)
    return any(uses_outer_position(c) for c in children(e))


def statically_non_numeric(e: Expr) -> bool:
    """True when ``e`` can never yield a single number (so a predicate is a filter)."""
    if isinstance(e, (GeneralComparison, ValueComparison, Logical, StringLit,
                      PathStep, NodeSetOp)):
        return True
    if isinstance(e, BuiltinCall):
        return e.name in _BOOLEAN_BUILTINS or e.name in ("id", "doc", "root")
    if isinstance(e, PathExpr):
        return statically_non_numeric(e.e2)
    if isinstance(e, Predicate):
        return statically_non_numeric(e.e1)
    if isinstance(e, If):
        return statically_non_numeric(e.then) and statically_non_numeric(e.else_)
    if isinstance(e, Let):
        return statically_non_numeric(e.e2)
    if isinstance(e, For):
        return statically_non_numeric(e.ret)
    return False


class _Checker:
    def __init__(self, functions: dict, recursive: str):
        self.functions = functions
        self.recursive = recursive
        self.trace: list = []
        self.witness: Optional[dict] = None
        self._pending: set = set()
        self._memo: dict = {}
        self._constructs: dict = {}

    def fail(self, e, rule, reason) -> bool:
        if self.witness is None:
            self.witness = {"expr": str(e), "rule": rule, "reason": reason}
        return False

    def ok(self, rule) -> bool:
        self.trace.append(rule)
        return True

    def function(self, name):
        try:
            return self.functions[name]
        except KeyError:
            raise UnknownFunction(name) from None

    def constructs(self, e: Expr) -> bool:
        """Does evaluating ``e`` (including called function bodies) build nodes?"""
        for n in walk(e):
            if isinstance(n, CONSTRUCTORS):
                return True
            if isinstance(n, FunCall):
                if n.name not in self._constructs:
                    self._constructs[n.name] = False  # cut recursion
                    self._constructs[n.name] = self.constructs(self.function(n.name).body)
                if self._constructs[n.name]:
                    return True
        return False

    def ds(self, x: str, e: Expr) -> bool:
        if x not in free_vars(e):
            if self.constructs(e):
                return self.fail(e, "Const", "node constructor creates fresh identities")
            return self.ok("Const" if isinstance(e, _LITERALS) else "Indep")

        if isinstance(e, VarRef):
            return self.ok("Var")
        if isinstance(e, If):
            if x in free_vars(e.cond):
                return self.fail(e, "If", f"${x} free in the condition")
            return self.ds(x, e.then) and self.ds(x, e.else_) and self.ok("If")
        if isinstance(e, SeqConcat) or isinstance(e, NodeSetOp) and e.op == "union":
            return self.ds(x, e.e1) and self.ds(x, e.e2) and self.ok("Concat")
        if isinstance(e, For):
            body_free = x in free_vars(e.ret) - {e.var, e.posvar}
            if x not in free_vars(e.in_):
                return self.ds(x, e.ret) and self.ok("For1")
            if body_free:
                return self.fail(e, "For", f"${x} free in both range and return clause")
            if e.posvar:
                return self.fail(e, "For2", "positional variable over a range depending on "
                                 f"${x}")
            return self.ds(x, e.in_) and self.ok("For2")
        if isinstance(e, Let):
            if x not in free_vars(e.e1):
                return self.ds(x, e.e2) and self.ok("Let1")
            if x in free_vars(e.e2) - {e.var}:
                return self.fail(e, "Let2", f"${x} free in both the binding and the body")
            return self.ds(x, e.e1) and self.ds(e.var, e.e2) and self.ok("Let2")
        if isinstance(e, Typeswitch):
            if x in free_vars(e.operand):
                return self.fail(e, "TypeSw", f"${x} free in the operand")
            arms = [c for _, c in e.cases] + [e.default]
            return all(self.ds(x, c) for c in arms) and self.ok("TypeSw")
        if isinstance(e, PathStep):
            return self.ds(x, e.input) and self.ok("Step2")
        if isinstance(e, PathExpr):
            if x not in free_vars(e.e1):
                return self.ds(x, e.e2) and self.ok("Step1")
            if x in free_vars(e.e2):
                return self.fail(e, "Step", f"${x} free on both sides of '/'")
            if uses_outer_position(e.e2):
                return self.fail(e, "Step2", "position()/last() over the context sequence")
            return self.ds(x, e.e1) and self.ds(x, e.e2) and self.ok("Step2")
        if isinstance(e, Predicate):
            if x in free_vars(e.e2):
                return self.fail(e, "Predicate", f"${x} free in the predicate")
            if uses_outer_position(e.e2) or not statically_non_numeric(e.e2):
                return self.fail(e, "Predicate", "positional predicate over a sequence "
                                 f"depending on ${x}")
            return self.ds(x, e.e1) and self.ds(x, e.e2) and self.ok("Predicate")
        if isinstance(e, FunCall):
            return self.funcall(x, e)
        if isinstance(e, Fixpoint):
            return self.fail(e, "Fixpoint", f"nested fixpoint depending on ${x}")
        if isinstance(e, (GeneralComparison, ValueComparison, Arith, Logical)):
            return self.fail(e, type(e).__name__, f"inspects the sequence bound to ${x} as a whole")
        if isinstance(e, BuiltinCall):
            return self.fail(e, "Builtin", f"{e.name}() inspects the sequence bound to ${x}")
        if isinstance(e, NodeSetOp):
            return self.fail(e, "Except", f"except with ${x} free")
        return self.fail(e, type(e).__name__, "no rule applies")

    def funcall(self, x, e: FunCall) -> bool:
        f = self.function(e.name)
        for arg, param in zip(e.args, f.params):
            if x not in free_vars(arg):
                if self.constructs(arg):
                    return self.fail(arg, "FunCall", "argument constructs nodes")
                continue
            if not self.ds(x, arg):
                return False
            if not self.param_safe(f, param):
                return self.fail(e, "FunCall", f"body of {f.name} not safe for ${param}")
        return self.ok("FunCall")

    def param_safe(self, f, param) -> bool:
        key = (f.name, param)
        if key in self._memo:
            return self._memo[key]
        if key in self._pending:
            if self.recursive == "reject":
                return self.fail(f.body, "FunCall", f"recursive call of {f.name}")
            self.trace.append("FunCall(assumed)")
            return True
        self._pending.add(key)
        try:
            result = self.ds(param, f.body)
        finally:
            self._pending.discard(key)
        self._memo[key] = result
        return result


def dist_safe(var: str, e: Expr, functions: Optional[dict] = None,
              recursive: str = "assume") -> DistVerdict:
    """Is ``e`` distributivity-safe for ``$var``?  ``recursive`` is "assume" or "reject"."""
    c = _Checker(functions or {}, recursive)
    e = desugar(e)
    if c.constructs(e):
        # fresh identities differ between e(X) and the per-subset runs wherever
        # the constructor sits, so no rule can certify such a body
        c.fail(e, "Constructor", "node constructor creates fresh identities")
        return DistVerdict(False, c.witness, c.trace)
    safe = c.ds(var, e)
    return DistVerdict(safe, None if safe else c.witness, c.trace)


def hint_rewrite(var: str, e: Expr) -> Expr:
    """``e($x)`` becomes ``for $y in $x return e($y)``."""
    y = fresh_var(_bound_names(e) | free_vars(e) | {var}, "y")
    return For(y, None, VarRef(var), substitute_var(e, var, y))
