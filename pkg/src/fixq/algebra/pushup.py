"""Algebraic distributivity check: push a union marker from the recursion input up the plan.

The recursion input is marked as carrying a union.  Walking the plan bottom
up, pass-class operators hand the mark to their output, binary operators do
so when only one input is marked (a union may also merge two marked inputs),
and blocking operators stop the check.  A certified template whose input is
marked passes the mark from entry to exit in one big step, provided no other
marked edge enters it.  The body is distributive when no blocking operator
was reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..errors import FixqError, MalformedDag, Unsupported
from .compiler import compile_body
from .plan import BINARY, BLOCK, PASS, CompiledPlan, PlanNode, PlanTemplate, topo_order


@dataclass
class PushUpResult:
    safe: bool
    blocker: Optional[str] = None  # operator name that stopped the marker
    blocker_id: Optional[int] = None
    reason: str = ""
    trace: list = field(default_factory=list)
    plan: Optional[CompiledPlan] = None

    def to_dict(self) -> dict:
        out = {"safe": self.safe, "reason": self.reason, "trace": list(self.trace)}
        if self.blocker is not None:
            out["blocker"] = self.blocker
        return out


def simplify_for_check(plan: CompiledPlan) -> CompiledPlan:
    """Copy of ``plan`` without the Distinct/RowNum nodes that only maintain order.

    The copy is meant for analysis: columns produced by the dropped row
    numberings are missing, so it is not evaluated.
    """
    mapping: dict = {}
    for n in topo_order(plan.root):
        if n.order_only and n.op in ("Distinct", "RowNum"):
            mapping[n.id] = mapping[n.children[0].id]
            continue
        params = dict(n.params)
        for k, v in params.items():
            if isinstance(v, PlanNode):
                params[k] = mapping.get(v.id, v)
        copy = PlanNode(n.op, params, [mapping[c.id] for c in n.children], n.order_only)
        copy.id = n.id  # keep ids stable so templates and traces still line up
        mapping[n.id] = copy
    templates = []
    for t in plan.templates:
        if t.exit.id not in mapping or t.input.id not in mapping:
            continue
        interior = frozenset(i for i in t.interior if mapping.get(i) is not None
                             and mapping[i].id == i)
        inp = mapping[t.input.id]
        entry = mapping[t.entry.id]
        if entry.id not in interior:
            entry = next((m for m in topo_order(mapping[t.exit.id])
                          if m.id in interior and inp in m.children), mapping[t.exit.id])
        templates.append(PlanTemplate(t.name, inp, entry, mapping[t.exit.id],
                                      interior, t.certified_distributive))
    rec = plan.rec_input and mapping.get(plan.rec_input.id, plan.rec_input)
    holders = {k: mapping.get(v.id, v) for k, v in plan.placeholders.items()}
    return CompiledPlan(mapping[plan.root.id], templates, rec, holders)


def _readers(order) -> dict:
    out: dict = {n.id: [] for n in order}
    for n in order:
        for c in n.reads():
            out.setdefault(c.id, []).append(n.id)
    return out


def push_up_check(plan: CompiledPlan, simplify: bool = True) -> PushUpResult:
    if plan.rec_input is None:
        raise MalformedDag("plan has no recursion input")
    if simplify:
        plan = simplify_for_check(plan)
    order = topo_order(plan.root)
    ids = {n.id for n in order}
    readers = _readers(order)
    by_exit = {t.exit.id: t for t in plan.templates if t.exit.id in ids}
    marked = {plan.rec_input.id} if plan.rec_input.id in ids else set()
    failures: list = []  # (node, reason), in plan order
    trace: list = []

    for n in order:
        if n.op == "NodeConstructor":
            failures.append((n, "node constructor creates fresh identities"))
            continue
        if n.op in ("Mu", "MuDelta"):
            if any(c.id in marked for c in n.reads()):
                failures.append((n, "nested fixpoint over the recursion input"))
            continue
        t = by_exit.get(n.id)
        if t is not None and _big_step(t, marked, readers):
            marked.add(n.id)
            failures = [(f, r) for f, r in failures if f.id not in t.interior]
            trace = [(i, s) for i, s in trace if i not in t.interior]
            trace.append((n.id, f"big step across {t.name} template #{t.entry.id}..#{t.exit.id}"))
            continue
        hot = [c for c in n.children if c.id in marked]
        if not hot or n.op in ("RecInput", "RecOutput"):
            if hot:
                marked.add(n.id)
            continue
        cls = n.push_class
        if cls == PASS:
            marked.add(n.id)
            trace.append((n.id, f"{n.op} #{n.id}"))
        elif cls == BINARY:
            if len(hot) > 1 and n.op != "Union":
                failures.append((n, "both inputs depend on the recursion variable"))
                continue
            marked.add(n.id)
            trace.append((n.id, f"{n.op} #{n.id}"))
        elif cls == BLOCK:
            failures.append((n, f"{n.op} blocks the union"))
        else:
            raise MalformedDag(f"unexpected {n.op} above the recursion input")

    steps = [s for _, s in trace]
    if failures:
        node, reason = failures[0]
        return PushUpResult(False, node.op, node.id, f"{node.op} #{node.id}: {reason}", steps, plan)
    return PushUpResult(True, None, None, "union reached the recursion output", steps, plan)


def _big_step(t: PlanTemplate, marked: set, readers: dict) -> bool:
    if not t.certified_distributive or t.input.id not in marked:
        return False
    for nid in t.interior:
        if nid != t.exit.id and any(r not in t.interior for r in readers.get(nid, ())):
            return False  # interior result escapes the template
    if any(r in t.interior and r != t.entry.id for r in readers.get(t.input.id, ())):
        return False  # the input enters the template a second time
    return not any(nid in marked for nid in _feeders(t))


def _feeders(t: PlanTemplate):
    """Ids of outside nodes read by the template interior, other than its input."""
    seen = set()
    stack = [t.exit]
    while stack:
        n = stack.pop()
        if n.id in seen:
            continue
        seen.add(n.id)
        for c in n.reads():
            if c.id in t.interior:
                stack.append(c)
            elif c.id != t.input.id:
                yield c.id


def algebraic_check(var: str, body, functions: Optional[dict] = None) -> PushUpResult:
    """Compile ``body`` and run the push-up check; uncompilable bodies are not certified."""
    try:
        plan = compile_body(var, body, functions)
    except Unsupported as exc:
        return PushUpResult(False, None, None, f"not compilable: {exc.construct}")
    try:
        return push_up_check(plan)
    except FixqError as exc:
        return PushUpResult(False, None, None, str(exc), plan=plan)
