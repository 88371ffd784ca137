"""Plan DAGs over flat iter|pos|item tables."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from ..errors import MalformedDag, SchemaMismatch
from ..xdm import Node, format_atomic

# Push-up classes: a unary-like operator passes the union marker through,
# a binary one passes it when at most one input carries it, a blocking one stops it.
PASS, BINARY, BLOCK = "pass", "binary", "block"

PUSH_CLASS = {
    "Project": PASS,
    "Select": PASS,
    "Join": BINARY,
    "Cross": BINARY,
    "Distinct": BLOCK,
    "Union": BINARY,
    "DifferenceAll": BLOCK,
    "CountAgg": BLOCK,
    "MapOp": PASS,
    "RowTag": PASS,
    "RowNum": BLOCK,
    "StepJoin": PASS,
    "NodeConstructor": BLOCK,
    "Mu": PASS,
    "MuDelta": PASS,
}
LEAVES = frozenset({"LiteralTable", "RecInput", "DocLookup", "IdLookup"})
OPS = frozenset(PUSH_CLASS) | LEAVES | {"RecOutput"}

_ids = itertools.count(1)


@dataclass(eq=False)
class PlanNode:
    op: str
    params: dict = field(default_factory=dict)
    children: list = field(default_factory=list)
    order_only: bool = False  # Distinct/RowNum that only implement ddo or ordering
    id: int = field(default_factory=lambda: next(_ids))

    def __post_init__(self):
        if self.op not in OPS:
            raise MalformedDag(f"unknown operator {self.op!r}")

    def __hash__(self):
        return self.id

    def __repr__(self):
        return f"<{self.op} #{self.id}>"

    @property
    def push_class(self) -> Optional[str]:
        return PUSH_CLASS.get(self.op)

    def reads(self) -> list:
        """Nodes whose value this node's evaluation depends on."""
        if self.op in ("Mu", "MuDelta"):
            return list(self.children) + [self.params["body"]]
        return list(self.children)


def next_id() -> int:
    return next(_ids)


@dataclass
class Table:
    cols: tuple
    rows: list = field(default_factory=list)

    def index(self, col: str) -> int:
        try:
            return self.cols.index(col)
        except ValueError:
            raise SchemaMismatch(f"no column {col!r} in {self.cols}") from None

    def column(self, col: str) -> list:
        i = self.index(col)
        return [r[i] for r in self.rows]


@dataclass
class PlanTemplate:
    """A sub-DAG certified (or not) to preserve distributivity as a whole.

    ``input`` is the outside node feeding the template, ``entry`` the interior
    node consuming it, ``exit`` the single node leaving it, ``interior`` the
    ids of all nodes belonging to it (exit included).
    """

    name: str
    input: PlanNode
    entry: PlanNode
    exit: PlanNode
    interior: frozenset
    certified_distributive: bool


@dataclass
class CompiledPlan:
    root: PlanNode
    templates: list = field(default_factory=list)
    rec_input: Optional[PlanNode] = None
    placeholders: dict = field(default_factory=dict)  # name -> LiteralTable leaf

    def nodes(self) -> list:
        return topo_order(self.root)


def topo_order(root: PlanNode) -> list:
    """All nodes reachable from ``root`` (through fixpoint bodies too), children first."""
    order, state = [], {}
    stack = [(root, False)]
    while stack:
        n, done = stack.pop()
        if done:
            state[n.id] = 2
            order.append(n)
            continue
        st = state.get(n.id)
        if st == 2:
            continue
        if st == 1:
            raise MalformedDag(f"cycle through {n!r}")
        state[n.id] = 1
        stack.append((n, True))
        for c in reversed(n.reads()):
            if state.get(c.id) != 2:
                if state.get(c.id) == 1:
                    raise MalformedDag(f"cycle through {c!r}")
                stack.append((c, False))
    return order


def _fmt_param(v, num) -> str:
    if isinstance(v, PlanNode):
        return f"#{num(v.id)}"
    if isinstance(v, Node):
        return f"node#{v.id}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt_param(x, num) for x in v) + "]"
    if isinstance(v, (bool, int, float)):
        return format_atomic(v)
    return str(v)


def plan_to_text(plan, renumber: bool = False) -> str:
    """One line per node: ``id op params -> child ids``, children before parents.

    With ``renumber`` the ids are replaced by 1, 2, ... in that order, which
    makes the text independent of how many plans were built before.
    """
    root = plan.root if isinstance(plan, CompiledPlan) else plan
    order = topo_order(root)
    ids = {n.id: i for i, n in enumerate(order, 1)}

    def num(i):
        return ids.get(i, i) if renumber else i

    lines = []
    for n in order:
        params = " ".join(f"{k}={_fmt_param(v, num)}" for k, v in sorted(n.params.items())
                          if k != "rows")
        if "rows" in n.params:
            params = (params + f" rows={len(n.params['rows'])}").strip()
        flag = " order-only" if n.order_only else ""
        kids = ",".join(str(num(c.id)) for c in n.children)
        lines.append(f"{num(n.id)} {n.op}{flag} {params} -> [{kids}]".replace("  ", " "))
    if isinstance(plan, CompiledPlan):
        for t in plan.templates:
            lines.append(f"template {t.name} input={num(t.input.id)} entry={num(t.entry.id)} "
                         f"exit={num(t.exit.id)} certified={str(t.certified_distributive).lower()}")
    return "\n".join(lines)
