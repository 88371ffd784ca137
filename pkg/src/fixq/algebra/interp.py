"""Flat-table interpreter for plan DAGs, including the two fixpoint operators."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional

from .. import xdm
from ..errors import DynamicError, FixpointDivergence, SchemaMismatch, TypeErr
from ..evaluator import _arith, as_number, atomize, compare_atomic, effective_boolean_value, is_numeric
from ..xdm import Node, NodeStore
from .plan import CompiledPlan, PlanNode, Table, topo_order

_COMPARE = frozenset({"=", "!=", "<", "<=", ">", ">=", "eq", "ne", "lt", "le", "gt", "ge"})
_ARITH = frozenset({"+", "-", "*", "idiv", "div", "mod"})


def cell_key(v):
    """Hashable key that keeps booleans, numbers and strings apart."""
    return xdm.item_key(v)


def row_key(row) -> tuple:
    return tuple(map(cell_key, row))


def sort_key(v):
    if isinstance(v, Node):
        return (0, v.id, "")
    if isinstance(v, bool):
        return (1, int(v), "")
    if isinstance(v, (int, float)):
        return (1, v, "")
    return (2, 0, str(v))


def _atom(v):
    return v.string_value if isinstance(v, Node) else v


def _map_fn(name: str, params: dict) -> Callable:
    if name == "const":
        value = params["value"]
        return lambda: value
    if name in _COMPARE:
        return lambda a, b: compare_atomic(name, _atom(a), _atom(b))
    if name in _ARITH:
        def arith(a, b):
            na, nb = as_number(_atom(a)), as_number(_atom(b))
            if na is None or nb is None:
                raise TypeErr(f"non-numeric operand to {name}")
            return _arith(name, na, nb)
        return arith
    if name == "ebv":
        return lambda v: True if isinstance(v, Node) else effective_boolean_value([v])
    if name == "predtruth":
        return lambda v, p: v == p if is_numeric(v) else (
            True if isinstance(v, Node) else effective_boolean_value([v]))
    if name == "root":
        def root(v):
            if not isinstance(v, Node):
                raise TypeErr("root of an atomic value")
            return v.root
        return root
    if name == "string":
        return lambda v: xdm.format_atomic(_atom(v))
    if name == "atomize":
        return _atom
    raise SchemaMismatch(f"unknown map function {name!r}")


@dataclass
class MuStats:
    op: str
    iterations: int = 0
    fed_per_iteration: list = field(default_factory=list)
    result_size: int = 0

    @property
    def total_fed(self) -> int:
        return sum(self.fed_per_iteration)


class Interpreter:
    def __init__(self, store: NodeStore, bindings: Optional[dict] = None,
                 resolve_doc: Optional[Callable] = None, id_attribute: str = "id",
                 max_iterations: int = 10_000):
        self.store = store
        self.bindings = {}
        for k, v in (bindings or {}).items():
            self.bindings[k.id if isinstance(k, PlanNode) else k] = v
        self.resolve_doc = resolve_doc or self._default_doc
        self.id_attribute = id_attribute
        self.max_iterations = max_iterations
        self.memo: dict = {}
        self.mu_stats: list = []
        self._deps: dict = {}

    def _default_doc(self, uri):
        try:
            return self.store.documents[uri]
        except KeyError:
            raise DynamicError(f"unknown document {uri!r}") from None

    def value(self, n: PlanNode) -> Table:
        t = self.memo.get(n.id)
        if t is None:
            t = getattr(self, "_" + n.op)(n)
            self.memo[n.id] = t
        return t

    # leaves

    def _LiteralTable(self, n):
        name = n.params.get("name")
        if name is not None and name in self.bindings:
            return self.bindings[name]
        if n.id in self.bindings:
            return self.bindings[n.id]
        return Table(n.params["cols"], list(n.params["rows"]))

    def _RecInput(self, n):
        try:
            return self.bindings[n.id]
        except KeyError:
            raise SchemaMismatch(f"recursion input #{n.id} is unbound") from None

    def _DocLookup(self, n):
        return Table(("pos", "item"), [(1, self.resolve_doc(n.params["uri"]))])

    def _IdLookup(self, n):
        rows = []
        seen = set()
        for doc in self.store.documents.values():
            if doc.id in seen:
                continue
            seen.add(doc.id)
            for key, el in self.store.id_index(doc, self.id_attribute).items():
                rows.append((doc, key, el))
        return Table(("idroot", "idkey", "idref"), rows)

    def _RecOutput(self, n):
        return self.value(n.children[0])

    # unary

    def _Project(self, n):
        t = self.value(n.children[0])
        idx = [t.index(src) for _, src in n.params["cols"]]
        return Table(tuple(out for out, _ in n.params["cols"]),
                     [tuple(r[i] for i in idx) for r in t.rows])

    def _Select(self, n):
        t = self.value(n.children[0])
        i = t.index(n.params["col"])
        return Table(t.cols, [r for r in t.rows if r[i] is True])

    def _Distinct(self, n):
        t = self.value(n.children[0])
        seen, rows = set(), []
        for r in t.rows:
            k = row_key(r)
            if k not in seen:
                seen.add(k)
                rows.append(r)
        return Table(t.cols, rows)

    def _CountAgg(self, n):
        t = self.value(n.children[0])
        group = n.params.get("group")
        if group is None:
            return Table((n.params["out"],), [(len(t.rows),)])
        i = t.index(group)
        counts = Counter(cell_key(r[i]) for r in t.rows)
        firsts = {}
        for r in t.rows:
            firsts.setdefault(cell_key(r[i]), r[i])
        return Table((group, n.params["out"]), [(firsts[k], c) for k, c in counts.items()])

    def _MapOp(self, n):
        t = self.value(n.children[0])
        fn = _map_fn(n.params["fn"], n.params)
        idx = [t.index(c) for c in n.params["ins"]]
        out = n.params["out"]
        if out in t.cols:
            raise SchemaMismatch(f"column {out!r} already present")
        return Table(t.cols + (out,), [r + (fn(*(r[i] for i in idx)),) for r in t.rows])

    def _RowTag(self, n):
        t = self.value(n.children[0])
        return Table(t.cols + (n.params["out"],), [r + (k,) for k, r in enumerate(t.rows, 1)])

    def _RowNum(self, n):
        t = self.value(n.children[0])
        order = [t.index(c) for c in n.params["order"]]
        part = n.params.get("partition")
        pi = t.index(part) if part is not None else None
        groups = defaultdict(list)
        for k, r in enumerate(t.rows):
            groups[cell_key(r[pi]) if pi is not None else None].append(k)
        numbers = [0] * len(t.rows)
        for members in groups.values():
            members.sort(key=lambda k: tuple(sort_key(t.rows[k][i]) for i in order),
                         reverse=bool(n.params.get("desc")))
            for num, k in enumerate(members, 1):
                numbers[k] = num
        return Table(t.cols + (n.params["out"],), [r + (numbers[k],) for k, r in enumerate(t.rows)])

    def _StepJoin(self, n):
        t = self.value(n.children[0])
        i = t.index("item")
        rows = []
        for r in t.rows:
            ctx = r[i]
            if not isinstance(ctx, Node):
                raise TypeErr(f"step join on atomic value {ctx!r}")
            for hit in xdm.axis_step(ctx, n.params["axis"], n.params["test"]):
                rows.append(r[:i] + (hit,) + r[i + 1:])
        return Table(t.cols, rows)

    # binary

    def _Cross(self, n):
        a, b = (self.value(c) for c in n.children)
        self._disjoint(a, b)
        return Table(a.cols + b.cols, [x + y for x in a.rows for y in b.rows])

    def _disjoint(self, a, b):
        if set(a.cols) & set(b.cols):
            raise SchemaMismatch(f"overlapping columns {a.cols} / {b.cols}")

    def _Join(self, n):
        a, b = (self.value(c) for c in n.children)
        self._disjoint(a, b)
        conds = n.params["conds"]
        eq = [(a.index(l), b.index(r)) for l, op, r in conds if op == "eq"]
        tok = [(a.index(l), b.index(r)) for l, op, r in conds if op == "token"]
        index = defaultdict(list)
        for y in b.rows:
            key = tuple(cell_key(y[j]) for _, j in eq) + tuple(cell_key(y[j]) for _, j in tok)
            index[key].append(y)
        rows = []
        for x in a.rows:
            base = tuple(cell_key(x[i]) for i, _ in eq)
            if tok:
                (i, _), = tok
                keys = {base + (cell_key(t),) for t in xdm.format_atomic(_atom(x[i])).split()}
            else:
                keys = (base,)
            for key in keys:
                for y in index.get(key, ()):
                    rows.append(x + y)
        return Table(a.cols + b.cols, rows)

    def _align(self, a: Table, b: Table) -> list:
        if set(a.cols) != set(b.cols) or len(a.cols) != len(b.cols):
            raise SchemaMismatch(f"union of {a.cols} and {b.cols}")
        idx = [b.index(c) for c in a.cols]
        return [tuple(r[i] for i in idx) for r in b.rows]

    def _Union(self, n):
        a, b = (self.value(c) for c in n.children)
        return Table(a.cols, a.rows + self._align(a, b))

    def _DifferenceAll(self, n):
        a, b = (self.value(c) for c in n.children)
        drop = Counter(row_key(r) for r in self._align(a, b))
        rows = []
        for r in a.rows:
            k = row_key(r)
            if drop[k] > 0:
                drop[k] -= 1
            else:
                rows.append(r)
        return Table(a.cols, rows)

    # construction

    def _NodeConstructor(self, n):
        loop = self.value(n.children[0])
        contents = [self._by_iter(self.value(c)) for c in n.children[1:]]
        store = self.store
        rows = []
        for (it,) in sorted(loop.rows, key=lambda r: sort_key(r[0])):
            k = cell_key(it)
            if n.params["kind"] == "text":
                vals = [xdm.format_atomic(_atom(v)) for v in contents[0].get(k, [])]
                if vals:
                    rows.append((it, 1, store.construct_node(xdm.TEXT, value=" ".join(vals))))
                continue
            kids = [store.construct_node(xdm.ATTRIBUTE, name=a, value=v)
                    for a, v in n.params.get("attrs", ())]
            for content in contents:
                atoms = []
                for item in content.get(k, []):
                    if isinstance(item, Node):
                        if atoms:
                            kids.append(store.construct_node(xdm.TEXT, value=" ".join(atoms)))
                            atoms = []
                        kids.append(item)
                    else:
                        atoms.append(xdm.format_atomic(item))
                if atoms:
                    kids.append(store.construct_node(xdm.TEXT, value=" ".join(atoms)))
            rows.append((it, 1, store.construct_node(xdm.ELEMENT, name=n.params["name"],
                                                     children=kids)))
        return Table(("iter", "pos", "item"), rows)

    def _by_iter(self, t: Table) -> dict:
        it, pos, item = t.index("iter"), t.index("pos"), t.index("item")
        groups = defaultdict(list)
        for r in sorted(t.rows, key=lambda r: sort_key(r[pos])):
            groups[cell_key(r[it])].append(r[item])
        return groups

    # fixpoints

    def _Mu(self, n):
        return self._fixpoint(n, delta=False)

    def _MuDelta(self, n):
        return self._fixpoint(n, delta=True)

    def _rec_deps(self, n) -> list:
        deps = self._deps.get(n.id)
        if deps is None:
            rec = n.params["rec"]
            dep = {}
            for m in topo_order(n.params["body"]):
                dep[m.id] = m is rec or any(dep.get(c.id, False) for c in m.reads())
            deps = [k for k, v in dep.items() if v]
            self._deps[n.id] = deps
        return deps

    def _fixpoint(self, n, delta: bool) -> Table:
        seed = self.value(n.children[0])
        rec, body = n.params["rec"], n.params["body"]
        deps = self._rec_deps(n)
        stats = MuStats(n.op)

        def run(groups: dict) -> list:
            rows = _encode(groups)
            stats.fed_per_iteration.append(len(rows))
            for k in deps:
                self.memo.pop(k, None)
            self.bindings[rec.id] = Table(("iter", "pos", "item"), rows)
            out = self.value(body)
            i, j = out.index("iter"), out.index("item")
            return [(r[i], r[j]) for r in out.rows]

        def tick():
            stats.iterations += 1
            if stats.iterations > self.max_iterations:
                raise FixpointDivergence(self.max_iterations, n.op)

        res: dict = defaultdict(dict)  # iter key -> {item key: (iter, item)}
        start = (_pairs(seed) if n.params.get("seed_in_result")
                 else run(_group(_pairs(seed))))
        _add(res, start)
        current = res
        while True:
            tick()
            produced = run(current if delta else res)
            new: dict = defaultdict(dict)
            for it, item in produced:
                ik, vk = cell_key(it), cell_key(item)
                if vk not in res[ik] and vk not in new[ik]:
                    new[ik][vk] = (it, item)
            if not any(new.values()):
                break
            for ik, items in new.items():
                res[ik].update(items)
            current = new
        for k in deps:
            self.memo.pop(k, None)
        rows = _encode(res)
        stats.result_size = len(rows)
        self.mu_stats.append(stats)
        return Table(("iter", "pos", "item"), rows)


def _pairs(t: Table) -> list:
    i, j = t.index("iter"), t.index("item")
    return [(r[i], r[j]) for r in t.rows]


def _group(pairs) -> dict:
    g: dict = defaultdict(dict)
    _add(g, pairs)
    return g


def _add(groups, pairs):
    for it, item in pairs:
        if not isinstance(item, Node):
            raise TypeErr(f"fixpoint over atomic value {item!r}")
        groups[cell_key(it)][cell_key(item)] = (it, item)


def _encode(groups: dict) -> list:
    rows = []
    for items in groups.values():
        ordered = sorted(items.values(), key=lambda p: sort_key(p[1]))
        rows.extend((it, k, item) for k, (it, item) in enumerate(ordered, 1))
    return rows


def eval_plan(root, bindings: Optional[dict] = None, store: Optional[NodeStore] = None,
              **kw) -> Table:
    """Evaluate a plan (or compiled plan) with leaves bound by node, id or placeholder name."""
    if isinstance(root, CompiledPlan):
        root = root.root
    return Interpreter(store or NodeStore(), bindings, **kw).value(root)


def decode(t: Table, iteration=1) -> list:
    """Items of one iteration of an iter|pos|item table, in pos order."""
    it, pos, item = t.index("iter"), t.index("pos"), t.index("item")
    rows = sorted((r for r in t.rows if r[it] == iteration), key=lambda r: sort_key(r[pos]))
    return [r[item] for r in rows]


def encode(items, iteration=1) -> Table:
    return Table(("iter", "pos", "item"), [(iteration, k, v) for k, v in enumerate(items, 1)])
