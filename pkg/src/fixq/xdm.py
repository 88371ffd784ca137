"""In-memory XML data model: identity-bearing nodes in a global document order.

Every node receives its id from a single store-wide counter at the moment it
is created.  Parsing and construction both allocate in preorder (element,
then its attributes, then its children), so comparing ids *is* comparing
document order, within one tree and across trees (older trees first).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union
from xml.parsers import expat

from .errors import MalformedXml, TypeErr, UnknownNode

DOCUMENT = "document"
ELEMENT = "element"
ATTRIBUTE = "attribute"
TEXT = "text"

Atomic = Union[str, int, float, bool]


@dataclass(eq=False, slots=True)
class Node:
    id: int
    kind: str
    name: Optional[str] = None
    value: Optional[str] = None
    parent: Optional["Node"] = None
    root: Optional["Node"] = None
    index: int = 0
    children: list = field(default_factory=list)
    attributes: list = field(default_factory=list)
    _string: Optional[str] = None

    def __hash__(self):
        return self.id

    def __repr__(self):
        label = self.name if self.name is not None else repr(self.value)
        return f"<{self.kind} #{self.id} {label}>"

    @property
    def string_value(self) -> str:
        if self.kind in (ATTRIBUTE, TEXT):
            return self.value or ""
        if self._string is None:
            self._string = "".join(
                n.value for n in iter_axis(self, "descendant") if n.kind == TEXT
            )
        return self._string


def is_node(item) -> bool:
    return isinstance(item, Node)


# -- node tests -----------------------------------------------------------


@dataclass(frozen=True)
class NameTest:
    """Name test; ``"*"`` is the wildcard.  Matches the axis' principal kind."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class KindTest:
    kind: str  # node, element, attribute, text, document-node

    def __str__(self):
        return f"{self.kind}()"


NodeTest = Union[NameTest, KindTest]

AXES = (
    "child",
    "descendant",
    "descendant-or-self",
    "parent",
    "ancestor",
    "ancestor-or-self",
    "self",
    "following-sibling",
    "preceding-sibling",
    "attribute",
)
REVERSE_AXES = frozenset({"parent", "ancestor", "ancestor-or-self", "preceding-sibling"})

_KIND_NAMES = {
    "node": None,
    "element": ELEMENT,
    "attribute": ATTRIBUTE,
    "text": TEXT,
    "document-node": DOCUMENT,
}


def matches(node: Node, axis: str, test: NodeTest) -> bool:
    if isinstance(test, KindTest):
        want = _KIND_NAMES[test.kind]
        return want is None or node.kind == want
    principal = ATTRIBUTE if axis == "attribute" else ELEMENT
    if node.kind != principal:
        return False
    return test.name == "*" or node.name == test.name


def _descendants(node: Node) -> Iterator[Node]:
    stack = list(reversed(node.children))
    while stack:
        n = stack.pop()
        yield n
        if n.children:
            stack.extend(reversed(n.children))


def iter_axis(node: Node, axis: str) -> Iterator[Node]:
    """Nodes along ``axis`` in axis order (reverse axes walk backwards)."""
    if axis == "child":
        return iter(node.children)
    if axis == "descendant":
        return _descendants(node)
    if axis == "descendant-or-self":
        return itertools.chain((node,), _descendants(node))
    if axis == "self":
        return iter((node,))
    if axis == "attribute":
        return iter(node.attributes)
    if axis == "parent":
        return iter(() if node.parent is None else (node.parent,))
    if axis in ("ancestor", "ancestor-or-self"):
        return _ancestors(node, axis == "ancestor-or-self")
    if axis in ("following-sibling", "preceding-sibling"):
        if node.parent is None or node.kind == ATTRIBUTE:
            return iter(())
        sibs = node.parent.children
        if axis == "following-sibling":
            return itertools.islice(sibs, node.index + 1, None)
        return (sibs[i] for i in range(node.index - 1, -1, -1))
    raise ValueError(f"unknown axis {axis!r}")


def _ancestors(node, include_self):
    if include_self:
        yield node
    n = node.parent
    while n is not None:
        yield n
        n = n.parent


def axis_step(context: Node, axis: str, test: NodeTest) -> list:
    """All nodes on ``axis`` from ``context`` passing ``test``, in document order."""
    if not isinstance(context, Node):
        raise TypeErr(f"axis step on atomic value {context!r}")
    out = [n for n in iter_axis(context, axis) if matches(n, axis, test)]
    if axis in REVERSE_AXES:
        out.reverse()
    return out


# -- node-set operations ----------------------------------------------------


def _require_nodes(seq: Iterable, what: str) -> None:
    for item in seq:
        if not isinstance(item, Node):
            raise TypeErr(f"{what}: atomic value {item!r} in node sequence")


def ddo(seq) -> list:
    """Distinct-document-order: drop duplicate nodes, sort by document order."""
    _require_nodes(seq, "ddo")
    return sorted(set(seq), key=_node_id)


def _node_id(n: Node) -> int:
    return n.id


def node_union(s1, s2) -> list:
    _require_nodes(s1, "union")
    _require_nodes(s2, "union")
    return sorted(set(s1).union(s2), key=_node_id)


def node_except(s1, s2) -> list:
    _require_nodes(s1, "except")
    _require_nodes(s2, "except")
    drop = set(s2)
    return sorted({n for n in s1 if n not in drop}, key=_node_id)


def item_key(item):
    if isinstance(item, Node):
        return ("node", item.id)
    return (type(item).__name__, item)


def set_equal(s1, s2) -> bool:
    """Equality up to duplicates and order; nodes by identity, atomics by type and value."""
    return {item_key(i) for i in s1} == {item_key(i) for i in s2}


# -- the store ---------------------------------------------------------------


class NodeStore:
    """Owns all nodes of one engine instance.  Single writer, many readers."""

    def __init__(self):
        self._ids = itertools.count(1)
        self._nodes: dict[int, Node] = {}
        self.documents: dict[str, Node] = {}
        self._id_index: dict[tuple[int, str], dict[str, Node]] = {}

    def __len__(self):
        return len(self._nodes)

    def _new(self, kind, name=None, value=None, parent=None) -> Node:
        n = Node(next(self._ids), kind, name, value, parent)
        if parent is None:
            n.root = n
        else:
            n.root = parent.root
            siblings = parent.attributes if kind == ATTRIBUTE else parent.children
            n.index = len(siblings)
            siblings.append(n)
        self._nodes[n.id] = n
        return n

    def node(self, node_id: int) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def doc_order_less(self, a: int, b: int) -> bool:
        return self.node(a).id < self.node(b).id

    # parsing

    def parse_document(self, xml_text: str, uri: Optional[str] = None) -> Node:
        doc = self._new(DOCUMENT)
        stack = [doc]
        text: list[str] = []

        def flush():
            if text:
                s = "".join(text)
                text.clear()
                if s.strip():
                    self._new(TEXT, value=s, parent=stack[-1])

        def start(name, attrs):
            flush()
            el = self._new(ELEMENT, name=name, parent=stack[-1])
            for i in range(0, len(attrs), 2):
                self._new(ATTRIBUTE, name=attrs[i], value=attrs[i + 1], parent=el)
            stack.append(el)

        def end(name):
            flush()
            stack.pop()

        p = expat.ParserCreate()
        p.ordered_attributes = True
        p.buffer_text = True
        p.StartElementHandler = start
        p.EndElementHandler = end
        p.CharacterDataHandler = text.append
        try:
            p.Parse(xml_text, True)
        except expat.ExpatError as e:
            raise MalformedXml((e.lineno, e.offset), expat.ErrorString(e.code)) from None
        if uri is not None:
            self.documents[uri] = doc
        return doc

    # construction

    def construct_node(self, kind, name=None, value=None, children=()) -> Node:
        """Create a fresh node; child content is deep-copied, never aliased.

        Attribute nodes among ``children`` become attributes of the new
        element; document nodes contribute their children.
        """
        if kind == TEXT:
            return self._new(TEXT, value=value or "")
        if kind == ATTRIBUTE:
            return self._new(ATTRIBUTE, name=name, value=value or "")
        for c in children:
            if not isinstance(c, Node):
                raise TypeErr(f"constructor content must be nodes, got {c!r}")
        top = self._new(kind, name=name)
        for c in children:
            if c.kind == DOCUMENT:
                for g in c.children:
                    self._copy(g, top)
            else:
                self._copy(c, top)
        return top

    def _copy(self, src: Node, parent: Node) -> Node:
        if src.kind == ATTRIBUTE:
            if any(a.name == src.name for a in parent.attributes):
                raise TypeErr(f"duplicate attribute {src.name!r}")
            return self._new(ATTRIBUTE, src.name, src.value, parent)
        n = self._new(src.kind, src.name, src.value, parent)
        for a in src.attributes:
            self._new(ATTRIBUTE, a.name, a.value, n)
        for c in src.children:
            self._copy(c, n)
        return n

    # ID lookup

    def id_index(self, root: Node, attr: str) -> dict[str, Node]:
        key = (root.id, attr)
        idx = self._id_index.get(key)
        if idx is None:
            idx = {}
            for n in _descendants(root):
                if n.kind == ELEMENT:
                    for a in n.attributes:
                        if a.name == attr:
                            idx.setdefault(a.value.strip(), n)
            self._id_index[key] = idx
        return idx


# -- serialization ----------------------------------------------------------


def escape_text(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def escape_attr(s: str) -> str:
    return escape_text(s).replace('"', "&quot;")


def serialize(node: Node) -> str:
    out: list[str] = []
    _ser(node, out)
    return "".join(out)


def _ser(n: Node, out: list) -> None:
    if n.kind == TEXT:
        out.append(escape_text(n.value))
    elif n.kind == ATTRIBUTE:
        out.append(f'{n.name}="{escape_attr(n.value)}"')
    elif n.kind == DOCUMENT:
        for c in n.children:
            _ser(c, out)
    else:
        attrs = "".join(f' {a.name}="{escape_attr(a.value)}"' for a in n.attributes)
        if not n.children:
            out.append(f"<{n.name}{attrs}/>")
            return
        out.append(f"<{n.name}{attrs}>")
        for c in n.children:
            _ser(c, out)
        out.append(f"</{n.name}>")


def format_atomic(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return str(v)


def serialize_item(item) -> str:
    return serialize(item) if isinstance(item, Node) else format_atomic(item)


def serialize_sequence(seq) -> str:
    return "\n".join(serialize_item(i) for i in seq)
