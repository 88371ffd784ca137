import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import exprgen
from fixq import NodeStore, queries
from fixq.distcheck import dist_safe, hint_rewrite
from fixq.errors import TypeErr
from fixq.evaluator import Evaluator
from fixq.expr import Fixpoint, For, VarRef, free_vars, unparse
from fixq.parser import parse_expr, parse_query
from fixq.xdm import NameTest, axis_step, set_equal


def ds(text, var="x", **kw):
    return dist_safe(var, parse_expr(text), **kw)


def fixpoint_body(text):
    prog = parse_query(text)
    from fixq.expr import walk
    fp = next(n for n in walk(prog.main) if isinstance(n, Fixpoint))
    return fp.var, fp.body, prog.function_table()


@pytest.mark.parametrize("text", [
    "$x/child::c",
    "$x/id(./prerequisites/pre_code)",
    "for $y in $x return count($y)",
    "$x union $x/a",
    "($x/a, $x/b)",
    "doc(\"t.xml\")//a",
    "()",
    "let $z := doc(\"t.xml\")//a return $x/b[@k = $z/@k]",
    "if (doc(\"t.xml\")//a) then $x/b else $x/c",
    "typeswitch (doc(\"t.xml\")) case element() return $x default return $x/*",
])
def test_safe_examples(text):
    v = ds(text)
    assert v.safe, v.witness_text()


@pytest.mark.parametrize("text,rule", [
    ("count($x) >= 1", "GeneralComparison"),
    ("if (count($x/self::a)) then $x/* else ()", "If"),
    ("$x[1]", "Predicate"),
    ("$x[last()]", "Predicate"),
    ('text {"c"}', "Constructor"),
    ("for $y in $x return <w>{$y}</w>/*", "Constructor"),
    ("for $y in $x return $y/following-sibling::*[. = $x]", "For"),
    ("let $y := $x return $y/a union $x/b", "Let2"),
    ("$x except $x/a", "Except"),
    ("typeswitch ($x) case element() return $x default return ()", "TypeSw"),
    ("$x/a/$x", "Step"),
    ("$x/(if (position() = 1) then . else ())", "Step2"),
    ("with $y seeded by $x recurse $y/*", "Fixpoint"),
])
def test_unsafe_examples(text, rule):
    v = ds(text)
    assert not v.safe
    assert v.witness["rule"] == rule
    assert "rule " + rule in v.witness_text()


def test_id_outside_vs_unfolded_is_syntactically_unsafe():
    for q in (queries.Q1_ID_OUTSIDE, queries.Q1_UNFOLDED):
        var, body, funcs = fixpoint_body(q)
        assert not dist_safe(var, body, funcs).safe


def test_q1_safe_with_trace():
    var, body, funcs = fixpoint_body(queries.Q1)
    v = dist_safe(var, body, funcs)
    assert v.safe and v.witness is None and v.rule_trace


def test_hint_rewrite_shape():
    e = hint_rewrite("x", parse_expr("count($x) >= 1"))
    assert isinstance(e, For) and e.in_ == VarRef("x")
    assert unparse(e) == "(for $y in $x return (count($y) >= 1))"
    assert "x" not in free_vars(e.ret)
    assert dist_safe("x", e).safe


def test_hint_rewrite_identity():
    e = hint_rewrite("x", parse_expr("$x"))
    assert dist_safe("x", e).safe
    assert unparse(e) == "(for $y in $x return $y)"


def test_hint_rewrite_avoids_capture():
    e = hint_rewrite("x", parse_expr("for $y in $x/a return ($y, $x)"))
    assert e.var != "y"


def test_funcall_rules():
    decls = ("declare function f($n) { $n/a }; "
             "declare function g($n) { count($n) }; "
             "declare function h($n) { $n/b union h($n/c) }; ")

    def check(text, **kw):
        prog = parse_query(decls + text)
        return dist_safe("x", prog.main, prog.function_table(), **kw)

    assert check("f($x)").safe
    v = check("g($x)")
    assert not v.safe and v.witness["expr"] == "count($n)"  # innermost failure
    assert check("h($x)").safe
    assert "FunCall(assumed)" in check("h($x)").rule_trace
    assert not check("h($x)", recursive="reject").safe


def test_bidder_function_is_safe():
    var, body, funcs = fixpoint_body(queries.BIDDER_CLOSURE.replace("{seed}", "p"))
    assert dist_safe(var, body, funcs).safe


@pytest.mark.parametrize("text", [
    "for $y in $x return ($y/a, $x/b)",
    "for $y in $x/a return $y/b[. = $x/@k]",
    "for $y at $i in $x return $y/a",
])
def test_for_linearity(text):
    assert not ds(text).safe


# -- soundness ---------------------------------------------------------------------


def _setup(rng):
    store = NodeStore()
    doc = store.parse_document(exprgen.random_doc(rng, size=18), exprgen.DOC_URI)
    nodes = axis_step(doc, "descendant", NameTest("*"))
    return Evaluator(store), nodes


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_soundness_fuzz(seed):
    rng = random.Random(seed)
    ev, nodes = _setup(rng)
    text = exprgen.random_body(rng, 3, constructors=True)
    body = parse_expr(text)
    if not dist_safe("x", body).safe:
        return
    x1 = exprgen.random_subset(rng, nodes)
    x2 = exprgen.random_subset(rng, nodes)
    try:
        assert exprgen.eq2_holds(ev, "x", body, x1, x2), text
        assert exprgen.eq3_holds(ev, "x", body, x1 + x2), text
    except TypeErr:
        pass


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_hint_rewrite_preserves_distributive_bodies(seed):
    rng = random.Random(seed)
    ev, nodes = _setup(rng)
    body = parse_expr(exprgen.random_body(rng, 3))
    if not dist_safe("x", body).safe:
        return
    x = exprgen.random_subset(rng, nodes)
    try:
        before = exprgen.eval_body(ev, "x", body, x)
        after = exprgen.eval_body(ev, "x", hint_rewrite("x", body), x)
    except TypeErr:
        return
    assert set_equal(before, after)
