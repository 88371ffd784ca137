import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import exprgen
from conftest import CURRICULUM_3
from fixq import EngineConfig, NodeStore, evaluate_query, queries
from fixq.algebra import (algebraic_check, compile_body, compile_query, decode, encode,
                          eval_plan, plan_to_text, push_up_check, simplify_for_check)
from fixq.algebra.compiler import N, literal
from fixq.algebra.plan import PlanNode, Table
from fixq.errors import FixqError, MalformedDag, Unsupported
from fixq.evaluator import Evaluator
from fixq.expr import Fixpoint, desugar, walk
from fixq.parser import parse_expr, parse_query
from fixq.xdm import NameTest, axis_step, ddo, set_equal


def body_of(text):
    prog = parse_query(text)
    fp = next(n for n in walk(prog.main) if isinstance(n, Fixpoint))
    return fp.var, fp.body, prog.function_table()


def ops(plan):
    return [n.op for n in plan.nodes()]


def test_q1_plan_shape():
    var, body, funcs = body_of(queries.Q1)
    plan = compile_body(var, body, funcs)
    assert plan.rec_input.op == "RecInput" and plan.root.op == "RecOutput"
    assert {"StepJoin", "IdLookup", "Join"} <= set(ops(plan))
    assert "CountAgg" not in ops(plan)
    r = push_up_check(plan)
    assert r.safe and r.blocker is None
    assert any("big step" in s for s in r.trace)


def test_q2_plan_blocked_by_count():
    var, body, funcs = body_of(queries.Q2)
    r = algebraic_check(var, body, funcs)
    assert not r.safe and r.blocker == "CountAgg"
    assert "CountAgg" in ops(r.plan)


def test_unfolded_id_is_algebraically_safe():
    var, body, funcs = body_of(queries.Q1_UNFOLDED)
    assert algebraic_check(var, body, funcs).safe


def test_id_without_focus_not_certified():
    var, body, funcs = body_of(queries.Q1_ID_OUTSIDE)
    r = algebraic_check(var, body, funcs)
    assert not r.safe and r.reason.startswith("not compilable")


@pytest.mark.parametrize("text,safe,blocker", [
    ("$x/a", True, None),
    ("$x/a union $x/b", True, None),
    ("($x/a, $x/b)", True, None),
    ("for $y in $x return $y/a", True, None),
    ("$x[1]", False, "RowNum"),
    ("if (count($x/self::a)) then $x/* else ()", False, "CountAgg"),
])
def test_push_up_examples(text, safe, blocker):
    r = algebraic_check("x", parse_expr(text))
    assert r.safe is safe, r.reason
    assert r.blocker == blocker


def test_except_blocks():
    r = algebraic_check("x", parse_expr("$x except $x/a"))
    assert not r.safe and r.blocker in ("Distinct", "DifferenceAll")


def test_constructor_blocks():
    r = algebraic_check("x", parse_expr("for $y in $x return <w>{$y}</w>/*"))
    assert not r.safe and r.blocker == "NodeConstructor"


def test_missing_rec_input():
    plan = compile_query(parse_expr("1"))
    with pytest.raises(MalformedDag):
        push_up_check(plan)


def test_simplify_drops_order_only_nodes():
    plan = compile_body("x", parse_expr("$x/a"))
    simple = simplify_for_check(plan)
    assert "Distinct" in ops(plan) and "RowNum" in ops(plan)
    assert "Distinct" not in ops(simple) and "RowNum" not in ops(simple)
    assert len(simple.templates) == len(plan.templates)


def test_golden_plan_text():
    plan = compile_body("x", parse_expr("$x/a"))
    assert plan_to_text(plan, renumber=True) == "\n".join([
        "1 RecInput var=x -> []",
        "2 Project cols=[[iter,iter],[pos,pos],[item,item]] -> [1]",
        "3 Project cols=[[iter,iter],[item,item]] -> [2]",
        "4 StepJoin axis=child test=a -> [3]",
        "5 Project cols=[[iter,iter],[item,item]] -> [4]",
        "6 Distinct order-only -> [5]",
        "7 RowNum order-only desc=false order=[item] out=pos partition=iter -> [6]",
        "8 Project cols=[[iter,iter],[pos,pos],[item,item]] -> [7]",
        "9 Project cols=[[iter,iter],[item,item]] -> [8]",
        "10 RecOutput -> [9]",
        "template step input=2 entry=3 exit=8 certified=true",
    ])


def test_unknown_operator():
    with pytest.raises(MalformedDag):
        PlanNode("Sort")


# -- operator semantics ----------------------------------------------------------


def test_distinct_keeps_first_occurrence():
    lit = literal(("a", "b"), [(1, "x"), (2, "y"), (1, "x"), (1, "x"), (3, "x")])
    t = eval_plan(N("Distinct", lit))
    assert t.rows == [(1, "x"), (2, "y"), (3, "x")]


def test_difference_all_is_bag_difference():
    a = literal(("v",), [(1,), (1,), (2,), (3,), (1,)])
    b = literal(("v",), [(1,), (3,), (4,)])
    t = eval_plan(N("DifferenceAll", a, b))
    assert t.rows == [(1,), (2,), (1,)]


def test_union_is_bag_union():
    a = literal(("v",), [(1,), (2,)])
    b = literal(("v",), [(2,)])
    assert eval_plan(N("Union", a, b)).rows == [(1,), (2,), (2,)]


def test_count_agg_grouped():
    lit = literal(("g", "v"), [(1, "a"), (2, "b"), (1, "c")])
    t = eval_plan(N("CountAgg", lit, group="g", out="n"))
    assert sorted(t.rows) == [(1, 2), (2, 1)]


def test_encode_decode_round_trip():
    t = encode(["a", "b", "c"], iteration=2)
    assert decode(t, 2) == ["a", "b", "c"] and decode(t, 1) == []


# -- fixpoint operators ------------------------------------------------------------


def _curriculum_store():
    store = NodeStore()
    store.parse_document(CURRICULUM_3, "curriculum.xml")
    return store


@pytest.mark.parametrize("op", ["Mu", "MuDelta"])
def test_mu_matches_evaluator(op):
    store = _curriculum_store()
    prog = parse_query(queries.Q1)
    plan = compile_query(prog.main, prog.function_table(), fixpoint_op=op)
    got = decode(eval_plan(plan, {}, store, id_attribute="code"))
    ref, _ = evaluate_query(queries.Q1, store, EngineConfig(id_attribute="code"))
    assert set_equal(got, ref) and len(got) == 2


def test_mu_delta_feeds_less_on_chain():
    store = _curriculum_store()
    prog = parse_query(queries.Q1)
    from fixq.algebra.interp import Interpreter

    fed = {}
    for op in ("Mu", "MuDelta"):
        plan = compile_query(prog.main, prog.function_table(), fixpoint_op=op)
        it = Interpreter(store, {}, id_attribute="code")
        it.value(plan.root)
        fed[op] = it.mu_stats[0].fed_per_iteration
    assert fed["MuDelta"] == [1, 1, 1] and fed["Mu"] == [1, 1, 2]


def test_q2_mu_keep_seed_reproduces_divergence():
    prog = parse_query(queries.Q2)
    out = {}
    for op in ("Mu", "MuDelta"):
        store = NodeStore()
        plan = compile_query(prog.main, fixpoint_op=op, seed_in_result=True)
        out[op] = [n.name for n in decode(eval_plan(plan, {}, store))]
    assert out == {"Mu": ["a", "b", "c", "d"], "MuDelta": ["a", "b", "c"]}


# -- fuzz ----------------------------------------------------------------------------


def _fuzz_case(seed, constructors=False):
    rng = random.Random(seed)
    store = NodeStore()
    doc = store.parse_document(exprgen.random_doc(rng), exprgen.DOC_URI)
    nodes = axis_step(doc, "descendant", NameTest("*"))
    text = exprgen.random_body(rng, rng.choice([2, 3]), constructors=constructors)
    e = desugar(parse_expr(text))
    x1 = exprgen.random_subset(rng, nodes)
    x2 = exprgen.random_subset(rng, nodes)
    return store, text, e, x1, x2


@settings(max_examples=250, deadline=None)
@given(st.integers(0, 2**32))
def test_plan_matches_evaluator(seed):
    store, text, e, x1, x2 = _fuzz_case(seed)
    try:
        plan = compile_body("x", e)
        ref = exprgen.eval_body(Evaluator(store), "x", e, ddo(x1 + x2))
    except (Unsupported, FixqError):
        return
    assert set_equal(exprgen.plan_items(plan, store, x1 + x2), ref), text


@settings(max_examples=250, deadline=None)
@given(st.integers(0, 2**32))
def test_push_up_soundness(seed):
    store, text, e, x1, x2 = _fuzz_case(seed, constructors=True)
    try:
        plan = compile_body("x", e)
    except Unsupported:
        return
    if not push_up_check(plan).safe:
        return
    try:
        whole = exprgen.plan_items(plan, store, x1 + x2)
        parts = exprgen.plan_items(plan, store, x1) + exprgen.plan_items(plan, store, x2)
    except FixqError:
        return
    assert set_equal(whole, parts), text


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_mu_equals_mu_delta_for_certified_bodies(seed):
    rng = random.Random(seed)
    store = NodeStore()
    store.parse_document(exprgen.random_doc(rng, size=20), exprgen.DOC_URI)
    body = exprgen.random_body(rng, 2)
    q = f'with $x seeded by doc("{exprgen.DOC_URI}")//{rng.choice("abcd")} recurse {body}'
    e = parse_expr(q)
    fp = next(n for n in walk(e) if isinstance(n, Fixpoint))
    if not algebraic_check(fp.var, fp.body).safe:
        return
    try:
        mu = decode(eval_plan(compile_query(e, fixpoint_op="Mu"), {}, store,
                              max_iterations=200))
        md = decode(eval_plan(compile_query(e, fixpoint_op="MuDelta"), {}, store,
                              max_iterations=200))
    except (Unsupported, FixqError):
        return
    assert set_equal(mu, md), q
