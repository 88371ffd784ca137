"""Acceptance criteria 1-9; each test records one PASS/FAIL line."""

import random
import time

import pytest

import exprgen
from fixq import EngineConfig, NodeStore, bench, datagen, evaluate_query, queries
from fixq.algebra import (algebraic_check, compile_body, compile_query, decode, eval_plan,
                          push_up_check)
from fixq.distcheck import dist_safe, hint_rewrite
from fixq.errors import FixpointDivergence, FixqError, Unsupported
from fixq.evaluator import Evaluator
from fixq.expr import Fixpoint, desugar, walk
from fixq.parser import parse_expr, parse_query
from fixq.xdm import NameTest, axis_step, ddo, serialize_item, set_equal


@pytest.fixture
def report(request, capsys):
    def emit(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        request.config.fixq_acceptance.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def fixpoint_of(text):
    prog = parse_query(text)
    fp = next(n for n in walk(prog.main) if isinstance(n, Fixpoint))
    return fp.var, fp.body, prog.function_table()


def verdicts(text):
    var, body, funcs = fixpoint_of(text)
    return dist_safe(var, body, funcs), algebraic_check(var, body, funcs)


def load(family, gen):
    store = NodeStore()
    store.parse_document(gen.xml, queries.FAMILY_URI[family])
    return store


# -- 1 -------------------------------------------------------------------------------


def test_criterion_1_q2_divergence(report):
    t0 = time.perf_counter()
    got = {}
    for strategy in ("naive", "delta"):
        res, _ = evaluate_query(queries.Q2, NodeStore(),
                                EngineConfig(strategy=strategy, seed_in_result=True))
        got[strategy] = sorted(n.name for n in res)
    # the seed is left out of the result by default: body(seed) = (c)
    default, _ = evaluate_query(queries.Q2, NodeStore(), EngineConfig(strategy="naive"))
    got["default"] = [serialize_item(n) for n in default]
    syn, alg = verdicts(queries.Q2)
    elapsed = time.perf_counter() - t0
    ok = (got["default"] == ["<c><d/></c>"] and got["naive"] == ["a", "b", "c", "d"] and got["delta"] == ["a", "b", "c"]
          and not syn.safe and syn.witness["rule"] == "If"
          and not alg.safe and alg.blocker == "CountAgg" and elapsed < 1.0)
    report(1, ok, f"keep-seed naive={got['naive']} delta={got['delta']}, "
                  f"default={got['default']}, syntactic rule="
                  f"{syn.witness['rule']} algebraic blocker={alg.blocker} {elapsed:.3f}s")


# -- 2 -------------------------------------------------------------------------------


def test_criterion_2_q1_vs_oracle(report):
    details, ok = [], True
    for name in ("chain36", "medium", "large"):
        gen = datagen.generate(datagen.preset(name))
        edges, answers = datagen.parse_sidecar(gen.sidecar())
        expected = datagen.reachable(edges, answers["seed"])
        store = load("curriculum", gen)
        text = queries.bench_query_text("curriculum", answers["seed"])
        t0 = time.perf_counter()
        for strategy in ("naive", "delta"):
            res, _ = evaluate_query(text, store, EngineConfig(strategy=strategy,
                                                              id_attribute="code"))
            got = {n.attributes[0].value for n in res}
            ok &= got == expected and len(res) == len(got)
        elapsed = time.perf_counter() - t0
        if name == "large":
            ok &= elapsed < 30.0
        details.append(f"{name}: closure {len(expected)} in {elapsed:.2f}s")
    report(2, ok, "; ".join(details))


# -- 3 -------------------------------------------------------------------------------


def test_criterion_3_verdicts(report):
    q1 = verdicts(queries.Q1)
    q2 = verdicts(queries.Q2)
    unfolded = verdicts(queries.Q1_UNFOLDED)
    first = dist_safe("x", parse_expr("$x[1]"))
    count = parse_expr("count($x) >= 1")
    hinted = dist_safe("x", hint_rewrite("x", count))
    got = {
        "Q1": (q1[0].safe, q1[1].safe),
        "Q2": (q2[0].safe, q2[1].safe),
        "$x[1]": first.safe,
        "count": (dist_safe("x", count).safe, hinted.safe),
        "unfolded": (unfolded[0].safe, unfolded[1].safe),
    }
    want = {"Q1": (True, True), "Q2": (False, False), "$x[1]": False,
            "count": (False, True), "unfolded": (False, True)}
    report(3, got == want, f"{got}")


# -- 4 -------------------------------------------------------------------------------


def _feed_ok(rows):
    naive, delta = rows
    if naive.status != "ok" or delta.status != "ok":
        return True
    return (delta.total_fed <= naive.total_fed
            and delta.total_fed <= delta.result_size + delta.fed_first)


def test_criterion_4_feed_dominance(report):
    bad = []
    rng = random.Random(datagen.DEFAULT_SEED)
    for i in range(100):
        family = datagen.FAMILIES[i % len(datagen.FAMILIES)]
        size = rng.randint(5, 150)
        if family == "curriculum":
            spec = datagen.GenSpec(family, size, fanout=rng.randint(1, 3),
                                   cycle_prob=rng.choice([0.0, 0.05, 0.2]),
                                   rng_seed=rng.randrange(2**31))
        else:
            spec = datagen.GenSpec(family, size, fanout=rng.randint(1, 3),
                                   depth=rng.randint(2, 7), rng_seed=rng.randrange(2**31))
        rows = bench.bench_cell(family, size, gen=datagen.generate(spec))
        if not _feed_ok(rows):
            bad.append((family, size, spec.rng_seed))
    benchmark_rows = []
    for family, sizes in (("curriculum", (800, 4000)), ("auction", (200,)),
                          ("dialog", (400,)), ("ancestry", (100,))):
        benchmark_rows.extend(bench.run_bench(family, sizes))
    for naive, delta in zip(benchmark_rows[::2], benchmark_rows[1::2]):
        if not _feed_ok((naive, delta)):
            bad.append((naive.family, naive.size, "benchmark"))
    large = [r for r in benchmark_rows if r.family == "curriculum" and r.size == 4000]
    ratio = large[0].total_fed / large[1].total_fed
    ok = not bad and ratio >= 2.0
    report(4, ok, f"100 fuzzed + {len(benchmark_rows) // 2} benchmark rows, "
                  f"violations={bad}, ratio at 4000 courses={ratio:.1f}")


# -- 5 -------------------------------------------------------------------------------


def test_criterion_5_depth(report):
    chain = {}
    for n in (2, 5, 36, 100):
        gen = datagen.generate(datagen.GenSpec("curriculum", n, topology="chain"))
        _, fields = bench.run_instance("curriculum", gen, "delta")
        chain[n] = fields["iterations"]
    gen = datagen.generate(datagen.preset("ancestry"))
    _, fields = bench.run_instance("ancestry", gen, "naive")
    ok = all(it == n - 1 for n, it in chain.items()) and fields["iterations"] == 5
    report(5, ok, f"chain iterations {chain}; ancestry depth {fields['iterations']}")


# -- 6 -------------------------------------------------------------------------------


def _doc_and_nodes(rng):
    store = NodeStore()
    doc = store.parse_document(exprgen.random_doc(rng, size=rng.randint(8, 24)),
                               exprgen.DOC_URI)
    return store, axis_step(doc, "descendant", NameTest("*"))


def test_criterion_6_soundness(report):
    rng = random.Random(datagen.DEFAULT_SEED)
    syn_cases = syn_bad = 0
    while syn_cases < 1000:
        store, nodes = _doc_and_nodes(rng)
        ev = Evaluator(store)
        text = exprgen.random_body(rng, rng.choice([2, 3, 4]), constructors=True)
        body = parse_expr(text)
        if not dist_safe("x", body).safe:
            continue
        x1 = exprgen.random_subset(rng, nodes)
        x2 = exprgen.random_subset(rng, nodes)
        try:
            ok = (exprgen.eq2_holds(ev, "x", body, x1, x2)
                  and exprgen.eq3_holds(ev, "x", body, x1 + x2))
        except FixqError:
            continue
        syn_cases += 1
        syn_bad += not ok
    plan_cases = plan_bad = 0
    while plan_cases < 200:
        store, nodes = _doc_and_nodes(rng)
        text = exprgen.random_body(rng, rng.choice([2, 3]), constructors=True)
        try:
            plan = compile_body("x", desugar(parse_expr(text)))
        except Unsupported:
            continue
        if not push_up_check(plan).safe:
            continue
        x1 = exprgen.random_subset(rng, nodes)
        x2 = exprgen.random_subset(rng, nodes)
        try:
            whole = exprgen.plan_items(plan, store, x1 + x2)
            parts = exprgen.plan_items(plan, store, x1) + exprgen.plan_items(plan, store, x2)
        except FixqError:
            continue
        plan_cases += 1
        plan_bad += not set_equal(whole, parts)
    ok = syn_bad == 0 and plan_bad == 0
    report(6, ok, f"syntactic {syn_cases - syn_bad}/{syn_cases}, "
                  f"push-up {plan_cases - plan_bad}/{plan_cases}")


# -- 7 -------------------------------------------------------------------------------

D = f'doc("{exprgen.DOC_URI}")'
CORPUS = [
    f"{D}/r/*",
    f"{D}//a",
    f"{D}//b/c",
    f"{D}//*[@k]",
    f'{D}//*[@k = "1"]',
    f"{D}//a[1]",
    f"{D}//*[last()]",
    f"{D}/r/*/following-sibling::*",
    f"{D}//c/ancestor::*",
    f"{D}//d/parent::*",
    f"{D}//b union {D}//c",
    f"{D}//* except {D}//a",
    f"({D}//a, {D}//b)",
    f"for $y in {D}//a return $y/*",
    f"for $y in {D}//* return if ($y/@k) then $y else ()",
    f"let $z := {D}//b return $z/..",
    f"count({D}//a)",
    f"empty({D}//zzz)",
    f'{D}//*[@k = {D}//a/@k]',
    f"{D}//*[not(*)]",
    f"{D}/r/*/(descendant::b, self::a)",
    f'{D}/id("n1 n3 n5")',
    f"{D}//a/id(@id)",
    f"if ({D}//a[@k]) then {D}//b else {D}//c",
    f"with $x seeded by {D}/r/* recurse $x/*",
    f"with $x seeded by {D}//a recurse $x/following-sibling::*[1]",
    f"with $x seeded by {D}//b recurse $x/..",
    f"with $x seeded by {D}//c recurse ($x/* union $x/parent::a)",
    f"with $x seeded by {D}//a recurse for $y in $x return $y/*[@k]",
    f"{D}/r/closure(*)",
    f"{D}//a/closure(following-sibling::*)",
    f"with $x seeded by {D}/r/*[1] recurse if (count($x/self::a)) then $x/* else ()",
]
CURRICULUM_CORPUS = [queries.Q1, queries.Q1_UNFOLDED]


def _plan_vs_eval(text, store, id_attribute="id"):
    prog = parse_query(text)
    plan = compile_query(prog.main, prog.function_table())
    got = decode(eval_plan(plan, {}, store, id_attribute=id_attribute))
    ref, _ = evaluate_query(text, store, EngineConfig(strategy="naive",
                                                      id_attribute=id_attribute))
    if any(not hasattr(i, "id") for i in ref):
        return sorted(map(str, got)) == sorted(map(str, ref))
    return set_equal(got, ref)


def test_criterion_7_differential(report):
    rng = random.Random(datagen.DEFAULT_SEED)
    checked, failures, unsupported = 0, [], []
    docs = [exprgen.random_doc(rng, size=30) for _ in range(3)]
    for text in CORPUS:
        for xml in docs:
            store = NodeStore()
            store.parse_document(xml, exprgen.DOC_URI)
            try:
                if not _plan_vs_eval(text, store):
                    failures.append(text)
            except Unsupported:
                unsupported.append(text)
                break
            checked += 1
    curricula = [datagen.generate(datagen.GenSpec("curriculum", 40, rng_seed=s))
                 for s in (1, 2, 3)]
    for text in CURRICULUM_CORPUS:
        for gen in curricula:
            try:
                if not _plan_vs_eval(text, load("curriculum", gen), "code"):
                    failures.append(text)
            except Unsupported:
                unsupported.append(text)
                break
            checked += 1
    # Q2 is self-contained; its constructed nodes are compared by serialization
    for _ in range(3):
        prog = parse_query(queries.Q2)
        got = decode(eval_plan(compile_query(prog.main), {}, NodeStore()))
        ref, _ = evaluate_query(queries.Q2, NodeStore(), EngineConfig(strategy="naive"))
        if sorted(map(serialize_item, got)) != sorted(map(serialize_item, ref)):
            failures.append("Q2")
        checked += 1
    n_queries = len(CORPUS) + len(CURRICULUM_CORPUS) + 1 - len(unsupported)
    ok = not failures and not unsupported and n_queries >= 30
    report(7, ok, f"{n_queries} queries, {checked} query/document pairs, "
                  f"failures={failures}, not compilable={unsupported}")


# -- 8 -------------------------------------------------------------------------------


def test_criterion_8_timing(report):
    gen = datagen.generate(datagen.preset("large"))
    store = load("curriculum", gen)
    fields = {}
    for strategy in ("naive", "delta"):
        _, fields[strategy] = bench.run_instance("curriculum", gen, strategy, repeat=3,
                                                 store=store)
    naive, delta = fields["naive"]["wall_ms"], fields["delta"]["wall_ms"]
    report(8, delta <= naive * 1.2,
           f"4000 courses: naive {naive:.1f} ms, delta {delta:.1f} ms, "
           f"speedup {naive / delta:.1f}x")


# -- 9 -------------------------------------------------------------------------------


def test_criterion_9_divergence_guard(report):
    text = "with $x seeded by <a/> recurse ($x/*, <b/>)"
    hits = {}
    for limit in (10, 100):
        try:
            evaluate_query(text, NodeStore(), EngineConfig(strategy="naive",
                                                           max_fixpoint_iterations=limit))
        except FixpointDivergence as exc:
            hits[limit] = exc.iterations
    syn, alg = verdicts(text)
    ok = hits == {10: 10, 100: 100} and not syn.safe and not alg.safe
    report(9, ok, f"diverged at {hits}; syntactic rule={syn.witness['rule']}, "
                  f"algebraic blocker={alg.blocker}")
