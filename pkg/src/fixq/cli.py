"""Command-line interface: run, analyze, gen and bench.

Exit codes: 0 success, 2 query or input error, 3 fixpoint divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from . import bench, datagen, distcheck
from .algebra import algebraic_check, compile_body, plan_to_text
from .errors import FixpointDivergence, FixqError, QuerySyntaxError, Unsupported
from .evaluator import CHECKS, STRATEGIES, EngineConfig, Evaluator
from .expr import Fixpoint, desugar_program, unparse, walk
from .parser import parse_query
from .xdm import NodeStore, serialize_item

EXIT_OK, EXIT_QUERY_ERROR, EXIT_DIVERGENCE = 0, 2, 3
DIGEST_THRESHOLD = 10_000
DELTA_WARNING = "warning: body not certified distributive; running Delta as requested"


@dataclass
class RunReport:
    query: str
    documents: list
    strategy: str
    fixpoints: list = field(default_factory=list)  # per run: stats, decision
    result_count: int = 0
    result_digest: str = ""
    result: Optional[list] = None
    wall_ms: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def result_digest(items) -> str:
    """Order-insensitive digest: item count plus a hash of the sorted serializations."""
    h = hashlib.sha256()
    for s in sorted(serialize_item(i) for i in items):
        h.update(s.encode("utf-8"))
        h.update(b"\0")
    return f"count={len(items)} sha256={h.hexdigest()[:16]}"


def _read_query(args) -> tuple[str, str]:
    if args.expr is not None:
        return args.expr, "<expr>"
    if args.query is None:
        raise SystemExit("one of --query or -e is required")
    with open(args.query, encoding="utf-8") as fh:
        return fh.read(), args.query


def _load_docs(store: NodeStore, specs) -> list:
    """Register ``[URI=]PATH`` documents; returns their document nodes."""
    docs = []
    for spec in specs or ():
        uri, _, path = spec.partition("=") if "=" in spec else (None, "", spec)
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        docs.append(store.parse_document(text, uri or os.path.basename(path)))
    return docs


def _fixpoints(program) -> list:
    """Every fixpoint expression in the program, functions first."""
    out = []
    for f in program.functions:
        out.extend(n for n in walk(f.body) if isinstance(n, Fixpoint))
    for _, v in program.variables:
        out.extend(n for n in walk(v) if isinstance(n, Fixpoint))
    out.extend(n for n in walk(program.main) if isinstance(n, Fixpoint))
    return out


# -- run -------------------------------------------------------------------------


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        text, qname = _read_query(args)
        cfg = EngineConfig(strategy=args.strategy, check=args.check,
                           max_fixpoint_iterations=args.max_iter, id_attribute=args.id_attr,
                           base_dir=args.base_dir, seed_in_result=args.keep_seed)
        store = NodeStore()
        docs = _load_docs(store, args.doc)
        program = parse_query(text)
        ev = Evaluator(store, program, cfg)
        t0 = time.perf_counter()
        result = ev.run(docs[0] if docs else None)
        wall = (time.perf_counter() - t0) * 1000.0
    except FixpointDivergence as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DIVERGENCE
    except (FixqError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_QUERY_ERROR

    report = RunReport(qname, list(args.doc or ()), args.strategy, wall_ms=round(wall, 3))
    warned = False
    for e, stats, decision in ev.fixpoint_runs:
        if decision.algorithm == "delta" and decision.certified is False and not warned:
            print(DELTA_WARNING, file=err)
            warned = True
        report.fixpoints.append({"fixpoint": unparse(e), "stats": stats.to_dict(),
                                 "decision": decision.to_dict()})
    report.result_count = len(result)
    report.result_digest = result_digest(result)

    if len(result) <= DIGEST_THRESHOLD:
        report.result = [serialize_item(i) for i in result]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for item in result:
                fh.write(serialize_item(item) + "\n")
    elif report.result is None:
        print(report.result_digest, file=out)
    else:
        for line in report.result:
            print(line, file=out)
    if args.stats:
        with open(args.stats, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    return EXIT_OK


# -- analyze ---------------------------------------------------------------------


def analyze_program(program, recursive: str = "assume") -> list:
    """Both analyzer verdicts for every fixpoint in ``program``."""
    program = desugar_program(program)
    functions = program.function_table()
    reports = []
    for fp in _fixpoints(program):
        syn = distcheck.dist_safe(fp.var, fp.body, functions, recursive=recursive)
        alg = algebraic_check(fp.var, fp.body, functions)
        big = sum(1 for s in alg.trace if s.startswith("big step"))
        reports.append({
            "fixpoint": unparse(fp),
            "var": fp.var,
            "syntactic": syn.to_dict(),
            "algebraic": {**alg.to_dict(), "big_steps": big},
            "_expr": fp,
            "_functions": functions,
            "_plan": alg.plan,
        })
    return reports


def cmd_analyze(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        text, _ = _read_query(args)
        program = parse_query(text)
    except QuerySyntaxError as exc:
        print(f"error: QuerySyntaxError: {exc}", file=err)
        return EXIT_QUERY_ERROR
    except (FixqError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_QUERY_ERROR
    reports = analyze_program(program, args.recursive)
    if not reports:
        print("no fixpoint expressions found", file=out)
    plans = []
    for i, r in enumerate(reports, 1):
        syn, alg = r["syntactic"], r["algebraic"]
        if not args.json:
            print(f"fixpoint {i}: {r['fixpoint']}", file=out)
            if syn["safe"]:
                rules = ", ".join(dict.fromkeys(syn["rule_trace"]))
                print(f"  syntactic: safe (rules: {rules})", file=out)
            else:
                w = syn["witness"]
                print(f"  syntactic: unsafe, rule {w['rule']}: {w['reason']} at {w['expr']}",
                      file=out)
            if alg["safe"]:
                print(f"  algebraic: safe, union reached RecOutput "
                      f"(big steps: {alg['big_steps']})", file=out)
            elif "blocker" in alg:
                print(f"  algebraic: unsafe, blocker {alg['blocker']} ({alg['reason']})",
                      file=out)
            else:
                print(f"  algebraic: unsafe ({alg['reason']})", file=out)
        if args.emit_plan:
            try:
                # the checked plan keeps the node ids quoted in the verdicts
                plan = r["_plan"] or compile_body(r["var"], r["_expr"].body, r["_functions"])
                plans.append(f"# fixpoint {i}\n{plan_to_text(plan)}")
            except Unsupported as exc:
                plans.append(f"# fixpoint {i}\n# {exc}")
    if args.json:
        clean = [{k: v for k, v in r.items() if not k.startswith("_")} for r in reports]
        print(json.dumps(clean, indent=2), file=out)
    if args.emit_plan:
        with open(args.emit_plan, "w", encoding="utf-8") as fh:
            fh.write("\n\n".join(plans) + "\n")
    return EXIT_OK


# -- gen -------------------------------------------------------------------------


def cmd_gen(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    if args.preset:
        spec = datagen.preset(args.preset)
        if spec.family != args.family:
            print(f"error: preset {args.preset} belongs to family {spec.family}", file=err)
            return EXIT_QUERY_ERROR
    else:
        spec = datagen.GenSpec(args.family)
    overrides = {k: getattr(args, k) for k in
                 ("size", "fanout", "topology", "window", "cycle_prob", "depth", "id_attr")
                 if getattr(args, k) is not None}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    try:
        spec = datagen.GenSpec(**{**spec.__dict__, **overrides})
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_QUERY_ERROR
    g = datagen.generate(spec)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(g.xml)
    if args.oracle:
        with open(args.oracle, "w", encoding="utf-8") as fh:
            fh.write(g.sidecar())
    print(json.dumps(g.answers, sort_keys=True), file=out)
    return EXIT_OK


# -- bench -----------------------------------------------------------------------


def cmd_bench(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    try:
        rows = bench.run_bench(args.family, sizes, args.repeat, args.seed, args.topology)
    except bench.BenchMismatch as exc:
        print(f"error: {exc}", file=err)
        return 1
    if args.out:
        bench.write_csv(rows, args.out)
    else:
        bench.write_csv(rows, out)
    if args.json:
        bench.write_json(rows, args.json)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fixq", description="Inflationary fixpoint XQuery engine")
    sub = p.add_subparsers(dest="command", required=True)

    def query_args(sp):
        sp.add_argument("--query", help="query file")
        sp.add_argument("-e", "--expr", help="query text given inline")

    r = sub.add_parser("run", help="evaluate a query")
    query_args(r)
    r.add_argument("--doc", action="append",
                   help="[URI=]PATH; repeatable, the first one is the context item")
    r.add_argument("--strategy", choices=STRATEGIES, default="auto")
    r.add_argument("--check", choices=CHECKS, default="both")
    r.add_argument("--max-iter", type=int, default=10000)
    r.add_argument("--id-attr", default="id")
    r.add_argument("--base-dir", default=".", help="directory for relative doc() URIs")
    r.add_argument("--keep-seed", action="store_true",
                   help="start the fixpoint from the seed itself")
    r.add_argument("--stats", help="write the run report as JSON")
    r.add_argument("--out", help="write the full result, one item per line")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="distributivity verdicts for each fixpoint")
    query_args(a)
    a.add_argument("--emit-plan", help="write the compiled body plans")
    a.add_argument("--json", action="store_true")
    a.add_argument("--recursive", choices=("assume", "reject"), default="assume",
                   help="treatment of recursive user functions")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gen", help="generate a benchmark document")
    g.add_argument("family", choices=datagen.FAMILIES)
    g.add_argument("--out", required=True)
    g.add_argument("--oracle", help="sidecar edge list and answers")
    g.add_argument("--seed", type=int, default=None, help="rng seed (default FIXQ_SEED)")
    g.add_argument("--preset", choices=sorted(datagen.PRESETS))
    g.add_argument("--size", type=int)
    g.add_argument("--fanout", type=int)
    g.add_argument("--topology", choices=("chain", "random", "cycle"))
    g.add_argument("--window", type=int)
    g.add_argument("--cycle-prob", type=float)
    g.add_argument("--depth", type=int)
    g.add_argument("--id-attr")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="Naive vs Delta benchmark matrix")
    b.add_argument("--family", choices=datagen.FAMILIES, required=True)
    b.add_argument("--sizes", required=True, help="comma-separated sizes")
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--topology", choices=("chain", "random"), default="random")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.add_argument("--json", help="also write rows as JSON")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
