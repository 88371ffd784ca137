"""Benchmark matrix: Naive vs Delta on generated instances of each family."""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Optional

from . import datagen, queries
from .errors import FixqError
from .evaluator import EngineConfig, evaluate_query
from .xdm import NodeStore, set_equal

CSV_COLUMNS = ("family", "size", "strategy", "wall_ms", "iterations", "total_fed",
               "result_size", "status")


class BenchMismatch(AssertionError):
    """Naive and Delta disagreed on a query certified distributive."""


@dataclass
class BenchRow:
    family: str
    size: int
    strategy: str
    wall_ms: Optional[float] = None
    iterations: Optional[int] = None
    total_fed: Optional[int] = None
    result_size: Optional[int] = None
    status: str = "ok"
    fed_first: Optional[int] = None  # fed_per_iteration[0], summed over fixpoint runs

    def csv_row(self) -> list:
        d = asdict(self)
        return ["" if d[c] is None else d[c] for c in CSV_COLUMNS]


def instance_spec(family: str, size: int, seed: Optional[int] = None,
                  topology: str = "random") -> datagen.GenSpec:
    """Generator settings used for a benchmark cell of ``family`` at ``size``."""
    kw = {} if seed is None else {"rng_seed": seed}
    if family == "curriculum":
        by_size = {p.size: p for p in (datagen.PRESETS["medium"], datagen.PRESETS["large"])}
        if topology == "random" and size in by_size:
            return datagen.preset("medium" if size == 800 else "large", **kw)
        return datagen.GenSpec("curriculum", size, topology=topology, **kw)
    if family == "auction":
        return datagen.GenSpec("auction", size, fanout=3, **kw)
    if family == "dialog":
        return datagen.GenSpec("dialog", size, depth=7, **kw)
    return datagen.GenSpec("ancestry", size, depth=5, **kw)


def load_instance(family: str, gen: datagen.Generated) -> NodeStore:
    store = NodeStore()
    store.parse_document(gen.xml, queries.BENCH_QUERIES[family].uri)
    return store


def run_instance(family: str, gen: datagen.Generated, strategy: str, repeat: int = 1,
                 max_iter: int = 10000, store: Optional[NodeStore] = None):
    """Run the family's query ``repeat`` times; returns (result, row fields).

    Parsing is not timed.  Runs sharing ``store`` return comparable node identities.
    """
    bq = queries.BENCH_QUERIES[family]
    text = queries.bench_query_text(family, str(gen.answers.get("seed", "")))
    cfg = EngineConfig(strategy=strategy, id_attribute=bq.id_attribute,
                       max_fixpoint_iterations=max_iter)
    store = store or load_instance(family, gen)
    times = []
    for _ in range(max(1, repeat)):
        t0 = time.perf_counter()
        result, ev = evaluate_query(text, store, cfg)
        times.append((time.perf_counter() - t0) * 1000.0)
    runs = [stats for _, stats, _ in ev.fixpoint_runs]
    fields = {
        "wall_ms": round(statistics.median(times), 3),
        "iterations": max((s.iterations for s in runs), default=0),
        "total_fed": sum(s.total_fed for s in runs),
        "result_size": len(result),
        "fed_first": sum(s.fed_per_iteration[0] for s in runs if s.fed_per_iteration),
    }
    return result, fields


def bench_cell(family: str, size: int, repeat: int = 1, seed: Optional[int] = None,
               topology: str = "random", gen: Optional[datagen.Generated] = None) -> list:
    """Naive and Delta rows for one instance; raises BenchMismatch on disagreement."""
    if gen is None:
        gen = datagen.generate(instance_spec(family, size, seed, topology))
    store = load_instance(family, gen)
    rows, results = [], {}
    for strategy in ("naive", "delta"):
        row = BenchRow(family, size, strategy)
        try:
            result, fields = run_instance(family, gen, strategy, repeat, store=store)
        except FixqError as exc:
            row.status = f"error: {type(exc).__name__}: {exc}"
        else:
            results[strategy] = result
            for k, v in fields.items():
                setattr(row, k, v)
        rows.append(row)
    if len(results) == 2 and not set_equal(results["naive"], results["delta"]):
        raise BenchMismatch(f"{family} size {size}: naive and delta results differ")
    return rows


def run_bench(family: str, sizes, repeat: int = 1, seed: Optional[int] = None,
              topology: str = "random") -> list:
    rows = []
    for size in sizes:
        rows.extend(bench_cell(family, size, repeat, seed, topology))
    return rows


def write_csv(rows, path_or_file) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r.csv_row())

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def write_json(rows, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in rows], fh, indent=2)
