"""Inflationary fixed points: Naive and Delta evaluation, strategy choice, stats."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import xdm
from .errors import FixpointDivergence, TypeErr
from .expr import ContextItem, Expr, Fixpoint, PathExpr, VarRef, fresh_var, free_vars


@dataclass
class FixpointSpec:
    var: str
    seed: Expr
    body: Expr
    env: object  # evaluator.Env
    evaluator: object  # evaluator.Evaluator


@dataclass
class FixpointStats:
    algorithm: str
    iterations: int = 0
    fed_per_iteration: list = field(default_factory=list)
    total_fed: int = 0
    result_size: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class FixpointDecision:
    """Which algorithm ran and why."""

    algorithm: str
    requested: str
    certified: Optional[bool] = None
    syntactic: object = None  # distcheck.DistVerdict
    algebraic: object = None  # algebra.pushup.PushUpResult
    reason: str = ""

    def to_dict(self) -> dict:
        out = {"algorithm": self.algorithm, "requested": self.requested,
               "certified": self.certified, "reason": self.reason}
        if self.syntactic is not None:
            out["syntactic"] = self.syntactic.to_dict()
        if self.algebraic is not None:
            out["algebraic"] = self.algebraic.to_dict()
        return out


def _nodes_only(seq, what):
    for i in seq:
        if not isinstance(i, xdm.Node):
            raise TypeErr(f"fixpoint {what} produced atomic value {i!r}")
    return seq


class _Runner:
    def __init__(self, spec: FixpointSpec, algorithm: str):
        self.spec = spec
        self.ev = spec.evaluator
        self.stats = FixpointStats(algorithm)
        self.limit = self.ev.config.max_fixpoint_iterations
        self.t0 = time.perf_counter()

    def body(self, value: list) -> list:
        self.stats.fed_per_iteration.append(len(value))
        out = self.ev.eval(self.spec.body, self.spec.env.bind(self.spec.var, value))
        return _nodes_only(out, "body")

    def start(self) -> list:
        """Initial result: body(seed), or the seed itself when configured to keep it."""
        seed = _nodes_only(self.ev.eval(self.spec.seed, self.spec.env), "seed")
        if self.ev.config.seed_in_result:
            return xdm.ddo(seed)
        return self.body(seed)

    def tick(self):
        self.stats.iterations += 1
        if self.stats.iterations > self.limit:
            raise FixpointDivergence(self.limit, self.stats.algorithm)

    def finish(self, res) -> tuple:
        result = xdm.ddo(res)
        s = self.stats
        s.total_fed = sum(s.fed_per_iteration)
        s.result_size = len(result)
        s.wall_time = time.perf_counter() - self.t0
        return result, s


def run_naive(spec: FixpointSpec) -> tuple:
    """res_0 = body(seed); res_{i+1} = body(res_i) union res_i until no change."""
    r = _Runner(spec, "naive")
    res = set(r.start())
    while True:
        r.tick()
        nxt = res.union(r.body(xdm.ddo(res)))
        if len(nxt) == len(res):  # res is a subset of nxt, so equal sizes means equal sets
            return r.finish(res)
        res = nxt


def run_delta(spec: FixpointSpec) -> tuple:
    """Feed only the nodes discovered in the previous round back into the body."""
    r = _Runner(spec, "delta")
    res = set(r.start())
    delta = xdm.ddo(res)
    while True:
        r.tick()
        delta = [n for n in xdm.ddo(r.body(delta)) if n not in res]
        if not delta:
            return r.finish(res)
        res.update(delta)


def certify(evaluator, var: str, body: Expr, analyzers: str) -> tuple:
    """Run the requested distributivity analyzers; returns (certified, syntactic, algebraic)."""
    from . import distcheck
    from .algebra.pushup import algebraic_check

    syn = alg = None
    if analyzers in ("syntactic", "both"):
        syn = distcheck.dist_safe(var, body, evaluator.functions,
                                  recursive=evaluator.config.recursive_calls)
    if analyzers in ("algebraic", "both"):
        alg = algebraic_check(var, body, evaluator.functions)
    certified = bool((syn is not None and syn.safe) or (alg is not None and alg.safe))
    return certified, syn, alg


def decide(evaluator, var: str, body: Expr, strategy: str, analyzers: str) -> FixpointDecision:
    if strategy == "naive":
        return FixpointDecision("naive", strategy, reason="requested")
    certified, syn, alg = certify(evaluator, var, body, analyzers)
    if strategy == "delta":
        reason = "requested" if certified else "requested; body not certified distributive"
        return FixpointDecision("delta", strategy, certified, syn, alg, reason)
    parts = []
    if syn is not None:
        parts.append("syntactic: " + ("safe" if syn.safe else f"unsafe ({syn.witness_text()})"))
    if alg is not None:
        parts.append("algebraic: " + ("safe" if alg.safe else f"unsafe ({alg.reason})"))
    return FixpointDecision("delta" if certified else "naive", strategy, certified, syn, alg,
                            "; ".join(parts))


def run_auto(spec: FixpointSpec, analyzers: str = "both") -> tuple:
    """Delta when an analyzer certifies the body distributive, Naive otherwise."""
    d = decide(spec.evaluator, spec.var, spec.body, "auto", analyzers)
    result, stats = (run_delta if d.algorithm == "delta" else run_naive)(spec)
    return result, stats, d


def evaluate_fixpoint(evaluator, e: Fixpoint, env) -> list:
    """Evaluator hook: run ``e`` under the configured strategy and log the run."""
    cfg = evaluator.config
    key = (e, cfg.strategy, cfg.check)
    decision = evaluator._decisions.get(key)
    if decision is None:
        decision = decide(evaluator, e.var, e.body, cfg.strategy, cfg.check)
        evaluator._decisions[key] = decision
    spec = FixpointSpec(e.var, e.seed, e.body, env, evaluator)
    result, stats = (run_delta if decision.algorithm == "delta" else run_naive)(spec)
    evaluator.fixpoint_runs.append((e, stats, decision))
    return result


def transitive_closure(step: Expr, context, evaluator, env) -> list:
    """All nodes reachable from ``context`` by one or more applications of ``step``."""
    x = fresh_var(free_vars(step) | set(env.vars))
    fp = Fixpoint(x, ContextItem(), PathExpr(VarRef(x), step))
    return evaluator.eval(fp, env.with_focus(context))
