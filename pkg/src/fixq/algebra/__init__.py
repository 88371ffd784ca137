"""Relational plans for query bodies: compilation, interpretation, push-up check."""

from .compiler import compile_body, compile_query
from .interp import decode, encode, eval_plan
from .plan import CompiledPlan, PlanNode, PlanTemplate, Table, plan_to_text
from .pushup import PushUpResult, algebraic_check, push_up_check, simplify_for_check

__all__ = [
    "CompiledPlan",
    "PlanNode",
    "PlanTemplate",
    "PushUpResult",
    "Table",
    "algebraic_check",
    "compile_body",
    "compile_query",
    "decode",
    "encode",
    "eval_plan",
    "plan_to_text",
    "push_up_check",
    "simplify_for_check",
]
