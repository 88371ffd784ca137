"""Inflationary fixed points over XML node sequences, with distributivity analysis."""

from .errors import FixqError
from .evaluator import EngineConfig, Evaluator, evaluate_query
from .parser import parse_expr, parse_query
from .xdm import NodeStore

__all__ = [
    "EngineConfig",
    "Evaluator",
    "FixqError",
    "NodeStore",
    "evaluate_query",
    "parse_expr",
    "parse_query",
]
