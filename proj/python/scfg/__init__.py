"""Probabilistic Earley parsing for stochastic context-free grammars."""

from ._core import (
    EstimationError,
    Grammar,
    GrammarError,
    ParseError,
    ParseResult,
    Parser,
    PartialParse,
    em_step,
    tokenize,
    train,
)

__all__ = [
    "EstimationError",
    "Grammar",
    "GrammarError",
    "ParseError",
    "ParseResult",
    "Parser",
    "PartialParse",
    "em_step",
    "tokenize",
    "train",
]
