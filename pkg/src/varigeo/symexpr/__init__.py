"""Exact symbolic scalar expressions: canonical form, parsing, printing, zero testing."""

from varigeo.symexpr.expr import (
    FUNCTIONS,
    ONE,
    ZERO,
    Expr,
    apply,
    const,
    diff,
    evaluate,
    side_conditions,
    simplify,
    sym,
    ufun,
)
from varigeo.symexpr.parser import FormHooks, Scope, parse_expr, tokenize
from varigeo.symexpr.zerotest import (
    Verdict,
    ZeroTestConfig,
    current_config,
    is_nonzero,
    is_zero,
    zero_test_config,
)

__all__ = [
    "FUNCTIONS", "ONE", "ZERO", "Expr", "apply", "const", "diff", "evaluate",
    "side_conditions", "simplify", "sym", "ufun", "FormHooks", "Scope", "parse_expr",
    "tokenize", "Verdict", "ZeroTestConfig", "current_config", "is_nonzero", "is_zero",
    "zero_test_config",
]
