"""Interpreter and analyser for a calculus of numeric streams with regular corecursion."""

from .errors import *  # noqa: F401,F403
from .indexing import at, guarded_at, prefix
from .semantics import (
    DEFAULT_FUEL,
    CallTrace,
    EvaluatedCall,
    Fuel,
    Interpreter,
    env_join,
    evaluate,
    invoke,
    lookup_call,
    substitute,
    value_equiv,
)
from .syntax import (
    Capsule,
    Program,
    alpha_canonicalize,
    capsule_from_json,
    capsule_to_json,
    parse_capsule,
    parse_expr,
    parse_program,
    parse_value,
    render_capsule,
    render_expr,
    render_value,
)
from .wellformedness import check_wf, find_wf_violation, wf_visit

__version__ = "0.1.0"
