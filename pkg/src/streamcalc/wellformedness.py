"""Well-definedness check for environments, run whenever a call returns.

Every variable on the current path carries a signed counter: the number
of constructors minus the number of tails traversed since the variable was
entered.  Re-reaching a variable is fine only if its counter is positive;
free variables are assumed well-defined.

Counters are not stored per variable.  A path keeps one running balance and
records, for each entered variable, the balance at entry; the counter of
``x`` is ``balance - entered[x]``, so the increment/decrement-all steps are
O(1).
"""

from __future__ import annotations

from typing import Mapping, Optional

from .syntax import SCons, SPointwise, STail, SVar, StreamValue


def wf_visit(sv: StreamValue, counters: Mapping[str, int], env: Mapping[str, StreamValue]) -> bool:
    """Decide ``env |- sv ok_counters`` for an explicit counter map."""
    return _find_violation(sv, dict(counters), env) is None


def _find_violation(sv, counters, env):
    # Stack items: (value, balance, entered, path).  ``entered`` maps each
    # variable on the path to the balance at its entry; shared between
    # siblings and copied only when a new variable is entered.
    entered = {x: -k for x, k in counters.items()}
    stack = [(sv, 0, entered, ())]
    while stack:
        node, balance, entered, path = stack.pop()
        while True:
            if isinstance(node, SCons):
                node, balance = node.tail, balance + 1
            elif isinstance(node, STail):
                node, balance = node.arg, balance - 1
            elif isinstance(node, SPointwise):
                stack.append((node.right, balance, entered, path))
                node = node.left
            else:
                break
        name = node.name
        if name in entered:
            if balance - entered[name] <= 0:
                return path + (name,)
        elif name in env:
            inner = dict(entered)
            inner[name] = balance
            stack.append((env[name], balance, inner, path + (name,)))
        # otherwise free: accepted
    return None


def find_wf_violation(env: Mapping[str, StreamValue], x: str, sv: StreamValue) -> Optional[tuple]:
    """Return None when ``env[x -> sv]`` is well-defined from ``x``, else the offending path.

    The path lists the variables entered from ``x`` up to the re-reached
    variable whose counter was not positive.
    """
    extended = dict(env)
    extended[x] = sv
    return _find_violation(SVar(x), {}, extended)


def check_wf(env: Mapping[str, StreamValue], x: str, sv: StreamValue) -> bool:
    return find_wf_violation(env, x, sv) is None


def is_well_defined(value, env: Mapping[str, StreamValue]) -> bool:
    """``env |- value ok_{}``: the result ``(value, env)`` is well-defined."""
    if not isinstance(value, StreamValue):
        return True
    return _find_violation(value, {}, env) is None


def capsule_violation(value, env) -> Optional[tuple]:
    if not isinstance(value, StreamValue):
        return None
    return _find_violation(value, {}, env)
