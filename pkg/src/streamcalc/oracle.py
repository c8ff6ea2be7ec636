"""Reference semantics at finite precision.

Streams are approximated by fixed-length prefixes whose positions are either
a known rational or ``None`` (unknown).  Starting from all-unknown, every
binding is re-evaluated against the current approximation until nothing
changes.  This uses none of the interpreter's machinery and serves as an
independent check of element access.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Mapping, Optional

from .indexing import apply_op, guarded_at
from .syntax import Capsule, SCons, SPointwise, STail, SVar, StreamValue, env_vars

DEFAULT_PRECISION = 50


def sem_eval_prefix(sv: StreamValue, assignment: Mapping[str, list], n: int) -> list:
    """Prefix of length ``n`` of ``sv`` under a prefix assignment of its variables.

    Unknown is strict: an operation with an unknown operand is unknown.
    """
    if isinstance(sv, SVar):
        known = list(assignment[sv.name][:n])
        return known + [None] * (n - len(known))
    if isinstance(sv, SCons):
        return ([sv.head] + sem_eval_prefix(sv.tail, assignment, n - 1))[:n] if n else []
    if isinstance(sv, STail):
        return sem_eval_prefix(sv.arg, assignment, n + 1)[1:]
    left = sem_eval_prefix(sv.left, assignment, n)
    right = sem_eval_prefix(sv.right, assignment, n)
    return [
        None if a is None or b is None else apply_op(sv.op, a, b)
        for a, b in zip(left, right)
    ]


def _tail_count(env) -> int:
    count = 0
    for sv in env.values():
        stack = [sv]
        while stack:
            node = stack.pop()
            if isinstance(node, STail):
                count += 1
                stack.append(node.arg)
            elif isinstance(node, SCons):
                stack.append(node.tail)
            elif isinstance(node, SPointwise):
                stack.extend((node.left, node.right))
    return count


def kleene_iterates(env, boundary=None, width=DEFAULT_PRECISION):
    """Successive approximations of the binding equations, starting from all-unknown.

    Yields the assignment after every round (the first one is the starting
    point); stops once a round changes nothing.  ``boundary`` gives known
    prefixes for the free variables of ``env``.
    """
    boundary = dict(boundary or {})
    missing = env_vars(env) - set(env) - set(boundary)
    if missing:
        raise ValueError(f"no boundary prefix for free variable(s) {', '.join(sorted(missing))}")
    current = {x: [None] * width for x in env}
    for x, known in boundary.items():
        current[x] = (list(known) + [None] * width)[:width]
    yield {x: list(p) for x, p in current.items()}
    # every productive round fixes at least one of the width * |env| positions
    for _ in range(width * len(env) + 1):
        snapshot = dict(current)
        changed = False
        for x, sv in env.items():
            new = sem_eval_prefix(sv, snapshot, width)
            old = current[x]
            for i, (a, b) in enumerate(zip(old, new)):
                if a is not None and b is not None and a != b:
                    raise AssertionError(f"refinement of {x} changed position {i}: {a} -> {b}")
            merged = [a if a is not None else b for a, b in zip(old, new)]
            if merged != old:
                current[x] = merged
                changed = True
        if not changed:
            return
        yield {x: list(p) for x, p in current.items()}


def kleene_prefix(
    env: Mapping[str, StreamValue],
    boundary: Optional[Mapping[str, list]] = None,
    n: int = DEFAULT_PRECISION,
    lookahead: Optional[int] = None,
) -> dict:
    """Least fixed point of the binding equations, as prefixes of length ``n``.

    Every tail shifts a stream one position left, so the last positions of
    an approximation can only be filled from positions past the cutoff.  The
    iteration therefore runs at ``n + lookahead`` positions (by default one
    extra per tail occurring in ``env``) and truncates the result to ``n``.
    """
    width = n + (_tail_count(env) if lookahead is None else lookahead)
    last = None
    for last in kleene_iterates(env, boundary, width):
        pass
    return {x: p[:n] for x, p in last.items() if x in env or x in (boundary or {})}


def unknown_count(assignment: Mapping[str, list]) -> int:
    return sum(1 for p in assignment.values() for v in p if v is None)


def oracle_prefix(capsule: Capsule, n: int = DEFAULT_PRECISION) -> list:
    """Prefix of a closed capsule's stream computed purely by fixed-point iteration."""
    extra = _tail_count({"": capsule.value})
    solution = kleene_prefix(capsule.env, {}, n + extra)
    return sem_eval_prefix(capsule.value, solution, n + extra)[:n]


def prefix_equiv(c1: Capsule, c2: Capsule, n: int = DEFAULT_PRECISION) -> bool:
    """Whether two closed, well-defined capsules agree on their first ``n`` elements."""
    return all(
        guarded_at(c1.env, c1.value, i) == guarded_at(c2.env, c2.value, i) for i in range(n)
    )


def _parse_name(name: str):
    if "(" in name and name.endswith(")"):
        base, arg = name[:-1].split("(", 1)
        return base, int(arg)
    return name, None


def closed_form(name: str, i: int, k: Optional[int] = None) -> Fraction:
    """Element ``i`` of a named stream, by direct arithmetic.

    ``name`` is one of nat, fib, fact, pow, nat_to_pow, sum_nat, aggr3_nat,
    expn; the parameter of pow/nat_to_pow/expn is passed as ``k`` or inline,
    e.g. ``closed_form("pow(3)", 4)``.
    """
    if i < 0:
        raise ValueError("index must be non-negative")
    base, inline = _parse_name(name)
    k = inline if k is None else k
    if base == "nat":
        return Fraction(i)
    if base == "fib":
        a, b = 0, 1
        for _ in range(i):
            a, b = b, a + b
        return Fraction(a)
    if base == "fact":
        return Fraction(factorial(i))
    if base == "pow":
        return Fraction(k) ** i
    if base == "nat_to_pow":
        return Fraction(i) ** k
    if base == "sum_nat":
        return Fraction(i * (i + 1), 2)
    if base == "aggr3_nat":
        return Fraction(3 * i + 3)
    if base == "expn":
        return sum((Fraction(k) ** j / factorial(j) for j in range(i + 1)), Fraction(0))
    raise ValueError(f"unknown stream {name!r}")
