"""Element access on stream values.

``at`` follows the access rules directly; ``guarded_at`` additionally
tracks which (variable, index) accesses are pending on the current path and
raises :class:`Divergence` as soon as a variable is re-entered at an index
greater than or equal to one still pending.  Such a re-entry repeats forever
(shifting every index along the path by the same amount gives the same
path again), and every non-terminating access eventually produces one.

Both are iterative, and results of completed variable accesses are reused
within a single query, so deep indices on non-regular streams stay cheap.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Optional

from .errors import DivisionByZero, Divergence, StepBudgetExceeded, UndefinedVariable
from .syntax import SCons, SPointwise, STail, SVar, StreamValue


def apply_op(op: str, a: Fraction, b: Fraction) -> Fraction:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise DivisionByZero(f"division of {a} by zero")
    return a / b


_STORE = object()
_COMBINE = object()


def _access(env, sv, index, guarded, budget, observe=None, memoize=True, combine=apply_op):
    values = []
    memo = {}
    pending = {}  # var -> stack of pending indices, strictly decreasing
    tasks = [(sv, index)]
    steps = 0
    while tasks:
        task = tasks.pop()
        node = task[0]
        if node is _STORE:
            _, name, i = task
            pending[name].pop()
            memo[name, i] = values[-1]
            continue
        if node is _COMBINE:
            right = values.pop()
            left = values.pop()
            values.append(combine(task[1], left, right))
            continue
        i = task[1]
        steps += 1
        if budget is not None and steps > budget:
            raise StepBudgetExceeded(budget)
        if isinstance(node, SCons):
            if i == 0:
                values.append(node.head)
            else:
                tasks.append((node.tail, i - 1))
        elif isinstance(node, STail):
            tasks.append((node.arg, i + 1))
        elif isinstance(node, SPointwise):
            tasks.append((_COMBINE, node.op))
            tasks.append((node.right, i))
            tasks.append((node.left, i))
        else:
            name = node.name
            if observe is not None:
                observe(name, i)
            stack = pending.setdefault(name, [])
            if guarded and stack and stack[-1] <= i:
                raise Divergence(name, stack[-1], i)
            hit = memo.get((name, i)) if memoize else None
            if hit is not None:
                values.append(hit)
                continue
            if name not in env:
                raise UndefinedVariable(name, i)
            stack.append(i)
            tasks.append((_STORE, name, i))
            tasks.append((env[name], i))
    return values[0]


def at(env: Mapping[str, StreamValue], sv: StreamValue, index: int,
       budget: Optional[int] = None, combine=apply_op) -> Fraction:
    """The ``index``-th element of ``sv`` in ``env``.

    Terminates whenever the capsule passed the well-definedness check.  On
    other capsules it may run forever unless ``budget`` bounds the number of
    steps (:class:`StepBudgetExceeded`).

    ``combine(op, a, b)`` computes pointwise operations.  Replacing it does
    not change which accesses are made, so a cheap one (say, arithmetic
    modulo a prime) can probe termination where exact values would grow
    without bound, as in ``x = 2:(x [*] x)``.
    """
    return _access(env, sv, index, guarded=False, budget=budget, combine=combine)


def guarded_at(env: Mapping[str, StreamValue], sv: StreamValue, index: int,
               budget: Optional[int] = None, combine=apply_op) -> Fraction:
    """Like :func:`at`, but raises :class:`Divergence` instead of looping."""
    return _access(env, sv, index, guarded=True, budget=budget, combine=combine)


def prefix(env: Mapping[str, StreamValue], sv: StreamValue, n: int) -> list:
    return [guarded_at(env, sv, i) for i in range(n)]


def access_path(env, sv, index, budget=10_000) -> list:
    """(variable, index) pairs entered while resolving ``sv`` at ``index``, in order.

    Diagnostic helper: runs without reuse of earlier results, so the list is
    the full traversal, which can be exponential in ``index``.  Stops silently
    at a divergence; exceeding ``budget`` raises :class:`StepBudgetExceeded`.
    """
    seen = []
    try:
        _access(
            env, sv, index, guarded=True, budget=budget,
            observe=lambda x, i: seen.append((x, i)), memoize=False,
        )
    except Divergence:
        pass
    return seen
