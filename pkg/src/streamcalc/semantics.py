"""Big-step evaluation with regular corecursion.

Evaluating an expression yields a value together with an environment of
possibly cyclic stream bindings.  A call met for the first time gets a fresh
variable recorded in the call trace before its body is evaluated; meeting the
same call again (up to value equivalence) returns that variable instead of
recursing.  When the body returns, the new binding is admitted only if the
environment stays well-defined.

The environment is threaded left to right through a single dict that only
grows, except that element access ``s(n)`` discards whatever evaluating ``s``
added.  The call trace follows the nesting of invocations.
"""

from __future__ import annotations

import itertools
import sys
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .errors import (
    ArityError,
    DivisionByZero,
    FuelExhausted,
    IncompatibleEnvironments,
    NonNaturalIndex,
    NotWellDefined,
    SortError,
    UnknownFunction,
)
from .indexing import apply_op, guarded_at
from .syntax import (
    BoolLit,
    BoolOp,
    Call,
    Capsule,
    Compare,
    Cons,
    Expr,
    If,
    IndexAccess,
    NumBinOp,
    NumLit,
    Pointwise,
    Program,
    SCons,
    SPointwise,
    STail,
    SVar,
    StreamLit,
    StreamValue,
    Tail,
    Var,
    env_vars,
    fold_value,
    render_call,
    value_to_expr,
    value_vars,
)
from .wellformedness import find_wf_violation

DEFAULT_FUEL = 10_000


@dataclass(frozen=True)
class EvaluatedCall:
    name: str
    args: tuple = ()

    def __str__(self):
        return render_call(self.name, self.args, limit=12)


class Fuel:
    """Budget of first-time call expansions."""

    def __init__(self, remaining: int = DEFAULT_FUEL):
        if remaining < 0:
            raise ValueError("fuel must be non-negative")
        self.initial = remaining
        self.remaining = remaining

    def consume(self, call):
        if self.remaining == 0:
            raise FuelExhausted(call, self.initial)
        self.remaining -= 1


# ---------------------------------------------------------------------------
# Value equivalence and call traces
# ---------------------------------------------------------------------------


def _resolve_cons(name, env):
    """Follow variable aliases from ``name`` to a cons binding; None if there is none."""
    seen = set()
    while name in env and name not in seen:
        seen.add(name)
        bound = env[name]
        if isinstance(bound, SCons):
            return bound
        if not isinstance(bound, SVar):
            return None
        name = bound.name
    return None


def normalize(sv: StreamValue, env: Mapping[str, StreamValue]) -> StreamValue:
    """Representative used to compare stream values.

    Terms are compared syntactically, except that a tail applied to a
    variable bound (possibly through aliases) to a constructor is replaced
    by that constructor's tail.  Nothing else is unfolded, so ``1:x`` and
    ``1:y`` stay distinct even when both denote the same stream, and a tail
    of a literal constructor such as ``(1:x)^`` is kept as written.
    """
    return _normalize(sv, env, frozenset())


def _normalize(sv, env, visiting):
    def on_tail(node, arg):
        if isinstance(arg, SVar) and arg.name not in visiting:
            cons = _resolve_cons(arg.name, env)
            if cons is not None:
                return _normalize(cons.tail, env, visiting | {arg.name})
        return node if arg is node.arg else STail(arg)

    return fold_value(
        sv,
        lambda v: v,
        lambda n, t: n if t is n.tail else SCons(n.head, t),
        on_tail,
        lambda n, l, r: n if (l is n.left and r is n.right) else SPointwise(n.op, l, r),
    )


def value_equiv(v1, v2, env: Mapping[str, StreamValue]) -> bool:
    """Equivalence used for cycle detection.

    Numbers and booleans: identity (a boolean never equals a number).
    Stream values: equality of their :func:`normalize` representatives.
    """
    if isinstance(v1, StreamValue) or isinstance(v2, StreamValue):
        if not (isinstance(v1, StreamValue) and isinstance(v2, StreamValue)):
            return False
        return normalize(v1, env) == normalize(v2, env)
    return type(v1) is type(v2) and v1 == v2


def _tagged(value, nf):
    if isinstance(value, bool):
        return ("bool", value)
    if isinstance(value, Fraction):
        return ("num", value)
    return ("stream", nf(value))


class CallTrace:
    """Map from evaluated calls to the variables standing for their results.

    Entries are keyed by the arguments' equivalence representatives.  The
    representative of an entry cannot go stale during the entry's lifetime:
    its arguments only mention variables that were already bound when it was
    added, or variables of calls still being evaluated around it, which get
    bound only after the entry has been removed.
    """

    def __init__(self, entries: Optional[Mapping[EvaluatedCall, str]] = None, env=None):
        self._entries = {}
        for call, var in (entries or {}).items():
            self.push(call, var, env or {})

    @staticmethod
    def key(call: EvaluatedCall, env, nf=None):
        nf = nf or (lambda v: normalize(v, env))
        return (call.name, tuple(_tagged(a, nf) for a in call.args))

    def push(self, call, var, env, key=None):
        key = key if key is not None else self.key(call, env)
        self._entries[key] = (call, var)
        return key

    def pop(self, key):
        del self._entries[key]

    def get(self, key):
        hit = self._entries.get(key)
        return hit[1] if hit is not None else None

    def lookup(self, call: EvaluatedCall, env) -> Optional[str]:
        return self.get(self.key(call, env))

    def scan(self, call: EvaluatedCall, env) -> Optional[str]:
        """Linear-scan lookup straight from :func:`value_equiv` (debug cross-check)."""
        for other, var in self._entries.values():
            if other.name == call.name and len(other.args) == len(call.args) and all(
                value_equiv(a, b, env) for a, b in zip(call.args, other.args)
            ):
                return var
        return None

    def calls(self) -> dict:
        return {call: var for call, var in self._entries.values()}

    def __len__(self):
        return len(self._entries)


def lookup_call(trace, call: EvaluatedCall, env: Mapping[str, StreamValue]) -> Optional[str]:
    """The variable of a call in ``trace`` equivalent to ``call`` in ``env``, if any."""
    if not isinstance(trace, CallTrace):
        trace = CallTrace(trace, env)
    return trace.lookup(call, env)


def env_join(env1: Mapping[str, StreamValue], env2: Mapping[str, StreamValue]) -> dict:
    """Union of two environments that agree on their shared variables."""
    joined = dict(env1)
    for name, sv in env2.items():
        if name in joined and joined[name] != sv:
            raise IncompatibleEnvironments(f"conflicting bindings for {name}")
        joined[name] = sv
    return joined


def substitute(body: Expr, params, vals) -> Expr:
    """Replace parameters by (embedded) values, all at once."""
    if len(params) != len(vals):
        raise ArityError(f"{len(params)} parameter(s) but {len(vals)} value(s)")
    mapping = {p: value_to_expr(v) for p, v in zip(params, vals)}
    if not mapping:
        return body
    return _subst(body, mapping)


def _subst(e, m):
    if isinstance(e, Var):
        return m.get(e.name, e)
    if isinstance(e, (NumLit, BoolLit, StreamLit)):
        return e
    if isinstance(e, If):
        return If(_subst(e.cond, m), _subst(e.then, m), _subst(e.orelse, m))
    if isinstance(e, Cons):
        return Cons(_subst(e.head, m), _subst(e.tail, m))
    if isinstance(e, Tail):
        return Tail(_subst(e.arg, m))
    if isinstance(e, Pointwise):
        return Pointwise(e.op, _subst(e.left, m), _subst(e.right, m))
    if isinstance(e, Call):
        return Call(e.name, tuple(_subst(a, m) for a in e.args))
    if isinstance(e, IndexAccess):
        return IndexAccess(_subst(e.stream, m), _subst(e.index, m))
    if isinstance(e, NumBinOp):
        return NumBinOp(e.op, _subst(e.left, m), _subst(e.right, m))
    if isinstance(e, Compare):
        return Compare(e.op, _subst(e.left, m), _subst(e.right, m))
    if isinstance(e, BoolOp):
        return BoolOp(e.op, tuple(_subst(a, m) for a in e.operands))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_COMPARE = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def _expect_num(v, what):
    if not isinstance(v, Fraction):
        raise SortError(f"{what} must be a number")
    return v


def _expect_bool(v, what):
    if not isinstance(v, bool):
        raise SortError(f"{what} must be a boolean")
    return v


def _expect_stream(v, what):
    if not isinstance(v, StreamValue):
        raise SortError(f"{what} must be a stream")
    return v


class _Run:
    """State of one top-level evaluation: environment, trace, fuel, fresh names."""

    def __init__(self, functions, env, trace, fuel, debug):
        self.functions = functions
        self.env = dict(env)
        self.fuel = fuel
        self.debug = debug
        self.trace = CallTrace(trace, self.env) if not isinstance(trace, CallTrace) else trace
        self.counter = itertools.count()
        self.taken = env_vars(self.env) | {v for v in self.trace.calls().values()}
        for call in self.trace.calls():
            for a in call.args:
                self.taken.update(value_vars(a))
        self.nf_memo = {}

    def fresh(self):
        while True:
            name = f"x{next(self.counter)}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def nf(self, sv):
        hit = self.nf_memo.get(sv)
        if hit is None:
            hit = self._normalize_memo(sv)
        return hit

    def _normalize_memo(self, sv):
        # like normalize(), but reusing representatives of shared subterms,
        # which keeps growing argument chains (first2-style) linear overall
        memo, env = self.nf_memo, self.env
        out = []
        stack = [(sv, False)]
        while stack:
            node, expanded = stack.pop()
            hit = memo.get(node) if not expanded else None
            if hit is not None:
                out.append(hit)
                continue
            if isinstance(node, SVar):
                res = node
            elif not expanded:
                stack.append((node, True))
                if isinstance(node, SCons):
                    stack.append((node.tail, False))
                elif isinstance(node, STail):
                    stack.append((node.arg, False))
                else:
                    stack.append((node.right, False))
                    stack.append((node.left, False))
                continue
            elif isinstance(node, SCons):
                t = out.pop()
                res = node if t is node.tail else SCons(node.head, t)
            elif isinstance(node, STail):
                a = out.pop()
                res = node if a is node.arg else STail(a)
                if isinstance(a, SVar) and _resolve_cons(a.name, env) is not None:
                    res = normalize(res, env)
            else:
                r = out.pop()
                l = out.pop()
                res = node if (l is node.left and r is node.right) else SPointwise(node.op, l, r)
            memo[node] = res
            out.append(res)
        return out[0]

    def bind(self, name, sv):
        self.env[name] = sv
        self.nf_memo.clear()

    # -- expressions -------------------------------------------------------

    def eval(self, e):
        if isinstance(e, NumLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, StreamLit):
            return e.value
        if isinstance(e, Var):
            return SVar(e.name)
        if isinstance(e, Cons):
            head = _expect_num(self.eval(e.head), "head of a constructor")
            return SCons(head, _expect_stream(self.eval(e.tail), "tail of a constructor"))
        if isinstance(e, Call):
            args = tuple(self.eval(a) for a in e.args)
            return self.invoke(EvaluatedCall(e.name, args))
        if isinstance(e, Pointwise):
            left = _expect_stream(self.eval(e.left), f"operand of [{e.op}]")
            return SPointwise(e.op, left, _expect_stream(self.eval(e.right), f"operand of [{e.op}]"))
        if isinstance(e, Tail):
            return STail(_expect_stream(self.eval(e.arg), "operand of ^"))
        if isinstance(e, If):
            cond = _expect_bool(self.eval(e.cond), "condition")
            return self.eval(e.then if cond else e.orelse)
        if isinstance(e, IndexAccess):
            return self.index(e)
        if isinstance(e, NumBinOp):
            left = _expect_num(self.eval(e.left), f"operand of {e.op}")
            right = _expect_num(self.eval(e.right), f"operand of {e.op}")
            return apply_op(e.op, left, right)
        if isinstance(e, Compare):
            left = _expect_num(self.eval(e.left), f"operand of {e.op}")
            right = _expect_num(self.eval(e.right), f"operand of {e.op}")
            return _COMPARE[e.op](left, right)
        if isinstance(e, BoolOp):
            if e.op == "not":
                return not _expect_bool(self.eval(e.operands[0]), "operand of !")
            left = _expect_bool(self.eval(e.operands[0]), f"operand of {e.op}")
            if e.op == "and" and not left:
                return False
            if e.op == "or" and left:
                return True
            return _expect_bool(self.eval(e.operands[1]), f"operand of {e.op}")
        raise TypeError(f"not an expression: {e!r}")

    def index(self, e):
        mark = len(self.env)
        sv = _expect_stream(self.eval(e.stream), "indexed expression")
        i = _expect_num(self.eval(e.index), "index")
        if i.denominator != 1 or i < 0:
            raise NonNaturalIndex(f"index {i} is not a natural number")
        n = guarded_at(self.env, sv, int(i))
        if len(self.env) > mark:
            # element access returns the environment it started from
            for name in list(self.env)[mark:]:
                del self.env[name]
            self.nf_memo.clear()
        return n

    def invoke(self, call):
        decl = self.functions.get(call.name)
        if decl is None:
            raise UnknownFunction(f"call to undeclared function {call.name}")
        if len(decl.params) != len(call.args):
            raise ArityError(f"{call.name} expects {len(decl.params)} argument(s), got {len(call.args)}")
        key = CallTrace.key(call, self.env, self.nf)
        var = self.trace.get(key)
        if self.debug:
            assert var == self.trace.scan(call, self.env), f"trace lookup mismatch for {call}"
        if var is not None:
            return SVar(var)
        self.fuel.consume(call)
        var = self.fresh()
        body = substitute(decl.body, decl.params, call.args)
        self.trace.push(call, var, self.env, key)
        try:
            sv = self.eval(body)
        finally:
            self.trace.pop(key)
        _expect_stream(sv, f"result of {call.name}")
        witness = find_wf_violation(self.env, var, sv)
        if witness is not None:
            raise NotWellDefined(var, sv, witness)
        self.bind(var, sv)
        return SVar(var)


def _as_fuel(fuel):
    if isinstance(fuel, Fuel):
        return fuel
    return Fuel(DEFAULT_FUEL if fuel is None else fuel)


_STACK_BYTES = 512 * 1024 * 1024
_RECURSION_LIMIT = 1_000_000


def run_deep(fn, *args, **kwargs):
    """Call ``fn`` on a thread with a large stack.

    Evaluation recursion follows the nesting of calls, which fuel bounds but
    which easily exceeds the default interpreter stack.
    """
    if sys.getrecursionlimit() < _RECURSION_LIMIT:
        sys.setrecursionlimit(_RECURSION_LIMIT)
    outcome = {}

    def target():
        try:
            outcome["value"] = fn(*args, **kwargs)
        except BaseException as exc:  # re-raised in the caller's thread
            outcome["error"] = exc

    with _stack_lock:
        previous = threading.stack_size(_STACK_BYTES)
        try:
            worker = threading.Thread(target=target, name="streamcalc-eval")
            worker.start()
        finally:
            threading.stack_size(previous)
    worker.join()
    if "error" in outcome:
        raise outcome["error"]
    return outcome["value"]


_stack_lock = threading.Lock()


class Interpreter:
    """Evaluates expressions against a fixed program."""

    def __init__(self, program: Program, fuel: int = DEFAULT_FUEL, debug: bool = False):
        self.program = program
        self.functions = program.functions
        self.fuel = fuel
        self.debug = debug

    def _run(self, env, trace, fuel):
        return _Run(self.functions, env or {}, trace, _as_fuel(self.fuel if fuel is None else fuel), self.debug)

    def evaluate(self, expr: Expr, env=None, trace=None, fuel=None) -> Capsule:
        run = self._run(env, trace, fuel)
        value = run_deep(run.eval, expr)
        return Capsule(value, run.env)

    def invoke(self, call: EvaluatedCall, env=None, trace=None, fuel=None) -> Capsule:
        run = self._run(env, trace, fuel)
        value = run_deep(run.invoke, call)
        return Capsule(value, run.env)


def evaluate(program: Program, expr: Expr, env=None, trace=None, fuel=DEFAULT_FUEL, debug=False) -> Capsule:
    return Interpreter(program, fuel, debug).evaluate(expr, env, trace)


def invoke(program: Program, call: EvaluatedCall, env=None, trace=None, fuel=DEFAULT_FUEL, debug=False) -> Capsule:
    return Interpreter(program, fuel, debug).invoke(call, env, trace)
