"""Abstract syntax, stream values, parser and printer.

Expressions are immutable dataclasses.  Stream values are a separate,
smaller family (``SVar``, ``SCons``, ``STail``, ``SPointwise``) with a
hash cached at construction time: call traces hash them on every lookup and
some programs build values whose depth grows with the number of calls.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Union

from .errors import (
    AmbiguousSort,
    ArityError,
    DuplicateDefinition,
    OpenCapsule,
    ParseError,
    SortError,
    UnboundIdentifier,
    UnknownFunction,
)

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("<=", "<", "==", "!=", ">=", ">")

STREAM = "stream"
NUM = "num"
BOOL = "bool"


# ---------------------------------------------------------------------------
# Stream values
# ---------------------------------------------------------------------------


class StreamValue:
    """Finite, possibly open, term denoting a stream once paired with an environment."""

    __slots__ = ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return value_eq(self, other)

    def __ne__(self, other):
        return not value_eq(self, other)

    def __str__(self):
        return render_value(self)


@dataclass(frozen=True, eq=False, slots=True)
class SVar(StreamValue):
    name: str
    _hash: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("var", self.name)))


@dataclass(frozen=True, eq=False, slots=True)
class SCons(StreamValue):
    head: Fraction
    tail: StreamValue
    _hash: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("cons", self.head, self.tail._hash)))


@dataclass(frozen=True, eq=False, slots=True)
class STail(StreamValue):
    arg: StreamValue
    _hash: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("tail", self.arg._hash)))


@dataclass(frozen=True, eq=False, slots=True)
class SPointwise(StreamValue):
    op: str
    left: StreamValue
    right: StreamValue
    _hash: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_hash", hash(("pw", self.op, self.left._hash, self.right._hash))
        )


Value = Union[StreamValue, Fraction, bool]


def _children(sv):
    if isinstance(sv, SCons):
        return (sv.tail,)
    if isinstance(sv, STail):
        return (sv.arg,)
    if isinstance(sv, SPointwise):
        return (sv.left, sv.right)
    return ()


def value_eq(a, b) -> bool:
    """Structural equality of stream values, iterative so deep terms are safe."""
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x is y:
            continue
        if type(x) is not type(y) or x._hash != y._hash:
            return False
        if isinstance(x, SVar):
            if x.name != y.name:
                return False
        elif isinstance(x, SCons):
            if x.head != y.head:
                return False
            stack.append((x.tail, y.tail))
        elif isinstance(x, STail):
            stack.append((x.arg, y.arg))
        else:
            if x.op != y.op:
                return False
            stack.append((x.right, y.right))
            stack.append((x.left, y.left))
    return True


def fold_value(sv, on_var, on_cons, on_tail, on_pw):
    """Bottom-up fold over a stream value without recursion.

    ``on_cons(node, tail_result)``, ``on_tail(node, arg_result)`` and
    ``on_pw(node, left_result, right_result)`` receive the original node
    alongside the folded children.
    """
    out = []
    stack = [(sv, False)]
    while stack:
        node, expanded = stack.pop()
        if isinstance(node, SVar):
            out.append(on_var(node))
            continue
        if not expanded:
            stack.append((node, True))
            for child in reversed(_children(node)):
                stack.append((child, False))
            continue
        if isinstance(node, SCons):
            out.append(on_cons(node, out.pop()))
        elif isinstance(node, STail):
            out.append(on_tail(node, out.pop()))
        else:
            right = out.pop()
            left = out.pop()
            out.append(on_pw(node, left, right))
    return out[0]


def value_vars(sv) -> Iterator[str]:
    """Variable occurrences of ``sv`` in left-to-right order (with repeats)."""
    if not isinstance(sv, StreamValue):
        return
    stack = [sv]
    while stack:
        node = stack.pop()
        if isinstance(node, SVar):
            yield node.name
        else:
            stack.extend(reversed(_children(node)))


def rename_value(sv, mapping: Mapping[str, str]):
    if not isinstance(sv, StreamValue):
        return sv
    return fold_value(
        sv,
        lambda v: SVar(mapping.get(v.name, v.name)),
        lambda n, t: SCons(n.head, t),
        lambda n, a: STail(a),
        lambda n, l, r: SPointwise(n.op, l, r),
    )


def env_vars(env: Mapping[str, StreamValue]) -> set:
    """vars(env): every variable bound or occurring in ``env``."""
    names = set(env)
    for sv in env.values():
        names.update(value_vars(sv))
    return names


def free_vars(value, env: Mapping[str, StreamValue] = None) -> set:
    env = env or {}
    names = set(value_vars(value)) if isinstance(value, StreamValue) else set()
    return (names | env_vars(env)) - set(env)


def reachable(value, env: Mapping[str, StreamValue]) -> list:
    """Bound variables reachable from ``value``, in depth-first first-reached order."""
    order = []
    seen = set()
    stack = [value_vars(value)]
    while stack:
        name = next(stack[-1], None)
        if name is None:
            stack.pop()
            continue
        if name in env and name not in seen:
            seen.add(name)
            order.append(name)
            stack.append(value_vars(env[name]))
    return order


# ---------------------------------------------------------------------------
# Expressions and programs
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ()

    def __str__(self):
        return render_expr(self)


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class Cons(Expr):
    head: Expr
    tail: Expr


@dataclass(frozen=True)
class Tail(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pointwise(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class IndexAccess(Expr):
    stream: Expr
    index: Expr


@dataclass(frozen=True)
class NumBinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class NumLit(Expr):
    value: Fraction


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class Compare(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp(Expr):
    op: str  # "not" | "and" | "or"
    operands: tuple


@dataclass(frozen=True)
class StreamLit(Expr):
    """An already evaluated stream value embedded in an expression (after substitution)."""

    value: StreamValue


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    params: tuple
    body: Expr


@dataclass(frozen=True)
class Program:
    decls: tuple = ()

    @property
    def functions(self) -> dict:
        return {d.name: d for d in self.decls}

    def __str__(self):
        return render_program(self)


@dataclass
class Capsule:
    """A value paired with the environment giving meaning to its variables."""

    value: Value
    env: dict = field(default_factory=dict)

    def is_closed(self) -> bool:
        return not free_vars(self.value, self.env)

    def __str__(self):
        return render_capsule(self)


def value_to_expr(value) -> Expr:
    if isinstance(value, bool):
        return BoolLit(value)
    if isinstance(value, Fraction):
        return NumLit(value)
    return StreamLit(value)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {"if", "then", "else", "true", "false", "where"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<pw>\[\s*[-+*/]\s*\])
  | (?P<op><=|>=|==|!=|&&|\|\||[<>!():,^=+\-*/{}])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, kw, pw, op, eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        lexeme = m.group()
        col = pos - line_start + 1
        if kind == "ws":
            newlines = lexeme.count("\n")
            if newlines:
                line += newlines
                line_start = pos + lexeme.rindex("\n") + 1
        elif kind == "ident" and lexeme in KEYWORDS:
            tokens.append(Token("kw", lexeme, line, col))
        elif kind == "pw":
            tokens.append(Token("pw", lexeme.strip("[] \t"), line, col))
        else:
            tokens.append(Token(kind, lexeme, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text, variables=()):
        self.tokens = tokenize(text)
        self.pos = 0
        # Identifiers that denote variables: `x(e)` is indexing for these and a call otherwise.
        self.scope = frozenset(variables)

    @property
    def tok(self):
        return self.tokens[self.pos]

    def at(self, kind, text=None):
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def at_op(self, *texts):
        return self.tok.kind == "op" and self.tok.text in texts

    def advance(self):
        t = self.tok
        self.pos += 1
        return t

    def expect(self, kind, text=None, what=None):
        if not self.at(kind, text):
            wanted = what or (repr(text) if text else kind)
            got = repr(self.tok.text) if self.tok.kind != "eof" else "end of input"
            raise ParseError(f"expected {wanted}, found {got}", self.tok.line, self.tok.column)
        return self.advance()

    # program := decl*
    def program(self):
        decls = []
        while not self.at("eof"):
            decls.append(self.decl())
        return Program(tuple(decls))

    def decl(self):
        name = self.expect("ident", what="function name").text
        self.expect("op", "(")
        params = []
        if not self.at("op", ")"):
            params.append(self.expect("ident", what="parameter name").text)
            while self.at("op", ","):
                self.advance()
                params.append(self.expect("ident", what="parameter name").text)
        self.expect("op", ")")
        self.expect("op", "=")
        outer = self.scope
        self.scope = frozenset(params)
        body = self.expr()
        self.scope = outer
        return FunctionDecl(name, tuple(params), body)

    def expr(self):
        if self.at("kw", "if"):
            self.advance()
            cond = self.expr()
            self.expect("kw", "then")
            then = self.expr()
            self.expect("kw", "else")
            return If(cond, then, self.expr())
        return self.cons()

    def cons(self):
        head = self.pointwise()
        if self.at_op(":"):
            self.advance()
            return Cons(head, self.expr())
        return head

    def pointwise(self):
        left = self.disjunction()
        while self.at("pw"):
            op = self.advance().text
            left = Pointwise(op, left, self.disjunction())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.at_op("||"):
            self.advance()
            left = BoolOp("or", (left, self.conjunction()))
        return left

    def conjunction(self):
        left = self.negation()
        while self.at_op("&&"):
            self.advance()
            left = BoolOp("and", (left, self.negation()))
        return left

    def negation(self):
        if self.at_op("!"):
            self.advance()
            return BoolOp("not", (self.negation(),))
        return self.comparison()

    def comparison(self):
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in CMP_OPS:
            op = self.advance().text
            return Compare(op, left, self.additive())
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at_op("+", "-"):
            op = self.advance().text
            left = NumBinOp(op, left, self.multiplicative())
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            left = NumBinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.at_op("-"):
            self.advance()
            if self.at("num"):
                return self.postfix(NumLit(-Fraction(int(self.advance().text))))
            return NumBinOp("-", NumLit(Fraction(0)), self.unary())
        return self.postfix(self.atom())

    def postfix(self, e):
        while True:
            if self.at_op("^"):
                self.advance()
                e = Tail(e)
            elif self.at_op("("):
                self.advance()
                index = self.expr()
                self.expect("op", ")")
                e = IndexAccess(e, index)
            else:
                return e

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return NumLit(Fraction(int(t.text)))
        if t.kind == "kw" and t.text in ("true", "false"):
            self.advance()
            return BoolLit(t.text == "true")
        if t.kind == "ident":
            self.advance()
            if t.text in self.scope or not self.at_op("("):
                return Var(t.text)
            self.advance()
            args = []
            if not self.at_op(")"):
                args.append(self.expr())
                while self.at_op(","):
                    self.advance()
                    args.append(self.expr())
            self.expect("op", ")")
            return Call(t.text, tuple(args))
        if self.at_op("("):
            self.advance()
            e = self.expr()
            self.expect("op", ")")
            return e
        got = repr(t.text) if t.kind != "eof" else "end of input"
        raise ParseError(f"expected an expression, found {got}", t.line, t.column)


def parse_program(text: str, validate: bool = True) -> Program:
    """Parse a sequence of ``name(params) = body`` declarations.

    With ``validate`` (the default) the result is also checked for duplicate
    names, unknown callees, arity mismatches, unbound identifiers and sorts.
    """
    parser = _Parser(text)
    program = parser.program()
    if validate:
        validate_program(program)
    return program


def parse_expr(text: str, variables=()) -> Expr:
    """Parse one expression.  ``variables`` lists identifiers that are variables,
    so that ``x(e)`` reads as indexing rather than as a call."""
    parser = _Parser(text, variables)
    e = parser.expr()
    parser.expect("eof", what="end of input")
    return e


# ---------------------------------------------------------------------------
# Validation and sorts
# ---------------------------------------------------------------------------


def fixed_sort(e: Expr):
    """Sort determined by the node shape alone; None for variables."""
    if isinstance(e, (If, Cons, Tail, Pointwise, Call, StreamLit)):
        return STREAM
    if isinstance(e, (IndexAccess, NumBinOp, NumLit)):
        return NUM
    if isinstance(e, (BoolLit, Compare, BoolOp)):
        return BOOL
    return None


class _SortVars:
    """Union-find over parameter sort variables, each root optionally carrying a sort."""

    def __init__(self):
        self.parent = {}
        self.sort = {}

    def find(self, key):
        self.parent.setdefault(key, key)
        while self.parent[key] != key:
            self.parent[key] = self.parent[self.parent[key]]
            key = self.parent[key]
        return key

    def assign(self, key, sort):
        root = self.find(key)
        current = self.sort.get(root)
        if current is None:
            self.sort[root] = sort
        elif current != sort:
            raise AmbiguousSort(
                f"parameter {key[1]} of {key[0]} is used both as {current} and as {sort}"
            )

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        sa, sb = self.sort.get(ra), self.sort.get(rb)
        if sa is not None and sb is not None and sa != sb:
            raise AmbiguousSort(
                f"parameter {a[1]} of {a[0]} ({sa}) is passed where {b[1]} of {b[0]} ({sb}) is expected"
            )
        self.parent[ra] = rb
        if sb is None and sa is not None:
            self.sort[rb] = sa

    def lookup(self, key):
        return self.sort.get(self.find(key))


def _check(e, expected, owner, params, functions, sv):
    if isinstance(e, Var):
        if owner is None:
            # top-level expression: variables are environment (stream) variables
            if expected != STREAM:
                raise SortError(f"variable {e.name} is a stream, expected {expected}")
            return
        if e.name not in params:
            raise UnboundIdentifier(f"{e.name} is not a parameter of {owner}")
        sv.assign((owner, e.name), expected)
        return
    actual = fixed_sort(e)
    if actual != expected:
        raise SortError(f"{render_expr(e)} is a {actual} expression, expected {expected}")
    check = lambda sub, sort: _check(sub, sort, owner, params, functions, sv)  # noqa: E731
    if isinstance(e, If):
        check(e.cond, BOOL)
        check(e.then, STREAM)
        check(e.orelse, STREAM)
    elif isinstance(e, Cons):
        check(e.head, NUM)
        check(e.tail, STREAM)
    elif isinstance(e, Tail):
        check(e.arg, STREAM)
    elif isinstance(e, Pointwise):
        check(e.left, STREAM)
        check(e.right, STREAM)
    elif isinstance(e, IndexAccess):
        check(e.stream, STREAM)
        check(e.index, NUM)
    elif isinstance(e, (NumBinOp, Compare)):
        check(e.left, NUM)
        check(e.right, NUM)
    elif isinstance(e, BoolOp):
        for operand in e.operands:
            check(operand, BOOL)
    elif isinstance(e, Call):
        decl = functions.get(e.name)
        if decl is None:
            raise UnknownFunction(f"call to undeclared function {e.name}")
        if len(decl.params) != len(e.args):
            raise ArityError(
                f"{e.name} expects {len(decl.params)} argument(s), got {len(e.args)}"
            )
        for param, arg in zip(decl.params, e.args):
            key = (e.name, param)
            if isinstance(arg, Var) and owner is not None:
                if arg.name not in params:
                    raise UnboundIdentifier(f"{arg.name} is not a parameter of {owner}")
                sv.union((owner, arg.name), key)
                continue
            arg_sort = fixed_sort(arg) or STREAM
            sv.assign(key, arg_sort)
            check(arg, arg_sort)


def validate_program(program: Program) -> dict:
    """Check well-formedness; return the inferred sort of every parameter.

    Parameters never used at a definite sort map to None.
    """
    functions = {}
    for decl in program.decls:
        if decl.name in functions:
            raise DuplicateDefinition(f"function {decl.name} declared twice")
        if len(set(decl.params)) != len(decl.params):
            raise DuplicateDefinition(f"repeated parameter name in {decl.name}")
        functions[decl.name] = decl
    sv = _SortVars()
    for decl in program.decls:
        for p in decl.params:
            sv.find((decl.name, p))
        _check(decl.body, STREAM, decl.name, set(decl.params), functions, sv)
    return {
        (decl.name, p): sv.lookup((decl.name, p)) for decl in program.decls for p in decl.params
    }


def check_expr(e: Expr, program: Program):
    """Sort of a top-level expression whose variables are environment variables."""
    sort = fixed_sort(e) or STREAM
    _check(e, sort, None, frozenset(), program.functions, _SortVars())
    return sort


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_IF, _CONS, _PW, _OR, _AND, _NOT, _CMP, _ADD, _MUL, _UNARY, _POSTFIX, _ATOM = range(12)


def format_number(n: Fraction) -> str:
    return str(n.numerator) if n.denominator == 1 else f"{n.numerator}/{n.denominator}"


def _number_level(n: Fraction):
    if n.denominator != 1:
        return _MUL
    return _UNARY if n < 0 else _ATOM


def _wrap(text, level, required):
    return f"({text})" if level < required else text


class _Elided(Exception):
    pass


def _render_value(sv, limit):
    def go(v, depth):
        if limit is not None and depth > limit:
            return "...", _ATOM
        if isinstance(v, SVar):
            return v.name, _ATOM
        if isinstance(v, SCons):
            head = _wrap(format_number(v.head), _number_level(v.head), _PW)
            tail, lvl = go(v.tail, depth + 1)
            tail = _wrap(tail, lvl, _OR if lvl == _PW else _CONS)
            return f"{head}:{tail}", _CONS
        if isinstance(v, STail):
            arg, lvl = go(v.arg, depth + 1)
            return _wrap(arg, lvl, _POSTFIX) + "^", _POSTFIX
        left, ll = go(v.left, depth + 1)
        right, rl = go(v.right, depth + 1)
        return f"{_wrap(left, ll, _PW)} [{v.op}] {_wrap(right, rl, _OR)}", _PW

    return go(sv, 0)


def render_value(value, limit=None) -> str:
    """Concrete syntax of a value; ``limit`` elides subterms nested deeper than it."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return format_number(value)
    return _render_value(value, limit)[0]


def _render(e):
    if isinstance(e, Var):
        return e.name, _ATOM
    if isinstance(e, NumLit):
        return format_number(e.value), _number_level(e.value)
    if isinstance(e, BoolLit):
        return ("true" if e.value else "false"), _ATOM
    if isinstance(e, StreamLit):
        return _render_value(e.value, None)
    if isinstance(e, If):
        c, _ = _render(e.cond)
        t, _ = _render(e.then)
        f, _ = _render(e.orelse)
        return f"if {c} then {t} else {f}", _IF
    if isinstance(e, Cons):
        h, hl = _render(e.head)
        t, tl = _render(e.tail)
        # pointwise tails are parenthesised for readability, e.g. 0:(x [+] y)
        t = _wrap(t, tl, _OR if tl == _PW else _IF)
        return f"{_wrap(h, hl, _PW)}:{t}", _CONS
    if isinstance(e, Tail):
        a, al = _render(e.arg)
        return _wrap(a, al, _POSTFIX) + "^", _POSTFIX
    if isinstance(e, IndexAccess):
        s, sl = _render(e.stream)
        i, _ = _render(e.index)
        return f"{_wrap(s, sl, _POSTFIX)}({i})", _POSTFIX
    if isinstance(e, Call):
        return f"{e.name}({', '.join(_render(a)[0] for a in e.args)})", _ATOM
    if isinstance(e, Pointwise):
        l, ll = _render(e.left)
        r, rl = _render(e.right)
        return f"{_wrap(l, ll, _PW)} [{e.op}] {_wrap(r, rl, _OR)}", _PW
    if isinstance(e, NumBinOp):
        level = _ADD if e.op in ("+", "-") else _MUL
        l, ll = _render(e.left)
        r, rl = _render(e.right)
        return f"{_wrap(l, ll, level)} {e.op} {_wrap(r, rl, level + 1)}", level
    if isinstance(e, Compare):
        l, ll = _render(e.left)
        r, rl = _render(e.right)
        return f"{_wrap(l, ll, _ADD)} {e.op} {_wrap(r, rl, _ADD)}", _CMP
    if isinstance(e, BoolOp):
        if e.op == "not":
            a, al = _render(e.operands[0])
            return "!" + _wrap(a, al, _NOT), _NOT
        level, sym = (_OR, "||") if e.op == "or" else (_AND, "&&")
        l, ll = _render(e.operands[0])
        r, rl = _render(e.operands[1])
        return f"{_wrap(l, ll, level)} {sym} {_wrap(r, rl, level + 1)}", level
    raise TypeError(f"not an expression: {e!r}")


def render_expr(e: Expr) -> str:
    return _render(e)[0]


def render_decl(d: FunctionDecl) -> str:
    return f"{d.name}({', '.join(d.params)}) = {render_expr(d.body)}"


def render_program(p: Program) -> str:
    return "".join(render_decl(d) + "\n" for d in p.decls)


def render_call(name, args, limit=None) -> str:
    return f"{name}({', '.join(render_value(a, limit) for a in args)})"


def render_capsule(c: Capsule) -> str:
    """``value where { x = sv, ... }`` listing the bindings reachable from the value."""
    text = render_value(c.value)
    names = reachable(c.value, c.env)
    if not names:
        return text
    bindings = ", ".join(f"{x} = {render_value(c.env[x])}" for x in names)
    return f"{text} where {{ {bindings} }}"


# ---------------------------------------------------------------------------
# Capsules: canonical naming, parsing, JSON
# ---------------------------------------------------------------------------


def alpha_canonicalize(c: Capsule) -> Capsule:
    """Rename bound variables to v0, v1, ... in first-reached order; drop unreachable bindings."""
    open_vars = free_vars(c.value, c.env)
    if open_vars:
        raise OpenCapsule(f"capsule has free variables: {', '.join(sorted(open_vars))}")
    names = reachable(c.value, c.env)
    mapping = {x: f"v{i}" for i, x in enumerate(names)}
    env = {mapping[x]: rename_value(c.env[x], mapping) for x in names}
    return Capsule(rename_value(c.value, mapping), env)


def _const_number(e: Expr) -> Fraction:
    if isinstance(e, NumLit):
        return e.value
    if isinstance(e, NumBinOp):
        l, r = _const_number(e.left), _const_number(e.right)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if r == 0:
            raise ParseError("division by zero in a numeric constant")
        return l / r
    raise ParseError(f"{render_expr(e)} is not a numeric constant")


def expr_to_value(e: Expr):
    """Read back a value written in concrete syntax."""
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, (NumLit, NumBinOp)):
        return _const_number(e)
    if isinstance(e, Var):
        return SVar(e.name)
    if isinstance(e, StreamLit):
        return e.value
    if isinstance(e, Cons):
        return SCons(_const_number(e.head), _stream_value(e.tail))
    if isinstance(e, Tail):
        return STail(_stream_value(e.arg))
    if isinstance(e, Pointwise):
        return SPointwise(e.op, _stream_value(e.left), _stream_value(e.right))
    raise ParseError(f"{render_expr(e)} is not a value")


def _stream_value(e):
    v = expr_to_value(e)
    if not isinstance(v, StreamValue):
        raise ParseError(f"{render_expr(e)} is not a stream value")
    return v


def parse_value(text: str):
    return expr_to_value(parse_expr(text))


def parse_capsule(text: str) -> Capsule:
    """Inverse of :func:`render_capsule`."""
    parser = _Parser(text)
    value = expr_to_value(parser.expr())
    env = {}
    if parser.at("kw", "where"):
        parser.advance()
        parser.expect("op", "{")
        while not parser.at_op("}"):
            name = parser.expect("ident", what="variable").text
            parser.expect("op", "=")
            if name in env:
                raise ParseError(f"variable {name} bound twice")
            env[name] = _stream_value(parser.expr())
            if not parser.at_op(","):
                break
            parser.advance()
        parser.expect("op", "}")
    parser.expect("eof", what="end of input")
    return Capsule(value, env)


def capsule_to_json(c: Capsule) -> dict:
    names = reachable(c.value, c.env)
    return {
        "value": render_value(c.value),
        "env": {x: render_value(c.env[x]) for x in names},
    }


def capsule_from_json(data) -> Capsule:
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict) or set(data) != {"value", "env"}:
        raise ParseError('capsule JSON must be an object with keys "value" and "env"')
    env = {name: _stream_value(parse_expr(text)) for name, text in data["env"].items()}
    return Capsule(parse_value(data["value"]), env)
