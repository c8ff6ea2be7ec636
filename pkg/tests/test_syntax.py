from fractions import Fraction

import pytest
from hypothesis import given, settings

from streamcalc import (
    Capsule,
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
from streamcalc.errors import (
    AmbiguousSort,
    ArityError,
    DuplicateDefinition,
    OpenCapsule,
    ParseError,
    SortError,
    UnboundIdentifier,
    UnknownFunction,
)
from streamcalc.syntax import (
    Call,
    Cons,
    IndexAccess,
    Pointwise,
    SCons,
    SPointwise,
    STail,
    SVar,
    Tail,
    rename_value,
    render_program,
    validate_program,
    value_eq,
)

from .strategies import closed_envs


class TestParsing:
    def test_cons_is_right_associative(self):
        e = parse_expr("1:2:s", variables=["s"])
        assert isinstance(e, Cons) and isinstance(e.tail, Cons)

    def test_pointwise_binds_tighter_than_cons(self):
        e = parse_expr("0:(nat()[+]repeat(1))")
        assert isinstance(e.tail, Pointwise) and e.tail.op == "+"
        e = parse_expr("0:nat()[+]repeat(1)")
        assert isinstance(e, Cons) and isinstance(e.tail, Pointwise)

    def test_postfix_tail_and_index(self):
        e = parse_expr("s^(3)", variables=["s"])
        assert isinstance(e, IndexAccess) and isinstance(e.stream, Tail)

    def test_call_versus_indexing(self):
        assert isinstance(parse_expr("s(0)", variables=["s"]), IndexAccess)
        assert isinstance(parse_expr("s(0)"), Call)

    def test_comments_and_layout(self):
        p = parse_program("// header\nrepeat(n) =\n  n:repeat(n) // tail\n")
        assert list(p.functions) == ["repeat"]

    @pytest.mark.parametrize("text", ["f() = ", "f( = 1", "f() = 1 +", "f() = [+] 1", "f() = 1 $ 2"])
    def test_parse_errors_carry_position(self, text):
        with pytest.raises(ParseError) as info:
            parse_program(text)
        assert info.value.line == 1

    def test_negative_literal(self):
        assert render_expr(parse_expr("-2:s", variables=["s"])) == "-2:s"


class TestValidation:
    def test_unknown_function(self):
        with pytest.raises(UnknownFunction):
            parse_program("f() = g()")

    def test_arity(self):
        with pytest.raises(ArityError):
            parse_program("f(x) = x:f()")

    def test_duplicate(self):
        with pytest.raises(DuplicateDefinition):
            parse_program("f() = 1:f()\nf() = 2:f()")

    def test_unbound(self):
        with pytest.raises(UnboundIdentifier):
            parse_program("f() = y:f()")

    def test_sort_mismatch(self):
        with pytest.raises(SortError):
            parse_program("f() = true:f()")

    def test_parameter_used_at_two_sorts(self):
        with pytest.raises(AmbiguousSort):
            parse_program("f(s) = s:s^")

    def test_unconstrained_parameter_left_open(self):
        p = parse_program("f(x) = g(x)\ng(y) = f(y)")
        assert validate_program(p) == {("f", "x"): None, ("g", "y"): None}

    def test_sorts_propagate_through_calls(self, corpus):
        # aggr's s is only ever passed on or combined pointwise
        assert corpus.functions["aggr"].params == ("n", "s")


class TestRendering:
    def test_pointwise_tail_parenthesized(self):
        v = SCons(Fraction(0), SPointwise("+", SVar("v0"), SVar("v1")))
        assert render_value(v) == "0:(v0 [+] v1)"

    def test_fractions(self):
        assert render_value(SCons(Fraction(-3, 4), SVar("x"))) == "-3/4:x"

    def test_program_roundtrip(self, corpus):
        again = parse_program(render_program(corpus))
        assert render_program(again) == render_program(corpus)

    def test_capsule_text_roundtrip(self):
        c = parse_capsule("x where { x = 0:(x [+] y), y = 1:y }")
        assert render_capsule(alpha_canonicalize(c)) == "v0 where { v0 = 0:(v0 [+] v1), v1 = 1:v1 }"

    def test_json_roundtrip(self):
        c = parse_capsule("x^ where { x = 1/2:x }")
        back = capsule_from_json(capsule_to_json(c))
        assert value_eq(back.value, c.value) and back.env.keys() == c.env.keys()

    def test_scalar_capsule(self):
        assert render_capsule(Capsule(Fraction(3), {})) == "3"


class TestCanonicalization:
    def test_drops_unreachable(self):
        c = alpha_canonicalize(parse_capsule("a where { a = 1:a, b = 2:b }"))
        assert list(c.env) == ["v0"]

    def test_open_capsule_rejected(self):
        with pytest.raises(OpenCapsule):
            alpha_canonicalize(parse_capsule("a where { a = 1:b }"))

    def test_names_follow_first_reach(self):
        c = alpha_canonicalize(parse_capsule("q where { p = 2:q, q = 1:p }"))
        assert render_capsule(c) == "v0 where { v0 = 1:v1, v1 = 2:v0 }"

    @settings(max_examples=100, deadline=None)
    @given(closed_envs())
    def test_invariant_under_renaming(self, env):
        root = SVar(next(iter(env)))
        mapping = {k: f"z{k}" for k in env}
        env2 = {mapping[k]: rename_value(v, mapping) for k, v in env.items()}
        c1 = alpha_canonicalize(Capsule(root, env))
        c2 = alpha_canonicalize(Capsule(rename_value(root, mapping), env2))
        assert render_capsule(c1) == render_capsule(c2)

    @settings(max_examples=100, deadline=None)
    @given(closed_envs())
    def test_idempotent(self, env):
        c = alpha_canonicalize(Capsule(SVar(next(iter(env))), env))
        assert render_capsule(alpha_canonicalize(c)) == render_capsule(c)

    @settings(max_examples=100, deadline=None)
    @given(closed_envs())
    def test_text_roundtrip(self, env):
        c = alpha_canonicalize(Capsule(SVar(next(iter(env))), env))
        assert render_capsule(parse_capsule(render_capsule(c))) == render_capsule(c)


def test_parse_value_shapes():
    v = parse_value("1:(x [*] y^)")
    assert isinstance(v, SCons)
    assert isinstance(v.tail, SPointwise) and isinstance(v.tail.right, STail)
