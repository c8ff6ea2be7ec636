from fractions import Fraction

import pytest
from hypothesis import given, settings

from streamcalc import check_wf, find_wf_violation, parse_capsule, wf_visit
from streamcalc.syntax import SCons, SPointwise, STail, SVar
from streamcalc.wellformedness import capsule_violation, is_well_defined

from .strategies import closed_envs


def env_of(text):
    return parse_capsule("x where { " + text + " }").env


def accepts(text, var="x"):
    env = env_of(text)
    rest = {k: v for k, v in env.items() if k != var}
    return check_wf(rest, var, env[var])


@pytest.mark.parametrize("bindings", [
    "x = x",
    "x = x [+] y, y = 1:y",
    "x = 0:x^",
    "x = (0:x) [*] x",
    "x = 1:x^^",
    "x = y, y = x",
])
def test_rejected(bindings):
    assert not accepts(bindings)


@pytest.mark.parametrize("bindings", [
    "x = 0:x",
    "x = 1:y, y = 2:x",
    "x = 0:(x [+] y), y = 1:y",
    "x = 0:1:(x [+] x^)",
    "x = 0:1:(2:x^)^",
    "x = y [+] y, y = 1:y",
])
def test_accepted(bindings):
    assert accepts(bindings)


def test_free_variables_are_trusted():
    assert check_wf({}, "x", SPointwise("+", SVar("z"), SVar("z")))


def test_witness_names_the_cycle():
    env = env_of("x = y [+] z, y = 1:y, z = x")
    rest = {k: v for k, v in env.items() if k != "x"}
    assert find_wf_violation(rest, "x", env["x"]) == ("x", "z", "x")


def test_explicit_counters():
    # a variable already on the path with counter 1 may be re-reached behind no constructor
    assert wf_visit(SVar("x"), {"x": 1}, {})
    assert not wf_visit(SVar("x"), {"x": 0}, {})
    assert not wf_visit(STail(SCons(Fraction(0), SVar("x"))), {"x": 0}, {})


def test_scalar_results_are_well_defined():
    assert is_well_defined(Fraction(1), {})
    assert capsule_violation(True, {}) is None


def test_capsule_check():
    c = parse_capsule("x^ where { x = 0:x }")
    assert is_well_defined(c.value, c.env)
    c = parse_capsule("x where { x = 0:x^ }")
    assert not is_well_defined(c.value, c.env)


@settings(max_examples=150, deadline=None)
@given(closed_envs())
def test_extra_constructor_preserves_acceptance(env):
    # prefixing a binding with a constructor only raises counters
    x = next(iter(env))
    rest = {k: v for k, v in env.items() if k != x}
    if check_wf(rest, x, env[x]):
        assert check_wf(rest, x, SCons(Fraction(7), env[x]))


@settings(max_examples=150, deadline=None)
@given(closed_envs())
def test_extra_tail_preserves_rejection(env):
    x = next(iter(env))
    rest = {k: v for k, v in env.items() if k != x}
    if not check_wf(rest, x, env[x]):
        assert not check_wf(rest, x, STail(env[x]))
