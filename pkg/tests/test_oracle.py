import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamcalc import Capsule, check_wf, guarded_at, parse_capsule
from streamcalc.errors import DivisionByZero
from streamcalc.oracle import (
    closed_form,
    kleene_iterates,
    kleene_prefix,
    oracle_prefix,
    prefix_equiv,
    sem_eval_prefix,
    unknown_count,
)
from streamcalc.syntax import SCons, SPointwise, STail, SVar

from .strategies import random_term

F = Fraction


def env_of(text):
    return parse_capsule("x where { " + text + " }").env


class TestPrefixEvaluation:
    def test_cons_shifts_right(self):
        assert sem_eval_prefix(SCons(F(0), SVar("x")), {"x": [1, 2, 3, 4]}, 4) == [0, 1, 2, 3]

    def test_tail_loses_last_position(self):
        assert sem_eval_prefix(STail(SVar("x")), {"x": [0, 1, 2, 3]}, 4) == [1, 2, 3, None]

    def test_pointwise(self):
        v = SPointwise("+", SVar("x"), SVar("y"))
        assert sem_eval_prefix(v, {"x": [0, 1], "y": [1, 1]}, 2) == [1, 2]

    def test_unknown_is_strict(self):
        v = SPointwise("*", SVar("x"), SVar("y"))
        assert sem_eval_prefix(v, {"x": [0, 0], "y": [None, 5]}, 2) == [None, 0]

    def test_division_by_zero(self):
        with pytest.raises(DivisionByZero):
            sem_eval_prefix(SPointwise("/", SVar("x"), SVar("x")), {"x": [F(0)]}, 1)


class TestKleene:
    def test_nat(self):
        sol = kleene_prefix(env_of("x = 0:(x [+] y), y = 1:y"), n=6)
        assert sol == {"x": [0, 1, 2, 3, 4, 5], "y": [1] * 6}

    @pytest.mark.parametrize("bindings", ["x = x", "x = x [+] y, y = 1:y"])
    def test_undetermined(self, bindings):
        assert kleene_prefix(env_of(bindings), n=4)["x"] == [None] * 4

    def test_documented_incompleteness(self):
        # all zeros is the unique solution, but neither the oracle nor the checker sees it
        env = env_of("z = y [*] z, y = 0:y")
        assert kleene_prefix(env, n=10)["z"] == [None] * 10
        assert not check_wf({"y": env["y"]}, "z", env["z"])

    def test_boundary_for_free_variables(self):
        sol = kleene_prefix(env_of("x = 0:(x [+] s)"), {"s": [2] * 5}, n=5)
        assert sol["x"] == [0, 2, 4, 6, 8]
        with pytest.raises(ValueError):
            kleene_prefix(env_of("x = 0:(x [+] s)"), n=5)

    def test_lookahead_recovers_cutoff(self):
        env = env_of("x = 0:y^^, y = 1:2:y")
        assert kleene_prefix(env, n=4, lookahead=0)["x"] == [0, 1, 2, None]
        assert kleene_prefix(env, n=4)["x"] == [0, 1, 2, 1]

    def test_monotone_refinement(self):
        env = env_of("x = 0:1:(2:x^)^, y = x [+] y^^, w = 1:(w [*] x)")
        counts = [unknown_count(a) for a in kleene_iterates(env, width=12)]
        assert counts == sorted(counts, reverse=True)
        assert counts[-1] < counts[0]

    def test_oracle_prefix(self):
        c = parse_capsule("x^ where { x = 0:(x [+] y), y = 1:y }")
        assert oracle_prefix(c, 5) == [1, 2, 3, 4, 5]


class TestPrefixEquivalence:
    def test_different(self, run):
        assert not prefix_equiv(run("one_two()"), run("two_one()"), 10)

    def test_determinism(self, run):
        assert prefix_equiv(run("nat()"), run("nat()"), 50)

    def test_ones(self, run):
        nat = run("nat()")
        ones = nat.env[nat.value.name].tail.right  # 0:(x [+] y) -> y
        assert prefix_equiv(run("repeat(1)"), Capsule(ones, nat.env), 50)


@pytest.mark.parametrize("name, i, expected", [
    ("fact", 5, 120),
    ("nat", 0, 0),
    ("expn(1)", 4, F(65, 24)),
    ("pow(3)", 4, 81),
    ("nat_to_pow(2)", 7, 49),
    ("sum_nat", 4, 10),
    ("aggr3_nat", 2, 9),
    ("fib", 10, 55),
])
def test_closed_forms(name, i, expected):
    assert closed_form(name, i) == expected


def test_closed_form_rejects_unknown():
    with pytest.raises(ValueError):
        closed_form("primes", 3)


def _additive_env(seed, max_vars=3):
    # sums only, so exact values stay small over long prefixes
    rng = random.Random(seed)
    names = [f"x{i}" for i in range(rng.randint(1, max_vars))]
    env = {}
    for x in names:
        t = random_term(rng, names, 4)
        env[x] = _plus_only(t)
    return env


def _plus_only(t):
    if isinstance(t, SCons):
        return SCons(t.head, _plus_only(t.tail))
    if isinstance(t, STail):
        return STail(_plus_only(t.arg))
    if isinstance(t, SPointwise):
        return SPointwise("+", _plus_only(t.left), _plus_only(t.right))
    return t


def _accepted(env):
    return all(check_wf({k: v for k, v in env.items() if k != x}, x, env[x]) for x in env)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_accepted_environments_are_determined(seed):
    env = _additive_env(seed)
    if not _accepted(env):
        return
    sol = kleene_prefix(env, n=15)
    for x, p in sol.items():
        assert p == [guarded_at(env, SVar(x), i) for i in range(15)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_open_environments_with_sampled_boundaries(seed):
    env = _additive_env(seed, max_vars=3)
    free = sorted(env)[-1]
    del env[free]
    if not env or not _accepted(env):
        return
    rng = random.Random(seed)
    for _ in range(3):
        boundary = {free: [F(rng.randint(-5, 5)) for _ in range(40)]}
        sol = kleene_prefix(env, boundary, n=12)
        assert all(v is not None for x in env for v in sol[x])
