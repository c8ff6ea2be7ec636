from importlib.resources import files

import pytest

from streamcalc import Interpreter, alpha_canonicalize, parse_expr, parse_program

PROGRAMS = files("streamcalc").joinpath("programs")


def load(name):
    return parse_program(PROGRAMS.joinpath(name).read_text())


@pytest.fixture(scope="session")
def corpus():
    return load("corpus.sc")


@pytest.fixture(scope="session")
def run(corpus):
    """Evaluate an expression of the corpus program under the empty environment."""
    interp = Interpreter(corpus)

    def _run(text, fuel=None):
        return interp.evaluate(parse_expr(text), fuel=fuel)

    return _run


@pytest.fixture(scope="session")
def canonical(run):
    return lambda text: alpha_canonicalize(run(text))
