"""Exception hierarchy.

Static errors (parsing, validation) map to CLI exit status 2, runtime
errors to exit status 1.
"""


class StreamCalcError(Exception):
    """Base class for every error raised by the package."""


class StaticError(StreamCalcError):
    pass


class ParseError(StaticError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(where + message)


class ValidationError(StaticError):
    pass


class UnknownFunction(ValidationError):
    pass


class ArityError(ValidationError):
    pass


class DuplicateDefinition(ValidationError):
    pass


class UnboundIdentifier(ValidationError):
    pass


class AmbiguousSort(ValidationError):
    pass


class SortError(ValidationError):
    """A node used at the wrong sort; raised statically or during evaluation."""


class RuntimeFailure(StreamCalcError):
    pass


class NotWellDefined(RuntimeFailure):
    """Raised when adding ``var = value`` would break well-definedness."""

    def __init__(self, var, value, witness=()):
        self.var = var
        self.value = value
        self.witness = tuple(witness)
        from .syntax import render_value

        msg = f"binding {var} = {render_value(value)} is not well-defined"
        if self.witness:
            msg += " (cycle " + " -> ".join(self.witness) + ")"
        super().__init__(msg)


class UndefinedVariable(RuntimeFailure):
    def __init__(self, var, index=None):
        self.var = var
        self.index = index
        at = f" at index {index}" if index is not None else ""
        super().__init__(f"variable {var} has no binding{at}")


class Divergence(RuntimeFailure):
    """Element access would not terminate: ``var`` re-entered at a non-smaller index."""

    def __init__(self, var, pending_index, index):
        self.var = var
        self.pending_index = pending_index
        self.index = index
        super().__init__(
            f"access to {var} at index {index} while pending at index {pending_index}"
        )


class StepBudgetExceeded(RuntimeFailure):
    def __init__(self, budget):
        self.budget = budget
        super().__init__(f"element access exceeded {budget} steps")


class FuelExhausted(RuntimeFailure):
    def __init__(self, call, fuel):
        self.call = call
        self.fuel = fuel
        super().__init__(f"fuel of {fuel} call expansions exhausted at {call}")


class DivisionByZero(RuntimeFailure):
    pass


class NonNaturalIndex(RuntimeFailure):
    pass


class IncompatibleEnvironments(RuntimeFailure):
    pass


class OpenCapsule(StreamCalcError):
    pass


class OracleMismatch(RuntimeFailure):
    def __init__(self, index, computed, expected):
        self.index = index
        self.computed = computed
        self.expected = expected
        shown = "unknown" if expected is None else expected
        super().__init__(f"element {index} is {computed} but the fixed-point oracle gives {shown}")
