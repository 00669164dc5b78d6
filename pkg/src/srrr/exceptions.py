"""Exception hierarchy.

Every error carries a short ``category`` used by the command line front end
when printing ``error: <category>: <detail>``.  Argument errors subclass
:class:`ValueError` so that plain library callers can catch them as such.
"""


class SrrrError(Exception):
    category = "runtime"


class ArgumentError(SrrrError, ValueError):
    category = "argument"


class InputFormatError(ArgumentError):
    category = "input-format"


class DecompositionError(SrrrError, ArithmeticError):
    category = "decomposition-failure"


class IllConditionedDesignError(SrrrError, ArithmeticError):
    category = "ill-conditioned-design"


class DegenerateColumnError(ArgumentError):
    category = "degenerate-column"


class InfeasiblePointError(ArgumentError):
    category = "infeasible-point"


class EmptyModelError(SrrrError):
    category = "empty-model"


class TuningError(SrrrError):
    category = "tuning-failure"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
