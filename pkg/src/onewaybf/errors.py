"""Exception hierarchy shared by the library and the CLI.

Every error carries a ``kind`` string that the CLI echoes in its error JSON,
and belongs to one of two families that map onto process exit codes:
input problems (bad files, bad data) and domain problems (arguments outside
the region where a quantity is defined).
"""


class OneWayBFError(Exception):
    kind = "Error"


class InputError(OneWayBFError):
    """Malformed or unusable input data (CLI exit code 2)."""

    kind = "InputError"


class DomainError(OneWayBFError, ValueError):
    """Argument outside the mathematical domain (CLI exit code 3)."""

    kind = "DomainError"


class MalformedRow(InputError):
    kind = "MalformedRow"

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NonFiniteValue(MalformedRow):
    kind = "NonFiniteValue"


class UnbalancedData(InputError):
    kind = "UnbalancedData"

    def __init__(self, counts: dict):
        self.counts = dict(counts)
        detail = ", ".join(f"{g!r}: {c}" for g, c in self.counts.items())
        super().__init__(f"groups have unequal replicate counts ({detail})")


class TooFewGroups(InputError):
    kind = "TooFewGroups"


class DegenerateData(InputError):
    """W_T = 0: every observation is identical and BF10 is 0/0."""

    kind = "DegenerateData"


class HyperparameterOutOfRange(DomainError):
    kind = "HyperparameterOutOfRange"


class QuadratureError(OneWayBFError, ArithmeticError):
    kind = "QuadratureFailure"
