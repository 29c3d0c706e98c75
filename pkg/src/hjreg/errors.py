"""Exception hierarchy shared by all hjreg modules."""


class HJRegError(Exception):
    """Base class for every error raised by hjreg."""


class ExpressionSyntaxError(HJRegError, ValueError):
    """A coefficient expression could not be parsed."""


class UnknownIdentifierError(ExpressionSyntaxError):
    """An expression references a variable or function that is not allowed."""


class SchemaError(HJRegError, ValueError):
    """A problem document is missing a field or has a field of the wrong type."""


class RangeError(HJRegError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class DomainError(HJRegError, ArithmeticError):
    """Evaluation left the domain of an operation (division by zero, sqrt < 0, ...)."""


class BracketError(HJRegError, ArithmeticError):
    """A root bracket does not contain a sign change."""


class AdmissibilityError(HJRegError, ValueError):
    """A displacement violates the admissibility condition of a regularity chain."""


class ConfigError(HJRegError, ValueError):
    """Solver configuration is inconsistent (e.g. empty control set)."""


class PreconditionError(HJRegError, ValueError):
    """Input to a transform does not satisfy the transform's hypothesis."""


class ZeroError(HJRegError, ArithmeticError):
    """A ratio has a zero denominator and a nonzero numerator."""


class NoSolution(HJRegError):
    """The structured extremal system has no solution for the requested tau."""


class InsufficientPairs(HJRegError):
    """Admissibility filtering left no pairs to certify."""
