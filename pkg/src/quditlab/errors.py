"""Exception types raised across the package."""


class QuditlabError(Exception):
    pass


class DimensionError(QuditlabError, ValueError):
    """Register shapes or operator sizes do not line up."""


class NotUnitaryError(QuditlabError, ValueError):
    pass


class NormalizationError(QuditlabError, ValueError):
    pass


class NoInverse(QuditlabError, ArithmeticError):
    """Raised when gcd(a, q) != 1."""

    def __init__(self, a, q):
        super().__init__(f"{a} has no inverse modulo {q}")
        self.a = a
        self.q = q


class Underdetermined(QuditlabError, ArithmeticError):
    def __init__(self, rank, n):
        super().__init__(f"system has rank {rank} < {n}")
        self.rank = rank
        self.n = n


class InconsistentSystem(QuditlabError, ArithmeticError):
    pass


class CapExceeded(QuditlabError, ValueError):
    """A requested simulation would exceed a configured size cap."""


class AccessViolation(QuditlabError, PermissionError):
    """An adversary asked for an oracle it is not entitled to in the current phase."""
