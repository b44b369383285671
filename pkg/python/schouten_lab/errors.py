"""Exception hierarchy shared by every schouten_lab module.

Failures of an identity that a check is *measuring* are never raised; they
land in a :class:`~schouten_lab.report.CheckReport`. The classes below are
for inputs an operation cannot act on.
"""

from __future__ import annotations


class SchoutenLabError(Exception):
    """Root of all schouten_lab errors."""


# scalar
class ChartMismatch(SchoutenLabError, ValueError):
    """Operands live on different coordinate charts."""


class DivisionByZeroField(SchoutenLabError, ZeroDivisionError):
    """Division by the identically zero scalar field."""


class IndexOutOfRange(SchoutenLabError, IndexError):
    """Coordinate index outside ``0 <= i < dim``."""


class PoleAtPoint(SchoutenLabError, ArithmeticError):
    """A rational field's denominator vanishes at the evaluation point."""


class ParseError(SchoutenLabError, ValueError):
    """Malformed expression or problem file."""

    def __init__(self, message: str, *, line: int = 1, col: int = 1) -> None:
        super().__init__(f"{message} (line {line}, col {col})")
        self.message = message
        self.line = line
        self.col = col


class UnknownCoordinate(ParseError):
    """An expression names a coordinate the chart does not declare."""


class UnknownKey(ParseError):
    """A problem file carries a key outside the schema."""


# multivector
class DegreeUnderflow(SchoutenLabError, ValueError):
    """Schouten bracket of two functions (result degree -1)."""


class WrongDegree(SchoutenLabError, ValueError):
    """A multivector has a degree the operation does not accept."""


class TooManyArguments(SchoutenLabError, ValueError):
    """More differentials supplied than the multivector has slots."""


class MapNotInvertibleNear(SchoutenLabError, ArithmeticError):
    """A diffeomorphism cannot be inverted near the requested point."""


class JacobianSingular(SchoutenLabError, ArithmeticError):
    """The Jacobian matrix of a map is numerically singular."""


# poisson
class NotPoisson(SchoutenLabError, ValueError):
    """The bivector failed its Jacobi identity check."""


# homological
class InsufficientSeriesOrder(SchoutenLabError, ValueError):
    """A series has fewer Taylor coefficients than the requested order needs."""


class NotVertical(SchoutenLabError, ValueError):
    """A tensor does not annihilate the Casimir differentials."""


class LeafMatrixSingular(SchoutenLabError, ArithmeticError):
    """The leaf block of the Poisson component matrix is singular."""


class NotClosed(SchoutenLabError, ValueError):
    """A vertical form has a nonzero leafwise exterior derivative."""


class NotHamiltonian(SchoutenLabError, ValueError):
    """A vertical vector field has no Hamiltonian potential."""


class NotCocycle(SchoutenLabError, ValueError):
    """The right-hand side fails the necessary condition ``[[Psi, Phi]] = 0``."""


class NotHamiltonianObstruction(SchoutenLabError, ValueError):
    """``Phi(dk_j)`` is not Hamiltonian for the Casimir with index ``j``."""

    def __init__(self, j: int, reason: str) -> None:
        super().__init__(f"contraction with casimir {j} is not hamiltonian: {reason}")
        self.j = j


class NotClosedVertical(SchoutenLabError, ValueError):
    """The vertical 2-form recovered by the solver is not closed."""


class FoliationNotAdapted(SchoutenLabError, ValueError):
    """The leaves are not graphs over the leaf coordinates of the chart."""


# flows
class StepSizeUnderflow(SchoutenLabError, ArithmeticError):
    """The adaptive integrator could not meet its tolerance."""


class DomainExit(SchoutenLabError, ArithmeticError):
    """A trajectory or evaluation left the domain of the vector field."""


# cases
class RadicandNonpositive(SchoutenLabError, ArithmeticError):
    """The square-root argument of the closed-form flow is not positive."""


class DenominatorZero(SchoutenLabError, ArithmeticError):
    """A closed-form formula divides by zero at the requested point."""


class SingularDelta(SchoutenLabError, ArithmeticError):
    """The constraint bracket matrix is not invertible."""


class MissingThetaFamily(SchoutenLabError, ValueError):
    """A Dirac instance without a 1-form family cannot produce a generator."""
