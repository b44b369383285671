"""Coefficient fields over a single named coordinate chart.

A :class:`ScalarField` is either *exact* (an element of the rational function
field ``QQ(x_1, ..., x_m)``, kept as sympy's sparse ``FracElement``) or
*numeric* (a black-box evaluator ``ndarray -> float``). Arithmetic between two
exact fields stays exact; anything touching a numeric operand becomes numeric.

This module exposes:

- :class:`Chart` / :class:`Point`: coordinate labels and points on them.
- :class:`ScalarField`: the field itself, with ``+ - * /`` and integer powers.
- :func:`field_arithmetic`, :func:`partial`, :func:`evaluate`: the functional
  forms used by the multivector code.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Literal, TypeAlias

import numpy as np
import sympy

from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import (
    ChartMismatch,
    DivisionByZeroField,
    IndexOutOfRange,
    PoleAtPoint,
)
from schouten_lab.expr import format_rational, parse_rational, rational_field

Evaluator: TypeAlias = Callable[[np.ndarray], float]
Scalar: TypeAlias = int | Fraction | float


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate labels plus an optional domain membership test."""

    names: tuple[str, ...]
    domain_predicate: Callable[[np.ndarray], bool] | None = dataclasses.field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate coordinate names in {self.names}")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def field(self) -> Any:
        return rational_field(self.names)[0]

    @property
    def gens(self) -> tuple[Any, ...]:
        return rational_field(self.names)[1]

    @property
    def symbols(self) -> tuple[sympy.Symbol, ...]:
        return tuple(sympy.Symbol(name) for name in self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise IndexOutOfRange(f"no coordinate named {name!r} in {self.names}") from None

    def contains(self, x: PointLike) -> bool:
        coords = as_coords(self, x)
        return self.domain_predicate is None or bool(self.domain_predicate(coords))

    def restrict(self, predicate: Callable[[np.ndarray], bool]) -> Chart:
        """Same coordinates, narrower domain (both predicates must hold)."""
        outer = self.domain_predicate
        if outer is None:
            return Chart(self.names, predicate)
        return Chart(self.names, lambda x: outer(x) and predicate(x))

    def check_index(self, i: int) -> None:
        if not 0 <= i < self.dim:
            raise IndexOutOfRange(f"coordinate index {i} outside 0..{self.dim - 1}")

    def point(self, coords: Sequence[float]) -> Point:
        return Point(self, tuple(float(c) for c in coords))


@dataclass(frozen=True)
class Point:
    chart: Chart
    coords: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.coords) != self.chart.dim:
            raise ValueError(
                f"point has {len(self.coords)} coordinates, chart expects {self.chart.dim}"
            )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


PointLike: TypeAlias = Point | Sequence[float] | np.ndarray


def as_coords(chart: Chart, x: PointLike) -> np.ndarray:
    """Normalize a point-like value to a float vector of length ``chart.dim``."""
    if isinstance(x, Point):
        if x.chart != chart:
            raise ChartMismatch(f"point on {x.chart.names}, expected {chart.names}")
        return x.as_array()
    coords = np.asarray(x, dtype=float)
    if coords.shape != (chart.dim,):
        raise ValueError(f"expected {chart.dim} coordinates, got shape {coords.shape}")
    return coords


def as_fraction(value: Scalar) -> Fraction:
    """Exact value of a number; floats are read by their shortest decimal repr."""
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValueError(f"cannot embed non-finite constant {value!r}")
        return Fraction(repr(value))
    return Fraction(value)


def exact_constant(chart: Chart, value: Scalar) -> Any:
    """Embed a number into ``QQ(chart)``."""
    frac = as_fraction(value)
    return chart.field(sympy.Rational(frac.numerator, frac.denominator))


class ScalarField:
    """A coefficient function on ``chart``, exact or numeric.

    Instances are immutable. Exact fields compare by cross-multiplication;
    numeric fields only compare equal to themselves.
    """

    __slots__ = ("chart", "_exact", "_evaluator", "_compiled")

    def __init__(
        self,
        chart: Chart,
        *,
        exact: Any | None = None,
        evaluator: Evaluator | None = None,
    ) -> None:
        if (exact is None) == (evaluator is None):
            raise ValueError("a scalar field needs exactly one of exact= or evaluator=")
        if exact is not None and exact.field != chart.field:
            raise ChartMismatch(f"rational function does not belong to chart {chart.names}")
        self.chart = chart
        self._exact = exact
        self._evaluator = evaluator
        self._compiled: tuple[Callable[..., Any], Callable[..., Any]] | None = None

    # --- constructors -------------------------------------------------

    @classmethod
    def constant(cls, chart: Chart, value: Scalar) -> ScalarField:
        return cls(chart, exact=exact_constant(chart, value))

    @classmethod
    def zero(cls, chart: Chart) -> ScalarField:
        return cls(chart, exact=chart.field.zero)

    @classmethod
    def one(cls, chart: Chart) -> ScalarField:
        return cls(chart, exact=chart.field.one)

    @classmethod
    def coordinate(cls, chart: Chart, i: int) -> ScalarField:
        chart.check_index(i)
        return cls(chart, exact=chart.gens[i])

    @classmethod
    def parse(cls, chart: Chart, text: str) -> ScalarField:
        return cls(chart, exact=parse_rational(text, chart.names))

    @classmethod
    def from_expr(cls, chart: Chart, expr: Any) -> ScalarField:
        """Convert a sympy expression that is rational in the chart symbols."""
        return cls(chart, exact=chart.field.from_expr(sympy.sympify(expr)))

    @classmethod
    def numeric(cls, chart: Chart, evaluator: Evaluator) -> ScalarField:
        return cls(chart, evaluator=evaluator)

    # --- inspection -----------------------------------------------------

    @property
    def is_exact(self) -> bool:
        return self._exact is not None

    @property
    def exact(self) -> Any:
        if self._exact is None:
            raise TypeError("numeric scalar field has no exact body")
        return self._exact

    @property
    def is_zero(self) -> bool:
        """True only for the exact zero; numeric fields are never known to vanish."""
        return self._exact is not None and not self._exact.numer

    def is_constant(self) -> bool:
        if self._exact is None:
            return False
        return self._exact.numer.is_ground and self._exact.denom.is_ground

    def is_polynomial_in(self, indices: Sequence[int]) -> bool:
        """True when the denominator does not involve the given coordinates."""
        if self._exact is None:
            return False
        return all(self._exact.denom.degree(i) <= 0 for i in indices)

    def depends_on(self, i: int) -> bool:
        if self._exact is None:
            return True
        return self._exact.numer.degree(i) > 0 or self._exact.denom.degree(i) > 0

    def to_expr(self) -> Any:
        return self.exact.as_expr()

    def as_numeric(self) -> ScalarField:
        if self._exact is None:
            return self
        return ScalarField(self.chart, evaluator=self._eval_exact)

    def __repr__(self) -> str:
        if self._exact is None:
            return f"ScalarField(<numeric> on {self.chart.names})"
        return f"ScalarField({format_rational(self._exact)!r})"

    def __str__(self) -> str:
        return format_rational(self._exact) if self._exact is not None else "<numeric>"

    # --- evaluation -----------------------------------------------------

    def _compile(self) -> tuple[Callable[..., Any], Callable[..., Any]]:
        if self._compiled is None:
            symbols = self.chart.symbols
            num = sympy.lambdify(symbols, self._exact.numer.as_expr(), modules="numpy")
            den = sympy.lambdify(symbols, self._exact.denom.as_expr(), modules="numpy")
            self._compiled = (num, den)
        return self._compiled

    def _eval_exact(self, x: np.ndarray, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
        num, den = self._compile()
        d = float(den(*x))
        if abs(d) <= tolerances.pole:
            raise PoleAtPoint(f"denominator {d:.3e} vanishes at {tuple(x.tolist())}")
        return float(num(*x)) / d

    def __call__(self, x: PointLike, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
        coords = as_coords(self.chart, x)
        if self._exact is not None:
            return self._eval_exact(coords, tolerances)
        assert self._evaluator is not None  # noqa: S101
        return float(self._evaluator(coords))

    def evaluate_many(
        self, xs: np.ndarray, tolerances: Tolerances = DEFAULT_TOLERANCES
    ) -> np.ndarray:
        """Evaluate at the rows of an ``(n, dim)`` array."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if self._exact is None:
            return np.array([self(row) for row in xs])
        num, den = self._compile()
        cols = list(xs.T)
        d = np.broadcast_to(np.asarray(den(*cols), dtype=float), (xs.shape[0],))
        bad = np.abs(d) <= tolerances.pole
        if bad.any():
            row = xs[int(np.argmax(bad))]
            raise PoleAtPoint(f"denominator vanishes at {tuple(row.tolist())}")
        n = np.broadcast_to(np.asarray(num(*cols), dtype=float), (xs.shape[0],))
        return n / d

    # --- arithmetic -----------------------------------------------------

    def _coerce(self, other: object) -> ScalarField | None:
        if isinstance(other, ScalarField):
            if other.chart != self.chart:
                raise ChartMismatch(
                    f"scalar fields on different charts: {self.chart.names} vs {other.chart.names}"
                )
            return other
        if isinstance(other, int | Fraction | float) and not isinstance(other, bool):
            return ScalarField.constant(self.chart, other)
        return None

    def _numeric_pair(self, other: ScalarField) -> tuple[Evaluator, Evaluator]:
        a = self.as_numeric()._evaluator
        b = other.as_numeric()._evaluator
        assert a is not None and b is not None  # noqa: S101
        return a, b

    def __add__(self, other: object) -> ScalarField:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        if self.is_exact and g.is_exact:
            return ScalarField(self.chart, exact=self._exact + g._exact)
        a, b = self._numeric_pair(g)
        return ScalarField(self.chart, evaluator=lambda x: a(x) + b(x))

    __radd__ = __add__

    def __neg__(self) -> ScalarField:
        if self._exact is not None:
            return ScalarField(self.chart, exact=-self._exact)
        a = self._evaluator
        assert a is not None  # noqa: S101
        return ScalarField(self.chart, evaluator=lambda x: -a(x))

    def __sub__(self, other: object) -> ScalarField:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        return self + (-g)

    def __rsub__(self, other: object) -> ScalarField:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        return g + (-self)

    def __mul__(self, other: object) -> ScalarField:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        if self.is_exact and g.is_exact:
            return ScalarField(self.chart, exact=self._exact * g._exact)
        if self.is_zero or g.is_zero:
            return ScalarField.zero(self.chart)
        a, b = self._numeric_pair(g)
        return ScalarField(self.chart, evaluator=lambda x: a(x) * b(x))

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> ScalarField:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        if g.is_zero:
            raise DivisionByZeroField("division by the zero scalar field")
        if self.is_exact and g.is_exact:
            return ScalarField(self.chart, exact=self._exact / g._exact)
        a, b = self._numeric_pair(g)
        pole = DEFAULT_TOLERANCES.pole

        def quotient(x: np.ndarray) -> float:
            d = b(x)
            if abs(d) <= pole:
                raise PoleAtPoint(f"divisor vanishes at {tuple(x.tolist())}")
            return a(x) / d

        return ScalarField(self.chart, evaluator=quotient)

    def __rtruediv__(self, other: object) -> ScalarField:
        g = self._coerce(other)
        if g is None:
            return NotImplemented
        return g / self

    def __pow__(self, n: int) -> ScalarField:
        if not isinstance(n, int) or n < 0:
            return NotImplemented
        if self._exact is not None:
            return ScalarField(self.chart, exact=self._exact**n)
        a = self._evaluator
        assert a is not None  # noqa: S101
        return ScalarField(self.chart, evaluator=lambda x: a(x) ** n)

    def __eq__(self, other: object) -> bool:
        try:
            g = self._coerce(other)
        except ChartMismatch:
            return False
        if g is None:
            return NotImplemented
        if self._exact is None or g._exact is None:
            return self is g
        f, h = self._exact, g._exact
        return bool(f.numer * h.denom == h.numer * f.denom)

    __hash__ = None  # type: ignore[assignment]

    # --- calculus -------------------------------------------------------

    def partial(self, i: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> ScalarField:
        """Derivative along coordinate ``i``: symbolic or central difference."""
        self.chart.check_index(i)
        if self._exact is not None:
            return ScalarField(self.chart, exact=self._exact.diff(self.chart.gens[i]))
        f = self._evaluator
        assert f is not None  # noqa: S101
        step = tolerances.fd_step

        def derivative(x: np.ndarray) -> float:
            h = max(step, step * abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            return (f(xp) - f(xm)) / (2.0 * h)

        return ScalarField(self.chart, evaluator=derivative)

    def gradient(self) -> tuple[ScalarField, ...]:
        return tuple(self.partial(i) for i in range(self.chart.dim))


ArithmeticOp = Literal["add", "sub", "mul", "div", "scale"]


def field_arithmetic(op: ArithmeticOp, f: ScalarField, g: ScalarField | Scalar) -> ScalarField:
    """Functional form of the ring operations; ``scale`` multiplies by a constant."""
    if op == "add":
        return f + g
    if op == "sub":
        return f - g
    if op == "mul":
        return f * g
    if op == "div":
        return f / g
    if op == "scale":
        if isinstance(g, ScalarField) and not g.is_constant():
            raise ValueError("scale expects a constant factor")
        return f * g
    raise ValueError(f"unknown arithmetic op {op!r}")


def partial(f: ScalarField, i: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> ScalarField:
    return f.partial(i, tolerances)


def evaluate(f: ScalarField, x: PointLike, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    return f(x, tolerances)


def coordinates(chart: Chart) -> tuple[ScalarField, ...]:
    """All coordinate functions of ``chart`` in order."""
    return tuple(ScalarField.coordinate(chart, i) for i in range(chart.dim))


def with_parameter(chart: Chart, name: str = "eps") -> Chart:
    """Extend ``chart`` by one trailing parameter coordinate (for eps-families)."""
    if name in chart.names:
        raise ValueError(f"parameter name {name!r} clashes with a coordinate")
    base = chart

    def predicate(x: np.ndarray) -> bool:
        return base.contains(x[:-1])

    return Chart((*chart.names, name), predicate if chart.domain_predicate else None)


def lift(f: ScalarField, extended: Chart) -> ScalarField:
    """View a field on ``extended`` (a chart with trailing parameters)."""
    if extended.names[: f.chart.dim] != f.chart.names:
        raise ChartMismatch(f"{extended.names} does not extend {f.chart.names}")
    if f.is_exact:
        return ScalarField.from_expr(extended, f.to_expr())
    g = f.as_numeric()
    n = f.chart.dim
    return ScalarField.numeric(extended, lambda x: g(x[:n]))


def specialize(f: ScalarField, base: Chart, value: Scalar) -> ScalarField:
    """Fix the trailing parameter coordinate of ``f`` at ``value``."""
    if f.chart.dim != base.dim + 1 or f.chart.names[:-1] != base.names:
        raise ChartMismatch(f"{f.chart.names} is not {base.names} plus one parameter")
    if f.is_exact:
        frac = as_fraction(value)
        symbol = f.chart.symbols[-1]
        expr = f.to_expr().subs(symbol, sympy.Rational(frac.numerator, frac.denominator))
        return ScalarField.from_expr(base, expr)
    g = f.as_numeric()
    v = float(value)
    return ScalarField.numeric(base, lambda x: g(np.append(x, v)))
