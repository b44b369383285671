"""Contravariant antisymmetric tensor fields on one chart.

A degree-``p`` multivector is stored sparsely as ``{(i1, ..., ip): coefficient}``
with strictly increasing keys; ``(i1, ..., ip)`` stands for
``d_i1 ^ ... ^ d_ip``. Permutation signs are resolved when a component is
inserted, repeated indices vanish, and exact zeros are dropped.

Schouten bracket convention
---------------------------
Write ``xi_k`` for the odd symbol of ``d_k`` and ``iota_k`` for the left odd
derivative (removing ``xi_k`` from position ``s`` costs ``(-1)**s``,
0-based). For ``A`` of degree ``p`` and ``B`` of degree ``q``::

    [[A, B]] = sum_k iota_k(A) ^ d_k(B) + (-1)**(p*q) * iota_k(B) ^ d_k(A)

With this formula ``[[X, f]] = X(f)``, ``[[X, Y]]`` is the Lie bracket,
``[[A, B]] = (-1)**(p*q) [[B, A]]``, the Leibniz rule carries the sign
``(-1)**(p*q + q)`` and the cyclic Jacobi sum vanishes. For a bivector
``Psi``, ``[[Psi, f]] = Psi(df, .)`` and ``[[[[Psi, f]], g]] = Psi(df, dg)``.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import TypeAlias

import numpy as np
from pydantic import BaseModel, ConfigDict

from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import (
    ChartMismatch,
    DegreeUnderflow,
    JacobianSingular,
    MapNotInvertibleNear,
    ParseError,
    TooManyArguments,
    WrongDegree,
)
from schouten_lab.scalar import (
    Chart,
    PointLike,
    Scalar,
    ScalarField,
    as_coords,
    lift,
    specialize,
)

Key: TypeAlias = tuple[int, ...]
Coefficient: TypeAlias = ScalarField | Scalar


def sort_with_sign(indices: Sequence[int]) -> tuple[int, Key] | None:
    """Sort ``indices`` and return ``(sign, sorted)``; ``None`` if an index repeats."""
    if len(set(indices)) != len(indices):
        return None
    inversions = sum(
        1 for a, b in itertools.combinations(range(len(indices)), 2) if indices[a] > indices[b]
    )
    return (-1 if inversions % 2 else 1), tuple(sorted(indices))


def _merge_sign(left: Key, right: Key) -> int:
    inversions = sum(1 for i in left for j in right if i > j)
    return -1 if inversions % 2 else 1


class Multivector:
    """Immutable degree-``p`` tensor field with sparse increasing-tuple keys."""

    __slots__ = ("chart", "degree", "_components")

    def __init__(
        self,
        chart: Chart,
        degree: int,
        components: Mapping[Sequence[int], Coefficient] | None = None,
        *,
        allow_overflow: bool = False,
    ) -> None:
        if degree < 0:
            raise WrongDegree(f"multivector degree must be non-negative, got {degree}")
        if degree > chart.dim and not allow_overflow:
            raise WrongDegree(f"degree {degree} exceeds chart dimension {chart.dim}")
        self.chart = chart
        self.degree = degree
        store: dict[Key, ScalarField] = {}
        for raw_key, raw_value in (components or {}).items():
            key = tuple(raw_key)
            if len(key) != degree:
                raise WrongDegree(f"component key {key} does not have degree {degree}")
            for i in key:
                chart.check_index(i)
            value = _as_field(chart, raw_value)
            sorted_key = sort_with_sign(key)
            if sorted_key is None or value.is_zero:
                continue
            sign, canonical = sorted_key
            term = value if sign > 0 else -value
            store[canonical] = store[canonical] + term if canonical in store else term
        self._components = {k: v for k, v in store.items() if not v.is_zero}

    @classmethod
    def _raw(cls, chart: Chart, degree: int, components: dict[Key, ScalarField]) -> Multivector:
        obj = cls.__new__(cls)
        obj.chart = chart
        obj.degree = degree
        obj._components = {k: v for k, v in components.items() if not v.is_zero}
        return obj

    # --- constructors -------------------------------------------------

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> Multivector:
        """The zero multivector; degrees above ``chart.dim`` are allowed here only."""
        return cls(chart, degree, allow_overflow=True)

    @classmethod
    def scalar(cls, f: ScalarField) -> Multivector:
        return cls(f.chart, 0, {(): f})

    @classmethod
    def basis(cls, chart: Chart, *indices: int, coefficient: Coefficient = 1) -> Multivector:
        """``coefficient * d_i1 ^ ... ^ d_ip`` in the given index order."""
        return cls(chart, len(indices), {tuple(indices): coefficient})

    @classmethod
    def vector_field(cls, chart: Chart, components: Sequence[Coefficient]) -> Multivector:
        if len(components) != chart.dim:
            raise WrongDegree(f"vector field needs {chart.dim} components, got {len(components)}")
        return cls(chart, 1, {(i,): c for i, c in enumerate(components)})

    @classmethod
    def parse(cls, chart: Chart, degree: int, components: Mapping[str, str]) -> Multivector:
        """Build from ``{"i1,i2": "expression"}`` as used in problem and JSON files."""
        return cls(
            chart,
            degree,
            {parse_key(key): ScalarField.parse(chart, text) for key, text in components.items()},
        )

    # --- inspection -----------------------------------------------------

    @property
    def components(self) -> Mapping[Key, ScalarField]:
        return MappingProxyType(self._components)

    @property
    def is_zero(self) -> bool:
        return not self._components

    @property
    def is_exact(self) -> bool:
        return all(v.is_exact for v in self._components.values())

    @property
    def scalar_value(self) -> ScalarField:
        if self.degree != 0:
            raise WrongDegree(f"expected a degree-0 multivector, got degree {self.degree}")
        return self._components.get((), ScalarField.zero(self.chart))

    def __getitem__(self, key: Sequence[int]) -> ScalarField:
        ordered = sort_with_sign(tuple(key))
        if ordered is None:
            return ScalarField.zero(self.chart)
        sign, canonical = ordered
        value = self._components.get(canonical)
        if value is None:
            return ScalarField.zero(self.chart)
        return value if sign > 0 else -value

    def items(self) -> Iterator[tuple[Key, ScalarField]]:
        return iter(sorted(self._components.items()))

    def __repr__(self) -> str:
        return f"Multivector(degree={self.degree}, {self})"

    def __str__(self) -> str:
        if not self._components:
            return "0"
        terms = []
        for key, value in self.items():
            basis = "^".join(f"d{self.chart.names[i]}" for i in key)
            terms.append(f"({value})*{basis}" if basis else f"({value})")
        return " + ".join(terms)

    # --- linear structure -----------------------------------------------

    def _check_same(self, other: Multivector) -> None:
        if other.chart != self.chart:
            raise ChartMismatch(
                f"multivectors on different charts: {self.chart.names} vs {other.chart.names}"
            )

    def __add__(self, other: Multivector) -> Multivector:
        if not isinstance(other, Multivector):
            return NotImplemented
        self._check_same(other)
        if other.degree != self.degree:
            raise WrongDegree(f"cannot add degree {self.degree} and degree {other.degree}")
        out = dict(self._components)
        for key, value in other._components.items():
            out[key] = out[key] + value if key in out else value
        return Multivector._raw(self.chart, self.degree, out)

    def __neg__(self) -> Multivector:
        return Multivector._raw(
            self.chart, self.degree, {k: -v for k, v in self._components.items()}
        )

    def __sub__(self, other: Multivector) -> Multivector:
        if not isinstance(other, Multivector):
            return NotImplemented
        return self + (-other)

    def __mul__(self, factor: object) -> Multivector:
        if isinstance(factor, Multivector):
            return NotImplemented
        if not isinstance(factor, ScalarField | int | float | Fraction):
            return NotImplemented
        f = _as_field(self.chart, factor)
        return Multivector._raw(
            self.chart, self.degree, {k: f * v for k, v in self._components.items()}
        )

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Multivector):
            return NotImplemented
        if other.chart != self.chart or other.degree != self.degree:
            return False
        keys = set(self._components) | set(other._components)
        return all(self[k] == other[k] for k in keys)

    __hash__ = None  # type: ignore[assignment]

    def map_components(self, fn: Callable[[ScalarField], ScalarField]) -> Multivector:
        return Multivector._raw(
            self.chart, self.degree, {k: fn(v) for k, v in self._components.items()}
        )

    def as_numeric(self) -> Multivector:
        return self.map_components(ScalarField.as_numeric)

    # --- calculus ---------------------------------------------------------

    def partial(self, k: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Multivector:
        """Coordinate derivative of every component along ``x_k``."""
        return self.map_components(lambda v: v.partial(k, tolerances))

    def odd_partial(self, k: int) -> Multivector:
        """Left derivative with respect to the odd symbol of ``d_k`` (interior product)."""
        self.chart.check_index(k)
        if self.degree == 0:
            return Multivector.zero(self.chart, 0)
        out: dict[Key, ScalarField] = {}
        for key, value in self._components.items():
            if k in key:
                s = key.index(k)
                out[key[:s] + key[s + 1 :]] = value if s % 2 == 0 else -value
        return Multivector._raw(self.chart, self.degree - 1, out)

    # --- numeric views ----------------------------------------------------

    def at(self, x: PointLike, tolerances: Tolerances = DEFAULT_TOLERANCES) -> dict[Key, float]:
        """Component values at ``x`` (absent keys are zero)."""
        coords = as_coords(self.chart, x)
        return {k: v(coords, tolerances) for k, v in self.items()}

    def matrix_at(self, x: PointLike, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
        """Antisymmetric component matrix ``Psi^{ij}(x)`` of a bivector."""
        if self.degree != 2:
            raise WrongDegree(f"component matrix needs a bivector, got degree {self.degree}")
        m = np.zeros((self.chart.dim, self.chart.dim))
        for (i, j), value in self.at(x, tolerances).items():
            m[i, j] = value
            m[j, i] = -value
        return m

    def vector_at(self, x: PointLike, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
        if self.degree != 1:
            raise WrongDegree(f"expected a vector field, got degree {self.degree}")
        v = np.zeros(self.chart.dim)
        for (i,), value in self.at(x, tolerances).items():
            v[i] = value
        return v

    def max_abs_at(
        self, xs: Iterable[PointLike], tolerances: Tolerances = DEFAULT_TOLERANCES
    ) -> float:
        """Largest absolute component value over the sample points."""
        worst = 0.0
        rows = np.asarray([as_coords(self.chart, x) for x in xs])
        if rows.size == 0:
            return 0.0
        for value in self._components.values():
            worst = max(worst, float(np.max(np.abs(value.evaluate_many(rows, tolerances)))))
        return worst


def _as_field(chart: Chart, value: Coefficient) -> ScalarField:
    if isinstance(value, ScalarField):
        if value.chart != chart:
            raise ChartMismatch(f"coefficient on {value.chart.names}, expected {chart.names}")
        return value
    return ScalarField.constant(chart, value)


def parse_key(text: str) -> Key:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ParseError(f"component key {text!r} is not a comma-separated index list") from None


def format_key(key: Key) -> str:
    return ",".join(str(i) for i in key)


def _same_chart(a: Multivector, b: Multivector) -> None:
    if a.chart != b.chart:
        raise ChartMismatch(f"multivectors on different charts: {a.chart.names} vs {b.chart.names}")


def wedge(a: Multivector, b: Multivector) -> Multivector:
    """Exterior product; ``a ^ b = (-1)**(p*q) b ^ a``."""
    _same_chart(a, b)
    degree = a.degree + b.degree
    if degree > a.chart.dim:
        return Multivector.zero(a.chart, degree)
    out: dict[Key, ScalarField] = {}
    for ka, va in a._components.items():
        for kb, vb in b._components.items():
            if set(ka) & set(kb):
                continue
            sign = _merge_sign(ka, kb)
            key = tuple(sorted(ka + kb))
            term = va * vb if sign > 0 else -(va * vb)
            out[key] = out[key] + term if key in out else term
    return Multivector._raw(a.chart, degree, out)


def schouten(a: Multivector, b: Multivector) -> Multivector:
    """Schouten bracket ``[[a, b]]`` of degree ``p + q - 1`` (see module docstring)."""
    _same_chart(a, b)
    p, q = a.degree, b.degree
    if p == 0 and q == 0:
        raise DegreeUnderflow("the schouten bracket of two functions has degree -1")
    degree = p + q - 1
    result = Multivector.zero(a.chart, degree)
    if degree > a.chart.dim or (a.is_zero or b.is_zero):
        return result
    sign = -1 if (p * q) % 2 else 1
    for k in range(a.chart.dim):
        if p > 0:
            result = result + wedge(a.odd_partial(k), b.partial(k))
        if q > 0:
            term = wedge(b.odd_partial(k), a.partial(k))
            result = result + term if sign > 0 else result - term
    return result


def lie_derivative(x: Multivector, a: Multivector) -> Multivector:
    """``L_X A = [[X, A]]``; for a function this is the directional derivative."""
    if x.degree != 1:
        raise WrongDegree(f"lie derivative needs a vector field, got degree {x.degree}")
    return schouten(x, a)


def contract_covector(a: Multivector, covector: Sequence[ScalarField]) -> Multivector:
    """Insert the 1-form ``sum_i c_i dx_i`` into the first slot of ``a``."""
    if a.degree == 0:
        raise TooManyArguments("cannot contract a function with a covector")
    result = Multivector.zero(a.chart, a.degree - 1)
    for i, c in enumerate(covector):
        if not c.is_zero:
            result = result + c * a.odd_partial(i)
    return result


def contract_differentials(a: Multivector, fs: Sequence[ScalarField]) -> Multivector:
    """``A(df_1, ..., df_k, .)``: substitute the differentials into the first slots."""
    if len(fs) > a.degree:
        raise TooManyArguments(f"{len(fs)} differentials for a degree-{a.degree} multivector")
    result = a
    for f in fs:
        if f.chart != a.chart:
            raise ChartMismatch(f"function on {f.chart.names}, expected {a.chart.names}")
        result = contract_covector(result, f.gradient())
    return result


@dataclass(frozen=True)
class DiffeoMap:
    """A map of the chart into itself, with optional inverse and Jacobian."""

    chart: Chart
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def identity(cls, chart: Chart) -> DiffeoMap:
        return cls(
            chart,
            forward=lambda x: np.array(x, dtype=float),
            inverse=lambda x: np.array(x, dtype=float),
            jacobian=lambda x: np.eye(len(x)),
        )

    @classmethod
    def from_fields(
        cls,
        forward: Sequence[ScalarField],
        inverse: Sequence[ScalarField] | None = None,
    ) -> DiffeoMap:
        """Map given by component functions; the Jacobian is exact when they are."""
        chart = forward[0].chart
        jac = [[f.partial(j) for j in range(chart.dim)] for f in forward]

        def fwd(x: np.ndarray) -> np.ndarray:
            return np.array([f(x) for f in forward])

        def jacobian(x: np.ndarray) -> np.ndarray:
            return np.array([[d(x) for d in row] for row in jac])

        inv: Callable[[np.ndarray], np.ndarray] | None = None
        if inverse is not None:
            inverse_fields = list(inverse)

            def inv(x: np.ndarray) -> np.ndarray:
                return np.array([f(x) for f in inverse_fields])

        return cls(chart, forward=fwd, inverse=inv, jacobian=jacobian)

    def __call__(self, x: PointLike) -> np.ndarray:
        return np.asarray(self.forward(as_coords(self.chart, x)), dtype=float)

    def jacobian_at(self, x: PointLike, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
        """Supplied Jacobian, or central differences with the scalar step policy."""
        coords = as_coords(self.chart, x)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(coords), dtype=float)
        n = self.chart.dim
        jac = np.empty((n, n))
        for j in range(n):
            h = max(tolerances.fd_step, tolerances.fd_step * abs(coords[j]))
            xp = coords.copy()
            xm = coords.copy()
            xp[j] += h
            xm[j] -= h
            jac[:, j] = (np.asarray(self.forward(xp)) - np.asarray(self.forward(xm))) / (2 * h)
        return jac


def transport_components(
    values: Mapping[Key, float], matrix: np.ndarray, degree: int
) -> dict[Key, float]:
    """Apply ``matrix`` to every slot of an antisymmetric tensor given by components.

    Uses Cauchy-Binet: the ``I`` component is ``sum_J det(M[I, J]) * A^J``.
    """
    n = matrix.shape[0]
    if degree == 0:
        return dict(values)
    out: dict[Key, float] = {}
    for target in itertools.combinations(range(n), degree):
        total = 0.0
        for source, value in values.items():
            total += float(np.linalg.det(matrix[np.ix_(target, source)])) * value
        if total != 0.0:
            out[target] = total
    return out


def pullback_at(
    a: Multivector,
    gamma: DiffeoMap,
    x: PointLike,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> dict[Key, float]:
    """Components of ``gamma^* A`` at ``x``: ``(D gamma_x)^{-1}`` applied to ``A(gamma(x))``."""
    if gamma.chart != a.chart:
        raise ChartMismatch(f"map on {gamma.chart.names}, tensor on {a.chart.names}")
    coords = as_coords(a.chart, x)
    image = gamma(coords)
    if gamma.inverse is not None:
        back = np.asarray(gamma.inverse(image), dtype=float)
        if np.max(np.abs(back - coords)) > tolerances.inverse_check:
            raise MapNotInvertibleNear(f"inverse does not return to {tuple(coords.tolist())}")
    values = a.at(image, tolerances)
    if a.degree == 0:
        return values
    jac = gamma.jacobian_at(coords, tolerances)
    if np.linalg.matrix_rank(jac, tol=tolerances.rank) < a.chart.dim:
        raise JacobianSingular(f"jacobian is singular at {tuple(coords.tolist())}")
    return transport_components(values, np.linalg.inv(jac), a.degree)


def component_distance(left: Mapping[Key, float], right: Mapping[Key, float]) -> float:
    """Max-norm distance between two component dictionaries."""
    keys = set(left) | set(right)
    return max((abs(left.get(k, 0.0) - right.get(k, 0.0)) for k in keys), default=0.0)


class MultivectorModel(BaseModel):
    """Wire format ``{degree, chart, components: {"i1,i2": "expr"}}``."""

    model_config = ConfigDict(extra="forbid")

    degree: int
    chart: list[str]
    components: dict[str, str]


def to_model(a: Multivector) -> MultivectorModel:
    if not a.is_exact:
        raise TypeError("only exact multivectors can be serialized")
    return MultivectorModel(
        degree=a.degree,
        chart=list(a.chart.names),
        components={format_key(k): str(v) for k, v in a.items()},
    )


def from_model(model: MultivectorModel, chart: Chart | None = None) -> Multivector:
    target = chart if chart is not None else Chart(tuple(model.chart))
    if tuple(model.chart) != target.names:
        raise ChartMismatch(f"serialized chart {model.chart} does not match {target.names}")
    return Multivector.parse(target, model.degree, model.components)


def to_json(a: Multivector) -> str:
    return to_model(a).model_dump_json()


def from_json(text: str, chart: Chart | None = None) -> Multivector:
    return from_model(MultivectorModel.model_validate_json(text), chart)


def lift_multivector(a: Multivector, extended: Chart) -> Multivector:
    """The same tensor viewed on a chart with trailing parameter coordinates."""
    return Multivector(extended, a.degree, {k: lift(v, extended) for k, v in a.items()})


def specialize_multivector(a: Multivector, base: Chart, value: Scalar) -> Multivector:
    """Fix the trailing parameter of a family defined on ``with_parameter(base)``."""
    out: dict[Key, ScalarField] = {}
    for key, v in a.items():
        if any(i >= base.dim for i in key):
            raise WrongDegree(f"component {key} points along the parameter direction")
        out[key] = specialize(v, base, value)
    return Multivector(base, a.degree, out)
