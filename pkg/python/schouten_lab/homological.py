"""Lie-transform recursion and the leafwise solver for ``[[X, Psi]] = Phi``.

Series use the Taylor convention ``A_eps = sum_i eps**i / i! * A_i``.

The solver works on a :class:`FoliationData`: a Poisson tensor of constant
rank whose leaves are cut out by Casimirs ``k_i``, together with dual fields
``V_i`` (``V_i(k_j) = delta_ij``). In an *adapted* chart the Casimirs do not
depend on the leaf coordinates, so a leaf is the set where the transverse
coordinates are frozen and leafwise calculus is ordinary calculus in the leaf
coordinates; results stay exact there. Otherwise each leaf is treated as a
graph over the leaf coordinates: forms are pulled back along the graph and
the radial homotopy runs on the leaf itself, found by Newton continuation,
so primitives are numeric.

Sign facts used below (see :mod:`schouten_lab.multivector`)::

    (Psi# a)^{j1..jr} = sum Psi^{j1 k1} ... Psi^{jr kr} a_{k1..kr}
    X_f   = [[Psi, f]] = -Psi# df
    [[Psi# b, Psi]]    = -Psi# db
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
from collections import defaultdict
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict

from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import (
    ChartMismatch,
    DomainExit,
    FoliationNotAdapted,
    InsufficientSeriesOrder,
    LeafMatrixSingular,
    NotClosed,
    NotClosedVertical,
    NotCocycle,
    NotHamiltonian,
    NotHamiltonianObstruction,
    NotVertical,
    WrongDegree,
)
from schouten_lab.multivector import (
    Key,
    Multivector,
    MultivectorModel,
    contract_differentials,
    from_model,
    schouten,
    specialize_multivector,
    to_model,
    wedge,
)
from schouten_lab.poisson import PoissonTensor, Verdict, hamiltonian_vf, measure, rank_at
from schouten_lab.sampling import sample_points
from schouten_lab.scalar import Chart, ScalarField, as_fraction

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Series


@dataclass(frozen=True)
class DeformationSeries:
    """Taylor coefficients ``A_0..A_N`` of an eps-family of multivectors."""

    coefficients: tuple[Multivector, ...]

    def __post_init__(self) -> None:
        if not self.coefficients:
            raise InsufficientSeriesOrder("a deformation series needs at least A_0")
        first = self.coefficients[0]
        for a in self.coefficients[1:]:
            if a.chart != first.chart:
                raise ChartMismatch("series coefficients live on different charts")
            if a.degree != first.degree:
                raise WrongDegree("series coefficients have different degrees")

    @classmethod
    def from_powers(cls, powers: Sequence[Multivector]) -> DeformationSeries:
        """From ``A_eps = sum_i eps**i * B_i`` (plain power coefficients)."""
        return cls(tuple(math.factorial(i) * b for i, b in enumerate(powers)))

    @classmethod
    def constant(cls, a: Multivector) -> DeformationSeries:
        return cls((a,))

    @property
    def chart(self) -> Chart:
        return self.coefficients[0].chart

    @property
    def degree(self) -> int:
        return self.coefficients[0].degree

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def coefficient(self, i: int) -> Multivector:
        """``A_i``, zero beyond the stored order (finite families)."""
        if i < len(self.coefficients):
            return self.coefficients[i]
        return Multivector.zero(self.chart, self.degree)

    def at(self, eps: float | Fraction) -> Multivector:
        """The truncated sum at a fixed parameter value."""
        total = Multivector.zero(self.chart, self.degree)
        for i, a in enumerate(self.coefficients):
            total = total + (as_fraction(eps) ** i / math.factorial(i)) * a
        return total

    def padded(self, order: int) -> DeformationSeries:
        """Same family with explicit zero coefficients up to ``A_order``."""
        if order <= self.order:
            return self
        return DeformationSeries(
            self.coefficients + (Multivector.zero(self.chart, self.degree),) * (order - self.order)
        )

    def derivative(self) -> DeformationSeries:
        """Series of ``dA_eps/deps``."""
        if len(self.coefficients) == 1:
            return DeformationSeries((Multivector.zero(self.chart, self.degree),))
        return DeformationSeries(self.coefficients[1:])


@dataclass(frozen=True)
class ParametrizedFamily:
    """An eps-family kept whole: ``body`` lives on ``with_parameter(base)``.

    Used where the family is rational rather than polynomial in eps.
    """

    body: Multivector
    base: Chart

    def __post_init__(self) -> None:
        ext = self.body.chart
        if ext.dim != self.base.dim + 1 or ext.names[:-1] != self.base.names:
            raise ChartMismatch(f"{ext.names} is not {self.base.names} plus one parameter")

    @property
    def chart(self) -> Chart:
        return self.base

    @property
    def degree(self) -> int:
        return self.body.degree

    def at(self, eps: float | Fraction) -> Multivector:
        return specialize_multivector(self.body, self.base, eps)

    def derivative(self) -> ParametrizedFamily:
        return ParametrizedFamily(self.body.partial(self.base.dim), self.base)

    def taylor(self, order: int) -> DeformationSeries:
        """Coefficients ``A_i = d^i A / deps^i`` at zero, ``i = 0..order``."""
        coefficients = []
        current = self.body
        for _ in range(order + 1):
            coefficients.append(specialize_multivector(current, self.base, 0))
            current = current.partial(self.base.dim)
        return DeformationSeries(tuple(coefficients))


@dataclass(frozen=True)
class GeneratorSeries:
    """Taylor coefficients ``X_0..X_{N-1}`` of the generating vector field."""

    coefficients: tuple[Multivector, ...]

    def __post_init__(self) -> None:
        for x in self.coefficients:
            if x.degree != 1:
                raise WrongDegree(f"generators are vector fields, got degree {x.degree}")
        if len({x.chart for x in self.coefficients}) > 1:
            raise ChartMismatch("generator coefficients live on different charts")

    def coefficient(self, i: int, chart: Chart) -> Multivector:
        if i < len(self.coefficients):
            return self.coefficients[i]
        return Multivector.zero(chart, 1)

    def at(self, eps: float | Fraction, chart: Chart) -> Multivector:
        total = Multivector.zero(chart, 1)
        for i, x in enumerate(self.coefficients):
            total = total + (as_fraction(eps) ** i / math.factorial(i)) * x
        return total


def recursive_rhs(k: int, series: DeformationSeries, gens: GeneratorSeries) -> Multivector:
    """Right-hand side of the order-``k`` homological equation ``[[X_k, A_0]] = RHS``.

    ``RHS = -sum_{i=1..k} C(k, i) [[X_{k-i}, A_i]] - A_{k+1}``.

    Raises:
        InsufficientSeriesOrder: if fewer than ``k`` generators or ``k + 2``
            series coefficients are available.
    """
    if k < 0:
        raise InsufficientSeriesOrder(f"order must be non-negative, got {k}")
    if len(gens.coefficients) < k:
        raise InsufficientSeriesOrder(f"order {k} needs X_0..X_{k - 1}")
    if len(series.coefficients) < k + 2:
        raise InsufficientSeriesOrder(f"order {k} needs A_0..A_{k + 1}")
    rhs = -series.coefficients[k + 1]
    for i in range(1, k + 1):
        rhs = rhs - math.comb(k, i) * schouten(gens.coefficients[k - i], series.coefficients[i])
    return rhs


def homological_residual(
    gens: GeneratorSeries, series: DeformationSeries, order: int
) -> list[Multivector]:
    """Defects ``[[X_k, A_0]] - RHS_k`` for ``k = 0..order-1``."""
    a0 = series.coefficients[0]
    return [
        schouten(gens.coefficients[k], a0) - recursive_rhs(k, series, gens) for k in range(order)
    ]


def transform_tensor(gens: GeneratorSeries, c: Multivector, k: int) -> DeformationSeries:
    """First-order transformed series ``C + sum_{i=1..k} eps**i/i! [[X_{i-1}, C]]``."""
    if len(gens.coefficients) < k:
        raise InsufficientSeriesOrder(f"order {k} needs X_0..X_{k - 1}")
    return DeformationSeries(
        (c, *(schouten(gens.coefficients[i - 1], c) for i in range(1, k + 1)))
    )


def lie_transform(gens: GeneratorSeries, c: Multivector, order: int) -> DeformationSeries:
    """Taylor coefficients of ``gamma_eps^* C`` up to ``order``.

    ``gamma`` is the flow of the truncated generator series; coefficients are
    ``(D^n C)|_0`` with ``D G = dG/deps + [[X_eps, G]]``, computed on Taylor
    lists. Generators past the stored ones count as zero.
    """
    chart = c.chart
    current: list[Multivector] = [c] + [Multivector.zero(chart, c.degree)] * order
    out = [c]
    for n in range(order):
        length = order - n
        nxt = []
        for i in range(length):
            term = current[i + 1]
            for a in range(i + 1):
                x = gens.coefficient(a, chart)
                if not x.is_zero and not current[i - a].is_zero:
                    term = term + math.comb(i, a) * schouten(x, current[i - a])
            nxt.append(term)
        current = nxt
        out.append(current[0])
    return DeformationSeries(tuple(out))


# --------------------------------------------------------------------------
# Vertical forms and foliations


@dataclass(frozen=True)
class VerticalForm:
    """A covariant antisymmetric field, read modulo forms vanishing on leaves.

    Components share the sparse increasing-key storage (and thus the sign
    rules) of :class:`Multivector`; only the interpretation is covariant.
    """

    body: Multivector

    @classmethod
    def from_components(
        cls, chart: Chart, degree: int, components: dict[Key, Any] | None = None
    ) -> VerticalForm:
        return cls(Multivector(chart, degree, components or {}))

    @classmethod
    def differential(cls, f: ScalarField) -> VerticalForm:
        return cls(Multivector.vector_field(f.chart, list(f.gradient())))

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> VerticalForm:
        return cls(Multivector.zero(chart, degree))

    @property
    def chart(self) -> Chart:
        return self.body.chart

    @property
    def degree(self) -> int:
        return self.body.degree

    @property
    def is_zero(self) -> bool:
        return self.body.is_zero

    @property
    def is_exact(self) -> bool:
        return self.body.is_exact

    def __getitem__(self, key: Sequence[int]) -> ScalarField:
        return self.body[key]

    def __add__(self, other: VerticalForm) -> VerticalForm:
        return VerticalForm(self.body + other.body)

    def __sub__(self, other: VerticalForm) -> VerticalForm:
        return VerticalForm(self.body - other.body)

    def __neg__(self) -> VerticalForm:
        return VerticalForm(-self.body)

    def __mul__(self, factor: object) -> VerticalForm:
        return VerticalForm(self.body * factor)

    __rmul__ = __mul__

    def restricted(self, indices: Sequence[int]) -> VerticalForm:
        """Keep only components whose keys lie inside ``indices``."""
        allowed = set(indices)
        return VerticalForm(
            Multivector(
                self.chart,
                self.degree,
                {k: v for k, v in self.body.components.items() if set(k) <= allowed},
            )
        )

    def __str__(self) -> str:
        return str(self.body)


@dataclass(frozen=True)
class FoliationData:
    """Constant-rank Poisson tensor with Casimirs, dual fields and a leaf chart."""

    poisson: PoissonTensor
    casimirs: tuple[ScalarField, ...]
    duals: tuple[Multivector, ...]
    leaf_indices: tuple[int, ...]
    star_center: tuple[float, ...] | None = None
    _cache: dict[str, Any] = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self) -> None:
        chart = self.poisson.chart
        if len(self.casimirs) != len(self.duals):
            raise ValueError(
                f"{len(self.casimirs)} casimirs but {len(self.duals)} dual vector fields"
            )
        for i in self.leaf_indices:
            chart.check_index(i)
        if len(self.leaf_indices) % 2:
            raise ValueError("symplectic leaves have even dimension")
        if self.star_center is not None and len(self.star_center) != chart.dim:
            raise ValueError(f"star center needs {chart.dim} coordinates")
        for v in self.duals:
            if v.degree != 1 or v.chart != chart:
                raise WrongDegree("dual fields must be vector fields on the poisson chart")

    @property
    def chart(self) -> Chart:
        return self.poisson.chart

    @property
    def psi(self) -> Multivector:
        return self.poisson.body

    @property
    def leaf_rank(self) -> int:
        return len(self.leaf_indices)

    @property
    def transverse_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.chart.dim) if i not in self.leaf_indices)

    def center(self) -> tuple[Fraction, ...]:
        """Star center as exact rationals (origin by default)."""
        if self.star_center is None:
            return (Fraction(0),) * self.chart.dim
        return tuple(as_fraction(float(c)) for c in self.star_center)

    @property
    def is_adapted(self) -> bool:
        return len(self.transverse_indices) == len(self.casimirs) and all(
            k.is_exact and not any(k.depends_on(i) for i in self.leaf_indices)
            for k in self.casimirs
        )

    @property
    def is_leaf_graph(self) -> bool:
        """Leaves are graphs ``x_T = g(x_L)``: one exact Casimir per transverse coordinate.

        Every adapted chart is a leaf graph. The transverse block of the Casimir
        Jacobian must also be invertible, which is checked pointwise.
        """
        return len(self.transverse_indices) == len(self.casimirs) and all(
            k.is_exact for k in self.casimirs
        )

    def require_leaf_graph(self) -> None:
        if not self.is_leaf_graph:
            raise FoliationNotAdapted(
                f"leaves are not graphs over the leaf coordinates {self.leaf_indices}"
            )

    def check(
        self, points: np.ndarray, tolerances: Tolerances = DEFAULT_TOLERANCES
    ) -> dict[str, Verdict]:
        """Duality, Casimir and constant-rank conditions on the sample points."""
        out: dict[str, Verdict] = {}
        worst = 0.0
        exact = True
        for i, v in enumerate(self.duals):
            for j, k in enumerate(self.casimirs):
                residual = schouten(v, Multivector.scalar(k)) - Multivector.scalar(
                    ScalarField.constant(self.chart, int(i == j))
                )
                verdict = measure(residual, points, tolerances.duality, tolerances)
                worst = max(worst, verdict.defect)
                exact = exact and verdict.exact
        out["duality"] = Verdict(worst <= tolerances.duality, worst, exact)
        worst, exact = 0.0, True
        for k in self.casimirs:
            verdict = measure(
                schouten(self.psi, Multivector.scalar(k)), points, tolerances.casimir_sampled
            )
            worst = max(worst, verdict.defect)
            exact = exact and verdict.exact
        out["casimir"] = Verdict(worst <= tolerances.casimir_sampled, worst, exact)
        ranks = {rank_at(self.psi, x, tolerances) for x in points}
        stray = ranks - {self.leaf_rank}
        out["rank"] = Verdict(not stray, float(len(stray)), False)
        return out

    def forms_agree(self, a: VerticalForm, b: VerticalForm) -> bool:
        """Vertical forms are equal when they agree on Hamiltonian fields."""
        return sharp(self, a - b).is_zero


# --------------------------------------------------------------------------
# Matrix helpers over scalar fields


def field_det(m: Sequence[Sequence[ScalarField]]) -> ScalarField:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total: ScalarField | None = None
    for j in range(n):
        if m[0][j].is_zero:
            continue
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        term = m[0][j] * field_det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total if total is not None else ScalarField.zero(m[0][0].chart)


def field_inverse(m: Sequence[Sequence[ScalarField]]) -> list[list[ScalarField]]:
    n = len(m)
    det = field_det(m)
    if det.is_zero:
        raise LeafMatrixSingular("leaf block of the poisson matrix is singular")
    out: list[list[ScalarField]] = [[det] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [
                [m[r][c] for c in range(n) if c != i] for r in range(n) if r != j
            ]
            cof = field_det(minor) if n > 1 else ScalarField.one(det.chart)
            out[i][j] = (cof if (i + j) % 2 == 0 else -cof) / det
    return out


def _apply_tensorially(
    matrix: Sequence[Sequence[ScalarField]], values: Multivector, chart: Chart
) -> Multivector:
    """``out^J = sum_K det(M[J, K]) v^K`` (the matrix acting on every slot)."""
    r = values.degree
    if r == 0:
        return values
    out: dict[Key, ScalarField] = {}
    for target in itertools.combinations(range(chart.dim), r):
        total: ScalarField | None = None
        for source, value in values.components.items():
            sub = [[matrix[j][k] for k in source] for j in target]
            if all(entry.is_zero for row in sub for entry in row):
                continue
            term = field_det(sub) * value
            total = term if total is None else total + term
        if total is not None:
            out[target] = total
    return Multivector(chart, r, out)


def _poisson_matrix(fol: FoliationData) -> list[list[ScalarField]]:
    psi = fol.psi
    n = fol.chart.dim
    return [[psi[(i, j)] for j in range(n)] for i in range(n)]


def _generalized_inverse(fol: FoliationData) -> list[list[ScalarField]]:
    """Inverse of the leaf block, embedded in a full ``dim x dim`` matrix."""
    cached = fol._cache.get("q")
    if cached is not None:
        return cached  # type: ignore[no-any-return]
    p = _poisson_matrix(fol)
    leaf = fol.leaf_indices
    inv = field_inverse([[p[i][j] for j in leaf] for i in leaf])
    zero = ScalarField.zero(fol.chart)
    n = fol.chart.dim
    q = [[zero] * n for _ in range(n)]
    for a, i in enumerate(leaf):
        for b, j in enumerate(leaf):
            q[i][j] = inv[a][b]
    fol._cache["q"] = q
    return q


# --------------------------------------------------------------------------
# Sharp correspondence


def sharp(fol: FoliationData, alpha: VerticalForm) -> Multivector:
    """``Psi# alpha``: the vertical multivector with ``(Psi# a)(df..) = a(X_f, ..)``."""
    if alpha.chart != fol.chart:
        raise ChartMismatch(f"form on {alpha.chart.names}, foliation on {fol.chart.names}")
    return _apply_tensorially(_poisson_matrix(fol), alpha.body, fol.chart)


def _sample(fol: FoliationData, points: np.ndarray | None, tolerances: Tolerances) -> np.ndarray:
    if points is not None:
        return points
    return sample_points(fol.chart, tolerances.samples, seed=0)


def vertical_defect(
    fol: FoliationData,
    a: Multivector,
    points: np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Verdict:
    """How far ``a`` is from annihilating every Casimir differential."""
    if a.degree == 0:
        return Verdict(True, 0.0, a.is_exact)
    worst = 0.0
    exact = True
    holds = True
    for k in fol.casimirs:
        residual = contract_differentials(a, [k])
        pts = points if residual.is_exact else _sample(fol, points, tolerances)
        verdict = measure(residual, pts, tolerances.vertical, tolerances)
        holds = holds and verdict.holds
        worst = max(worst, verdict.defect)
        exact = exact and verdict.exact
    return Verdict(holds, worst, exact)


def sharp_invert(
    fol: FoliationData,
    a: Multivector,
    require_vertical: bool = True,
    points: np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> VerticalForm:
    """A vertical form ``alpha`` with ``sharp(alpha) = a`` on the leaf distribution.

    Uses ``Q``, the inverse of the leaf block of ``Psi`` padded with zeros;
    ``Psi Q Psi = Psi`` at constant rank, so ``Psi# Q a = a`` for vertical ``a``.

    Raises:
        NotVertical: if ``require_vertical`` and ``a`` fails to annihilate
            some ``dk_i``.
        LeafMatrixSingular: if the leaf block is not invertible.
    """
    if a.chart != fol.chart:
        raise ChartMismatch(f"tensor on {a.chart.names}, foliation on {fol.chart.names}")
    if require_vertical:
        verdict = vertical_defect(fol, a, points, tolerances)
        if not verdict.holds:
            raise NotVertical(f"tensor is not vertical (defect {verdict.defect:.3e})")
    q = _generalized_inverse(fol)
    return VerticalForm(_apply_tensorially(q, a, fol.chart))


# --------------------------------------------------------------------------
# Leafwise calculus


def _exterior_d(form: Multivector, indices: Iterable[int]) -> Multivector:
    out = Multivector.zero(form.chart, form.degree + 1)
    for i in indices:
        out = out + wedge(Multivector.basis(form.chart, i), form.partial(i))
    return out


def vertical_d(fol: FoliationData, alpha: VerticalForm) -> VerticalForm:
    """Leafwise exterior derivative.

    In an adapted chart this is ``sum_{l in leaf} dx_l ^ d_l alpha`` on the
    leaf components. Otherwise the full exterior derivative of the
    representative is returned; it restricts to the leafwise one on every leaf.
    """
    fol.require_leaf_graph()
    if fol.is_adapted:
        base = alpha.restricted(fol.leaf_indices).body
        return VerticalForm(_exterior_d(base, fol.leaf_indices))
    return VerticalForm(_exterior_d(alpha.body, range(fol.chart.dim)))


def _radial_integral(
    f: ScalarField,
    power: int,
    fol: FoliationData,
    tolerances: Tolerances,
) -> ScalarField:
    """``int_0^1 t**power f(c + t (x - c)) dt`` with only leaf coordinates scaled."""
    chart = f.chart
    center = fol.center()
    leaf = fol.leaf_indices
    if f.is_exact and f.is_polynomial_in(leaf):
        t = sympy.Dummy("t")
        symbols = chart.symbols
        subs = {
            symbols[i]: sympy.Rational(center[i].numerator, center[i].denominator)
            + t * (symbols[i] - sympy.Rational(center[i].numerator, center[i].denominator))
            for i in leaf
        }
        numer = f.exact.numer.as_expr().subs(subs, simultaneous=True)
        denom = f.exact.denom.as_expr()
        poly = sympy.Poly(sympy.expand(numer), t)
        total = sum(
            (coeff / (n + power + 1) for (n,), coeff in poly.terms()), sympy.Integer(0)
        )
        return ScalarField.from_expr(chart, total / denom)
    nodes, weights = np.polynomial.legendre.leggauss(tolerances.quadrature_nodes)
    ts = 0.5 * (nodes + 1.0)
    ws = 0.5 * weights
    c = np.array([float(v) for v in center])
    mask = np.zeros(chart.dim, dtype=bool)
    mask[list(leaf)] = True
    g = f.as_numeric()

    def evaluator(x: np.ndarray) -> float:
        total = 0.0
        for tk, wk in zip(ts, ws, strict=True):
            y = np.where(mask, c + tk * (x - c), x)
            total += wk * tk**power * g(y)
        return total

    return ScalarField.numeric(chart, evaluator)


# --------------------------------------------------------------------------
# Leaf graphs (charts that are not adapted)

LEAF_NEWTON_STEPS = 40


@dataclass(frozen=True)
class _LeafGraph:
    """Leaves as graphs ``x_T = g(x_L)`` over the leaf coordinates.

    ``levels`` and ``jacobian`` are the compiled Casimir values and their
    differentials; the transverse block of the Jacobian must be invertible.
    """

    leaf: list[int]
    transverse: list[int]
    levels: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def of(cls, fol: FoliationData) -> _LeafGraph:
        cached = fol._cache.get("graph")
        if cached is not None:
            return cached  # type: ignore[no-any-return]
        fol.require_leaf_graph()
        symbols = fol.chart.symbols
        values = sympy.lambdify(symbols, [k.to_expr() for k in fol.casimirs], modules="numpy")
        gradients = sympy.lambdify(
            symbols,
            [[k.partial(i).to_expr() for i in range(fol.chart.dim)] for k in fol.casimirs],
            modules="numpy",
        )
        graph = cls(
            sorted(fol.leaf_indices),
            list(fol.transverse_indices),
            lambda x: np.asarray(values(*x), dtype=float),
            lambda x: np.asarray(gradients(*x), dtype=float),
        )
        fol._cache["graph"] = graph
        return graph

    def tangent(self, x: np.ndarray) -> np.ndarray:
        """``dim x leaf_rank`` frame ``dx / dx_L`` of the leaf through ``x``."""
        grad = self.jacobian(x)
        frame = np.zeros((grad.shape[1], len(self.leaf)))
        frame[self.leaf, np.arange(len(self.leaf))] = 1.0
        try:
            frame[self.transverse] = -np.linalg.solve(
                grad[:, self.transverse], grad[:, self.leaf]
            )
        except np.linalg.LinAlgError as exc:
            raise LeafMatrixSingular(f"leaf is not a graph over leaf coordinates at {x}") from exc
        return frame

    def project(self, x: np.ndarray, leaf_coords: np.ndarray, levels: np.ndarray) -> np.ndarray:
        """The point over ``leaf_coords`` on the leaf ``k = levels``, by Newton from ``x``."""
        point = x.copy()
        point[self.leaf] = leaf_coords
        for _ in range(LEAF_NEWTON_STEPS):
            try:
                step = np.linalg.solve(
                    self.jacobian(point)[:, self.transverse], self.levels(point) - levels
                )
            except np.linalg.LinAlgError as exc:
                raise DomainExit(f"leaf graph degenerates at {point}") from exc
            point[self.transverse] -= step
            if not np.all(np.isfinite(point)):
                break
            if np.max(np.abs(step)) <= 1e-14 * (1.0 + np.max(np.abs(point[self.transverse]))):
                return point
        raise DomainExit(f"leaf through {x} has no point over {leaf_coords}")


def _parity(perm: Sequence[int]) -> int:
    inversions = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
    return -1 if inversions % 2 else 1


def _pulled_back(values: Mapping[Key, float], frame: np.ndarray, degree: int) -> np.ndarray:
    """Antisymmetric component array of a form pulled back along ``frame``."""
    full = np.zeros((frame.shape[0],) * degree)
    for key, value in values.items():
        for perm in itertools.permutations(range(degree)):
            full[tuple(key[p] for p in perm)] = _parity(perm) * value
    for _ in range(degree):
        full = np.tensordot(full, frame, axes=([0], [0]))
    return full


def _component_values(form: Multivector) -> Callable[[np.ndarray], dict[Key, float]]:
    """All components at a point; exact components are compiled together."""
    keys = list(form.components)
    fields = [form.components[k] for k in keys]
    if all(f.is_exact for f in fields):
        compiled = sympy.lambdify(
            form.chart.symbols, [f.to_expr() for f in fields], modules="numpy"
        )
        return lambda x: dict(zip(keys, (float(v) for v in compiled(*x)), strict=True))
    return lambda x: {k: f(x) for k, f in zip(keys, fields, strict=True)}


def _graph_homotopy(
    fol: FoliationData, alpha: VerticalForm, tolerances: Tolerances
) -> VerticalForm:
    """Radial homotopy run on the leaf through each point.

    The path ``x_L(t) = c_L + t (x_L - c_L)`` is lifted to the leaf by Newton
    continuation from ``t = 1``. ``alpha`` is pulled back along the graph and
    ``int_0^1 t**(r-1) iota_v alpha dt`` is taken by Gauss-Legendre, with
    ``v = x_L - c_L``.
    """
    graph = _LeafGraph.of(fol)
    r = alpha.degree
    m = len(graph.leaf)
    nodes, weights = np.polynomial.legendre.leggauss(tolerances.quadrature_nodes)
    ts = 0.5 * (nodes[::-1] + 1.0)
    ws = 0.5 * weights[::-1]
    center = np.array([float(c) for c in fol.center()])[graph.leaf]
    components = _component_values(alpha.body)

    @functools.lru_cache(maxsize=1024)
    def primitive(raw: bytes) -> np.ndarray:
        x = np.frombuffer(raw, dtype=float).copy()
        levels = graph.levels(x)
        v = x[graph.leaf] - center
        total = np.zeros((m,) * (r - 1))
        point = x
        for t, w in zip(ts, ws, strict=True):
            point = graph.project(point, center + t * v, levels)
            pulled = _pulled_back(components(point), graph.tangent(point), r)
            total += w * t ** (r - 1) * np.tensordot(v, pulled, axes=([0], [0]))
        return total

    def component(local: tuple[int, ...]) -> ScalarField:
        def evaluator(x: np.ndarray) -> float:
            return float(primitive(np.ascontiguousarray(x, dtype=float).tobytes())[local])

        return ScalarField.numeric(fol.chart, evaluator)

    out = {
        tuple(graph.leaf[i] for i in local): component(local)
        for local in itertools.combinations(range(m), r - 1)
    }
    return VerticalForm(Multivector(fol.chart, r - 1, out))


def _homotopy(fol: FoliationData, alpha: VerticalForm, tolerances: Tolerances) -> VerticalForm:
    if not fol.is_adapted:
        return _graph_homotopy(fol, alpha, tolerances)
    r = alpha.degree
    base = alpha.restricted(fol.leaf_indices).body
    pulled = base.map_components(lambda v: _radial_integral(v, r - 1, fol, tolerances))
    center = fol.center()
    out = Multivector.zero(fol.chart, r - 1)
    for l_index in fol.leaf_indices:
        radial = ScalarField.coordinate(fol.chart, l_index) - center[l_index]
        out = out + radial * pulled.odd_partial(l_index)
    return VerticalForm(out)


def _leaf_defect(
    fol: FoliationData,
    form: Multivector,
    points: np.ndarray | None,
    tol: float,
    tolerances: Tolerances,
) -> Verdict:
    """How far ``form`` is from vanishing on the leaves.

    Off adapted charts the form is pulled back to each sample point's leaf;
    the defect there is relative to the size of the components.
    """
    if fol.is_adapted:
        base = VerticalForm(form).restricted(fol.leaf_indices).body
        pts = points if base.is_exact else _sample(fol, points, tolerances)
        return measure(base, pts, tol, tolerances)
    if form.is_zero:
        return Verdict(True, 0.0, True)
    graph = _LeafGraph.of(fol)
    values_at = _component_values(form)
    worst = 0.0
    for row in _sample(fol, points, tolerances):
        x = np.asarray(row, dtype=float)
        values = values_at(x)
        frame = graph.tangent(x)
        pulled = _pulled_back(values, frame, form.degree)
        scale = 1.0 + max(map(abs, values.values()), default=0.0) * float(
            np.max(np.abs(frame))
        ) ** form.degree
        worst = max(worst, float(np.max(np.abs(pulled), initial=0.0)) / scale)
    return Verdict(worst <= tol, worst, False)


def _closed(
    fol: FoliationData,
    alpha: VerticalForm,
    points: np.ndarray | None,
    tolerances: Tolerances,
) -> Verdict:
    d_alpha = vertical_d(fol, alpha)
    return _leaf_defect(fol, d_alpha.body, points, tolerances.closedness, tolerances)


def homotopy_primitive(
    fol: FoliationData,
    alpha: VerticalForm,
    points: np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> VerticalForm:
    """A leafwise primitive ``beta`` with ``vertical_d(beta) = alpha``.

    Radial homotopy about the star center. In an adapted chart it is exact
    when the components are polynomial in the leaf coordinates and
    Gauss-Legendre otherwise; off adapted charts it is always numeric.

    Raises:
        NotClosed: if ``alpha`` is not leafwise closed.
    """
    if alpha.degree == 0:
        raise WrongDegree("a function has no primitive")
    verdict = _closed(fol, alpha, points, tolerances)
    if not verdict.holds:
        raise NotClosed(f"form is not closed along leaves (defect {verdict.defect:.3e})")
    return _homotopy(fol, alpha, tolerances)


ANSATZ_UNKNOWNS = 2000


def _polynomial_potential(fol: FoliationData, y: Multivector) -> ScalarField | None:
    """Exact ``h = P / D`` with ``[[Psi, h]] = Y`` by undetermined coefficients.

    ``D`` is the common denominator of ``Y``. When it is a Casimir of a
    polynomial ``Psi`` the equation ``[[Psi, P]] = D Y`` is linear in the
    coefficients of ``P``. Returns None when any of this fails.
    """
    chart, psi = fol.chart, fol.psi
    if not (y.is_exact and psi.is_exact):
        return None
    denominator = functools.reduce(
        sympy.lcm, (v.exact.denom.as_expr() for v in y.components.values()), sympy.Integer(1)
    )
    d = ScalarField.from_expr(chart, denominator)
    if not hamiltonian_vf(psi, d).is_zero:
        return None
    symbols = chart.symbols

    def as_poly(f: ScalarField) -> sympy.Poly:
        if not f.exact.denom.is_ground:
            raise ValueError("not a polynomial")
        return sympy.Poly(f.to_expr(), *symbols, domain="QQ")

    try:
        matrix = [[as_poly(e) for e in row] for row in _poisson_matrix(fol)]
        target = {key[0]: as_poly(v * d) for key, v in y.items()}
    except ValueError:
        return None
    psi_degrees = [sum(m) for row in matrix for p in row if not p.is_zero for m in p.monoms()]
    target_degrees = [sum(m) for p in target.values() if not p.is_zero for m in p.monoms()]
    if not psi_degrees or not target_degrees:
        return None
    low = max(1, min(target_degrees) - max(psi_degrees) + 1)
    high = max(target_degrees) - min(psi_degrees) + 1
    if high < low:
        return None
    monomials = sorted(sympy.itermonomials(symbols, high, low), key=sympy.default_sort_key)
    if len(monomials) > ANSATZ_UNKNOWNS:
        logger.debug("potential ansatz needs %d unknowns; using quadrature", len(monomials))
        return None

    unknowns = [sympy.Dummy(f"a{i}") for i in range(len(monomials))]
    rows: dict[tuple[int, tuple[int, ...]], list[Any]] = defaultdict(list)
    for unknown, monomial in zip(unknowns, monomials, strict=True):
        poly = sympy.Poly(monomial, *symbols, domain="QQ")
        for i, row in enumerate(matrix):
            grad = poly.diff(symbols[i])
            if grad.is_zero:
                continue
            for j, entry in enumerate(row):
                if entry.is_zero:
                    continue
                for monom, coeff in (grad * entry).terms():
                    rows[(j, monom)].append(coeff * unknown)
    rhs = {(j, monom): coeff for j, p in target.items() for monom, coeff in p.terms()}
    equations = [
        sympy.Add(*rows.get(key, ())) - rhs.get(key, 0) for key in sorted(set(rows) | set(rhs))
    ]
    solution = sympy.linsolve(equations, unknowns)
    if solution == sympy.S.EmptySet:
        return None
    values = next(iter(solution))
    free = dict.fromkeys(unknowns, 0)
    polynomial = sympy.Add(
        *(sympy.sympify(v).xreplace(free) * m for v, m in zip(values, monomials, strict=True))
    )
    h = ScalarField.from_expr(chart, polynomial / denominator)
    if hamiltonian_vf(psi, h) != y:
        return None
    return h


def hamiltonian_potential(
    fol: FoliationData,
    y: Multivector,
    points: np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScalarField:
    """``h`` with ``[[Psi, h]] = Y``, unique up to a Casimir.

    Off adapted charts an exact polynomial-over-Casimir potential is tried
    first, then the leaf-graph homotopy.

    Raises:
        NotVertical: if ``Y`` is not tangent to the leaves.
        NotHamiltonian: if ``Psi#^{-1} Y`` is not leafwise closed.
    """
    if y.degree != 1:
        raise WrongDegree(f"hamiltonian potential needs a vector field, got degree {y.degree}")
    if y.is_zero:
        return ScalarField.zero(fol.chart)
    alpha = sharp_invert(fol, y, True, points, tolerances)
    verdict = _closed(fol, alpha, points, tolerances)
    if not verdict.holds:
        raise NotHamiltonian(f"vector field is not hamiltonian (defect {verdict.defect:.3e})")
    if not fol.is_adapted:
        h = _polynomial_potential(fol, y)
        if h is not None:
            return h
    return -_homotopy(fol, alpha, tolerances).body.scalar_value


def _closed_with_potentials(
    fol: FoliationData,
    phi: Multivector,
    potentials: Sequence[tuple[Multivector, ScalarField, Multivector]],
    points: np.ndarray | None,
    tolerances: Tolerances,
) -> Verdict:
    """Leafwise closedness of ``Psi#^{-1} Phi'`` for numeric potentials ``h_j``.

    Along leaves ``d h_j = -Psi#^{-1} Y_j``, so the differential of
    ``h_j Psi#^{-1} [[V_j, Psi]]`` needs the values of ``h_j`` and no
    derivative of them.
    """
    psi = fol.psi
    base = phi
    for y, _, v in potentials:
        base = base + wedge(y, v)
    exact_part = vertical_d(fol, sharp_invert(fol, base, False)).body
    numeric_part = Multivector.zero(fol.chart, 3)
    for y, h, v in potentials:
        gamma = sharp_invert(fol, schouten(v, psi), False)
        dh = -sharp_invert(fol, y, False)
        exact_part = exact_part + wedge(dh.body, gamma.body)
        numeric_part = numeric_part + h * vertical_d(fol, gamma).body
    return _leaf_defect(
        fol, exact_part + numeric_part, points, tolerances.closedness, tolerances
    )


def kv_solve(
    fol: FoliationData,
    phi: Multivector,
    points: np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Multivector:
    """Solve ``[[X, Psi]] = Phi`` for ``X``.

    With ``h_j`` the Hamiltonian potential of ``Phi(dk_j, .)``,
    ``Phi' = Phi + sum_j [[h_j V_j, Psi]]`` is vertical and
    ``X = Psi# beta - sum_j h_j V_j`` where ``beta = -K(Psi#^{-1} Phi')``.
    The Poisson-vector-field gauge term is zero. ``Phi'`` is built from
    ``[[h V, Psi]] = X_h ^ V + h [[V, Psi]]`` so numeric potentials are never
    differentiated.

    Raises:
        FoliationNotAdapted: if the leaves are not graphs over the leaf coordinates.
        NotCocycle: if ``[[Psi, Phi]] != 0``.
        NotHamiltonianObstruction: if some ``Phi(dk_j, .)`` has no potential.
        NotClosedVertical: if ``Psi#^{-1} Phi'`` is not leafwise closed.
    """
    if phi.degree != 2:
        raise WrongDegree(f"right-hand side must be a bivector, got degree {phi.degree}")
    fol.require_leaf_graph()
    psi = fol.psi
    if phi.is_zero:
        return Multivector.zero(fol.chart, 1)
    cocycle = schouten(psi, phi)
    pts = points if cocycle.is_exact else _sample(fol, points, tolerances)
    verdict = measure(cocycle, pts, tolerances.jacobi_sampled, tolerances)
    if not verdict.holds:
        raise NotCocycle(f"[[psi, phi]] does not vanish (defect {verdict.defect:.3e})")

    shift = Multivector.zero(fol.chart, 1)
    phi_vertical = phi
    potentials: list[tuple[Multivector, ScalarField, Multivector]] = []
    for j, (k, v) in enumerate(zip(fol.casimirs, fol.duals, strict=True)):
        y = contract_differentials(phi, [k])
        try:
            h = hamiltonian_potential(fol, y, points, tolerances)
        except (NotVertical, NotHamiltonian) as exc:
            raise NotHamiltonianObstruction(j, str(exc)) from exc
        logger.debug("casimir %d potential: %s", j, h)
        shift = shift + h * v
        phi_vertical = phi_vertical + wedge(y, v) + h * schouten(v, psi)
        potentials.append((y, h, v))

    try:
        alpha = sharp_invert(fol, phi_vertical, True, points, tolerances)
    except NotVertical as exc:
        raise NotClosedVertical(str(exc)) from exc
    if alpha.is_exact:
        closed = _closed(fol, alpha, points, tolerances)
    else:
        closed = _closed_with_potentials(fol, phi, potentials, points, tolerances)
    if not closed.holds:
        raise NotClosedVertical(f"vertical 2-form is not closed (defect {closed.defect:.3e})")
    beta = -_homotopy(fol, alpha, tolerances)
    return sharp(fol, beta) - shift


def solve_order(
    fol: FoliationData,
    series: DeformationSeries,
    order: int,
    points: np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    start: GeneratorSeries | None = None,
) -> GeneratorSeries:
    """Generators ``X_0..X_{order-1}`` from the recursion, each via :func:`kv_solve`.

    ``start`` holds generators already known, for instance a closed-form
    ``X_0``; the recursion continues after them.
    """
    if series.coefficients[0] != fol.psi:
        raise ValueError("series must start at the foliation's poisson tensor")
    gens = start if start is not None else GeneratorSeries(())
    for k in range(len(gens.coefficients), order):
        rhs = recursive_rhs(k, series, gens)
        x_k = kv_solve(fol, rhs, points, tolerances)
        gens = GeneratorSeries((*gens.coefficients, x_k))
    return gens


# --------------------------------------------------------------------------
# Serialization


class FoliationModel(BaseModel):
    """Wire format for :class:`FoliationData`."""

    model_config = ConfigDict(extra="forbid")

    poisson: MultivectorModel
    casimirs: list[str]
    duals: list[MultivectorModel]
    leaf_indices: list[int]
    star_center: list[float] | None = None


def foliation_to_model(fol: FoliationData) -> FoliationModel:
    return FoliationModel(
        poisson=to_model(fol.psi),
        casimirs=[str(k) for k in fol.casimirs],
        duals=[to_model(v) for v in fol.duals],
        leaf_indices=list(fol.leaf_indices),
        star_center=list(fol.star_center) if fol.star_center is not None else None,
    )


def foliation_from_model(model: FoliationModel, chart: Chart | None = None) -> FoliationData:
    psi = from_model(model.poisson, chart)
    target = psi.chart
    return FoliationData(
        poisson=PoissonTensor.verify(psi),
        casimirs=tuple(ScalarField.parse(target, text) for text in model.casimirs),
        duals=tuple(from_model(v, target) for v in model.duals),
        leaf_indices=tuple(model.leaf_indices),
        star_center=tuple(model.star_center) if model.star_center is not None else None,
    )

