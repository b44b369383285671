"""Flows of eps-dependent vector fields and transport along them.

``gamma_eps`` solves ``d gamma / d eps = X_eps(gamma)``, ``gamma_0 = id``.
Integration is scipy's embedded 4(5) Runge-Kutta pair with equal absolute
and relative tolerances. When the field supplies its exact spatial Jacobian,
the flow's Jacobian is integrated alongside the state (variational
equations); otherwise it falls back to central differences of the flow map.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Protocol

import numpy as np
import sympy
from scipy.integrate import solve_ivp

from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import DomainExit, PoleAtPoint, StepSizeUnderflow, WrongDegree
from schouten_lab.homological import GeneratorSeries, ParametrizedFamily, lie_transform
from schouten_lab.multivector import (
    DiffeoMap,
    Key,
    Multivector,
    component_distance,
    pullback_at,
    schouten,
    transport_components,
)
from schouten_lab.poisson import PoissonTensor, hamiltonian_vf
from schouten_lab.report import CheckReport, timed
from schouten_lab.scalar import Chart, PointLike, ScalarField, as_coords, as_fraction

logger = logging.getLogger(__name__)


class EpsFamily(Protocol):
    """Anything that can be evaluated and differentiated in eps."""

    @property
    def chart(self) -> Chart: ...

    @property
    def degree(self) -> int: ...

    def at(self, eps: float | Fraction) -> Multivector: ...

    def derivative(self) -> EpsFamily: ...


class CompiledVector:
    """A list of scalar fields compiled into one ``ndarray -> ndarray`` callable.

    Exact fields go through a single :func:`sympy.lambdify`; numeric ones are
    evaluated one by one. Non-finite values raise :class:`DomainExit`.
    """

    def __init__(self, fields: Sequence[ScalarField], chart: Chart) -> None:
        self.chart = chart
        self.size = len(fields)
        self._fields = list(fields)
        self._fn: Callable[..., object] | None = None
        if all(f.is_exact for f in fields):
            exprs = [f.to_expr() for f in fields]
            self._fn = sympy.lambdify(chart.symbols, exprs, modules="numpy")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self._fn is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.array(self._fn(*x), dtype=float).reshape(self.size)
        else:
            try:
                out = np.array([f(x) for f in self._fields], dtype=float)
            except PoleAtPoint as exc:
                raise DomainExit(str(exc)) from exc
        if not np.all(np.isfinite(out)):
            raise DomainExit(f"field is singular at {tuple(np.round(x, 12).tolist())}")
        return out


@dataclass(frozen=True)
class EpsVectorField:
    """``X_eps`` as a numeric velocity, optionally with Jacobian and symbolic form."""

    chart: Chart
    velocity: Callable[[float, np.ndarray], np.ndarray]
    jacobian: Callable[[float, np.ndarray], np.ndarray] | None = None
    symbolic: Callable[[float], Multivector] | None = None
    series: GeneratorSeries | None = None
    eps_radius: float = math.inf

    def __call__(self, eps: float, x: np.ndarray) -> np.ndarray:
        if abs(eps) >= self.eps_radius:
            raise DomainExit(f"eps {eps} outside (-{self.eps_radius}, {self.eps_radius})")
        if not self.chart.contains(x):
            raise DomainExit(f"trajectory left the domain at {tuple(np.round(x, 12).tolist())}")
        return self.velocity(eps, x)

    def at(self, eps: float) -> Multivector:
        if self.symbolic is None:
            raise TypeError("this vector field has no symbolic form")
        return self.symbolic(eps)

    @classmethod
    def zero(cls, chart: Chart) -> EpsVectorField:
        n = chart.dim
        return cls(
            chart,
            velocity=lambda _eps, _x: np.zeros(n),
            jacobian=lambda _eps, _x: np.zeros((n, n)),
            symbolic=lambda _eps: Multivector.zero(chart, 1),
        )

    @classmethod
    def from_field(cls, x: Multivector, *, eps_radius: float = math.inf) -> EpsVectorField:
        """An eps-independent field."""
        if x.degree != 1:
            raise WrongDegree(f"expected a vector field, got degree {x.degree}")
        chart = x.chart
        n = chart.dim
        comps = [x[(i,)] for i in range(n)]
        vel = CompiledVector(comps, chart)
        jac = CompiledVector([c.partial(j) for c in comps for j in range(n)], chart)
        return cls(
            chart,
            velocity=lambda _eps, y: vel(y),
            jacobian=lambda _eps, y: jac(y).reshape(n, n),
            symbolic=lambda _eps: x,
            eps_radius=eps_radius,
        )

    @classmethod
    def from_series(
        cls, gens: GeneratorSeries, chart: Chart, *, eps_radius: float = math.inf
    ) -> EpsVectorField:
        """``X_eps = sum_i eps**i / i! X_i``."""
        n = chart.dim
        parts = []
        for i, x in enumerate(gens.coefficients):
            comps = [x[(k,)] for k in range(n)]
            parts.append(
                (
                    math.factorial(i),
                    CompiledVector(comps, chart),
                    CompiledVector([c.partial(j) for c in comps for j in range(n)], chart),
                )
            )

        def velocity(eps: float, y: np.ndarray) -> np.ndarray:
            out = np.zeros(n)
            for i, (fact, vel, _jac) in enumerate(parts):
                out += eps**i / fact * vel(y)
            return out

        def jacobian(eps: float, y: np.ndarray) -> np.ndarray:
            out = np.zeros((n, n))
            for i, (fact, _vel, jac) in enumerate(parts):
                out += eps**i / fact * jac(y).reshape(n, n)
            return out

        return cls(
            chart,
            velocity=velocity,
            jacobian=jacobian,
            symbolic=lambda eps: gens.at(eps, chart),
            series=gens,
            eps_radius=eps_radius,
        )

    @classmethod
    def from_family(
        cls, family: ParametrizedFamily, *, eps_radius: float = math.inf
    ) -> EpsVectorField:
        """A field rational in eps, stored on the parameter-extended chart."""
        if family.degree != 1:
            raise WrongDegree(f"expected a vector field family, got degree {family.degree}")
        base = family.base
        ext = family.body.chart
        n = base.dim
        comps = [family.body[(i,)] for i in range(n)]
        vel = CompiledVector(comps, ext)
        jac = CompiledVector([c.partial(j) for c in comps for j in range(n)], ext)
        return cls(
            base,
            velocity=lambda eps, y: vel(np.append(y, eps)),
            jacobian=lambda eps, y: jac(np.append(y, eps)).reshape(n, n),
            symbolic=family.at,
            eps_radius=eps_radius,
        )


@dataclass(frozen=True)
class FlowResult:
    """Image of one start point under ``gamma_eps`` plus step statistics."""

    start: np.ndarray
    eps: float
    point: np.ndarray
    jacobian: np.ndarray | None
    n_steps: int
    nfev: int
    tolerance: float
    map: DiffeoMap


def _solve(
    field: EpsVectorField,
    x0: np.ndarray,
    t0: float,
    t1: float,
    tol: float,
    with_jacobian: bool,
) -> tuple[np.ndarray, np.ndarray | None, int, int]:
    n = field.chart.dim
    use_variational = with_jacobian and field.jacobian is not None
    if t0 == t1:
        return x0.copy(), (np.eye(n) if use_variational else None), 0, 0
    jac_fn = field.jacobian

    if use_variational:
        assert jac_fn is not None  # noqa: S101

        def rhs(t: float, state: np.ndarray) -> np.ndarray:
            y = state[:n]
            phi = state[n:].reshape(n, n)
            return np.concatenate([field(t, y), (jac_fn(t, y) @ phi).ravel()])

        y0 = np.concatenate([x0, np.eye(n).ravel()])
    else:

        def rhs(t: float, state: np.ndarray) -> np.ndarray:
            return field(t, state)

        y0 = x0.copy()
    try:
        sol = solve_ivp(rhs, (t0, t1), y0, method="RK45", rtol=tol, atol=tol)
    except PoleAtPoint as exc:
        raise DomainExit(str(exc)) from exc
    if sol.status < 0:
        raise StepSizeUnderflow(f"integration from {tuple(x0.tolist())} failed: {sol.message}")
    final = sol.y[:, -1]
    jac = final[n:].reshape(n, n) if use_variational else None
    return final[:n].copy(), jac, len(sol.t) - 1, int(sol.nfev)


def flow_map(
    field: EpsVectorField,
    eps: float,
    tol: float = DEFAULT_TOLERANCES.integrator,
) -> DiffeoMap:
    """``gamma_eps`` as a map; the inverse integrates back from ``eps`` to 0."""
    variational = field.jacobian is not None

    def forward(x: np.ndarray) -> np.ndarray:
        return _solve(field, np.asarray(x, dtype=float), 0.0, eps, tol, False)[0]

    def inverse(y: np.ndarray) -> np.ndarray:
        return _solve(field, np.asarray(y, dtype=float), eps, 0.0, tol, False)[0]

    def jacobian(x: np.ndarray) -> np.ndarray:
        jac = _solve(field, np.asarray(x, dtype=float), 0.0, eps, tol, True)[1]
        assert jac is not None  # noqa: S101
        return jac

    return DiffeoMap(
        field.chart,
        forward=forward,
        inverse=inverse,
        jacobian=jacobian if variational else None,
    )


def integrate_flow(
    field: EpsVectorField,
    x0: PointLike,
    eps_target: float,
    tol: float = DEFAULT_TOLERANCES.integrator,
    *,
    with_jacobian: bool = True,
) -> FlowResult:
    """Integrate ``gamma`` from ``x0`` to ``eps_target``.

    Raises:
        DomainExit: if the trajectory leaves the field's domain.
        StepSizeUnderflow: if the integrator cannot meet ``tol``.
    """
    start = as_coords(field.chart, x0)
    if not field.chart.contains(start):
        raise DomainExit(f"start point {tuple(start.tolist())} is outside the domain")
    point, jac, steps, nfev = _solve(field, start, 0.0, eps_target, tol, with_jacobian)
    if with_jacobian and jac is None:
        mapping = flow_map(field, eps_target, tol)
        jac = mapping.jacobian_at(start)
    logger.debug("flow to eps=%g in %d steps (%d evaluations)", eps_target, steps, nfev)
    return FlowResult(
        start=start,
        eps=eps_target,
        point=point,
        jacobian=jac,
        n_steps=steps,
        nfev=nfev,
        tolerance=tol,
        map=flow_map(field, eps_target, tol),
    )


def _family_at(family: EpsFamily | Multivector, eps: float) -> Multivector:
    return family if isinstance(family, Multivector) else family.at(eps)


def pullback_along_flow(
    family: EpsFamily | Multivector,
    field: EpsVectorField,
    eps: float,
    points: Sequence[PointLike] | np.ndarray,
    tol: float = DEFAULT_TOLERANCES.integrator,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[dict[Key, float]]:
    """Components of ``gamma_eps^* A_eps`` at each point."""
    a_eps = _family_at(family, eps)
    out = []
    for x in points:
        result = integrate_flow(field, x, eps, tol)
        values = a_eps.at(result.point, tolerances)
        if a_eps.degree == 0:
            out.append(values)
            continue
        assert result.jacobian is not None  # noqa: S101
        out.append(transport_components(values, np.linalg.inv(result.jacobian), a_eps.degree))
    return out


def homological_defect(
    family: EpsFamily,
    field: EpsVectorField,
    eps: float,
) -> Multivector:
    """``[[X_eps, A_eps]] + dA_eps/deps`` at a fixed eps."""
    return schouten(field.at(eps), family.at(eps)) + family.derivative().at(eps)


def check_triviality(
    family: EpsFamily,
    field: EpsVectorField,
    eps_grid: Sequence[float],
    points: Sequence[PointLike] | np.ndarray,
    tol: float,
    *,
    name: str = "triviality",
    integrator_tol: float = DEFAULT_TOLERANCES.integrator,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> CheckReport:
    """Measure ``|gamma_eps^* A_eps - A_0|`` and the homological residual on a grid.

    Per-point residuals are the max over the grid of both quantities.
    """
    with timed() as elapsed:
        pts = [as_coords(family.chart, x) for x in points]
        a0 = family.at(0)
        base_values = [a0.at(x, tolerances) for x in pts]
        per_point = [0.0] * len(pts)
        straightening = 0.0
        residual = 0.0
        for eps in eps_grid:
            pulled = pullback_along_flow(family, field, eps, pts, integrator_tol, tolerances)
            for i, (got, want) in enumerate(zip(pulled, base_values, strict=True)):
                d = component_distance(got, want)
                straightening = max(straightening, d)
                per_point[i] = max(per_point[i], d)
            if field.symbolic is not None:
                defect = homological_defect(family, field, eps)
                for i, x in enumerate(pts):
                    r = max((abs(v) for v in defect.at(x, tolerances).values()), default=0.0)
                    residual = max(residual, r)
                    per_point[i] = max(per_point[i], r)
        report = CheckReport.from_residuals(
            name,
            per_point,
            tol,
            parameters={
                "straightening": straightening,
                "homological_residual": residual if field.symbolic is not None else None,
                "integrator_tol": integrator_tol,
                "points": len(pts),
            },
            grid=list(eps_grid),
        )
    logger.info("%s: max residual %.3e (pass=%s)", name, report.max_residual, report.passed)
    return report.model_copy(update={"wall_time": elapsed()})


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[:, -1]


def hamiltonian_flow(
    psi: PoissonTensor | Multivector,
    h: ScalarField,
    x0: PointLike,
    t_final: float,
    tol: float = DEFAULT_TOLERANCES.integrator,
    t_eval: Sequence[float] | None = None,
) -> Trajectory:
    """Solve ``x' = X_H(x)`` with ``X_H = [[Psi, H]]``."""
    field = hamiltonian_vf(psi, h)
    chart = field.chart
    velocity = CompiledVector([field[(i,)] for i in range(chart.dim)], chart)
    start = as_coords(chart, x0)
    sol = solve_ivp(
        lambda _t, y: velocity(y),
        (0.0, t_final),
        start,
        method="RK45",
        rtol=tol,
        atol=tol,
        t_eval=None if t_eval is None else np.asarray(t_eval, dtype=float),
    )
    if sol.status < 0:
        raise StepSizeUnderflow(f"hamiltonian flow failed: {sol.message}")
    return Trajectory(times=np.asarray(sol.t), states=np.asarray(sol.y))


def taylor_flow_map(gens: GeneratorSeries, chart: Chart, order: int, eps: float) -> DiffeoMap:
    """The flow of ``gens`` with each coordinate truncated at ``eps**order``.

    Coordinates come from :func:`lie_transform` of the coordinate functions, so
    the map and its Jacobian are exact rational expressions in ``x``.
    """
    frac = as_fraction(eps)
    components = []
    for i in range(chart.dim):
        coordinate = Multivector.scalar(ScalarField.coordinate(chart, i))
        series = lie_transform(gens, coordinate, order)
        components.append(series.at(frac).scalar_value)
    return DiffeoMap.from_fields(components)


def order_residuals(
    family: EpsFamily,
    gens: GeneratorSeries,
    order: int,
    eps_values: Sequence[float],
    points: Sequence[PointLike] | np.ndarray,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[float]:
    """``max_x |gamma^* A_eps - A_0|`` for the order-truncated flow of ``gens``.

    Generators solving the recursion through order ``k`` make this
    ``O(eps**(k + 1))``.
    """
    chart = family.chart
    a0 = family.at(0)
    base = [a0.at(x, tolerances) for x in points]
    out = []
    for eps in eps_values:
        gamma = taylor_flow_map(gens, chart, order, eps)
        a_eps = family.at(eps)
        worst = 0.0
        for x, want in zip(points, base, strict=True):
            worst = max(worst, component_distance(pullback_at(a_eps, gamma, x, tolerances), want))
        out.append(worst)
        logger.debug("order %d residual at eps=%g: %.3e", order, eps, worst)
    return out


def convergence_slope(eps_values: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of ``log(residual)`` against ``log|eps|``."""
    x = np.log(np.abs(np.asarray(eps_values, dtype=float)))
    y = np.log(np.maximum(np.asarray(residuals, dtype=float), np.finfo(float).tiny))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
