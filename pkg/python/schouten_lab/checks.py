"""Report-valued check suites.

Every function here returns :class:`~schouten_lab.report.CheckReport` values
and never raises for a failing identity; operations that raise are turned
into failed reports carrying the error text.

The Schouten oracle below rebuilds the bracket from its defining rules only
(derivation on functions, Leibniz in the second slot, graded symmetry), using
wedge products and coordinate derivatives of components. It shares no code
path with :func:`schouten_lab.multivector.schouten`.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np

from schouten_lab.cases import (
    EULER_NAMES,
    ETA_PRESETS,
    DiracInstance,
    EulerInstance,
    EulerReading,
    dirac_delta,
    dirac_family,
    dirac_generator_family,
    dirac_instance_defects,
    dirac_tensor,
    dirac_theta_defect,
    dirac_transversal_fields,
    euler_casimirs,
    euler_foliation,
    euler_first_order_generator,
    euler_flow,
    euler_flow_map,
    euler_generator,
    euler_generator_residual,
    euler_order_residuals,
    euler_phi,
    euler_tensor,
    euler_trajectory_discrepancy,
    resolve_euler_reading,
)
from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import DegreeUnderflow, SchoutenLabError
from schouten_lab.flows import (
    EpsVectorField,
    check_triviality,
    convergence_slope,
    integrate_flow,
)
from schouten_lab.homological import FoliationData, kv_solve
from schouten_lab.multivector import (
    Multivector,
    component_distance,
    pullback_at,
    schouten,
    wedge,
)
from schouten_lab.poisson import (
    JacobiStatus,
    PoissonTensor,
    is_casimir,
    is_poisson_vf,
    jacobi_defect,
)
from schouten_lab.report import CheckReport, timed
from schouten_lab.sampling import (
    random_multivector,
    random_polynomial,
    sample_points,
    standard_chart,
)
from schouten_lab.scalar import Chart, ScalarField, specialize

logger = logging.getLogger(__name__)

AXIOMS = (
    "derivation",
    "lie-bracket",
    "graded-symmetry",
    "leibniz",
    "jacobi",
    "oracle",
    "coboundary-square",
)
EULER_CHECKS = (
    "jacobi",
    "casimir",
    "first-order",
    "generator",
    "flow",
    "straightening",
    "triviality",
    "normal-form",
)
DIRAC_CHECKS = ("casimir", "poisson-field", "generator", "triviality", "theta", "instance")

SPOT_POINT = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
SPOT_ALPHA = 1.1


# --------------------------------------------------------------------------
# Schouten oracle


def _term(chart: Chart, key: tuple[int, ...], coefficient: ScalarField) -> Multivector:
    return Multivector(chart, len(key), {key: coefficient})


def oracle_schouten(a: Multivector, b: Multivector) -> Multivector:
    """``[[a, b]]`` by peeling basis vectors off one argument.

    ``[[A, d_j ^ C]] = (-1)**p d_j A ^ C + (-1)**(p + 1) d_j ^ [[A, C]]`` and
    ``[[d_i ^ A, g]] = (d_i g) A - d_i ^ [[A, g]]``.
    """
    p, q = a.degree, b.degree
    if p == 0 and q == 0:
        raise DegreeUnderflow("the schouten bracket of two functions has degree -1")
    chart = a.chart
    out = Multivector.zero(chart, p + q - 1)
    if q >= 1:
        sign = -1 if p % 2 else 1
        for key, g in b.items():
            j, rest = key[0], _term(chart, key[1:], g)
            out = out + sign * wedge(a.partial(j), rest)
            if p + q - 1 > 0:
                inner = oracle_schouten(a, rest)
                out = out - sign * wedge(Multivector.basis(chart, j), inner)
        return out
    g = b.scalar_value
    for key, f in a.items():
        i, rest = key[0], _term(chart, key[1:], f)
        out = out + rest * g.partial(i)
        if p > 1:
            out = out - wedge(Multivector.basis(chart, i), oracle_schouten(rest, b))
    return out


# --------------------------------------------------------------------------
# Axiom residuals


def _size(residual: Multivector) -> float:
    return float(len(residual.components))


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


def derivation_residual(x: Multivector, f: ScalarField) -> Multivector:
    """``[[X, f]] - X(f)``."""
    direct = ScalarField.zero(f.chart)
    for (i,), c in x.items():
        direct = direct + c * f.partial(i)
    return schouten(x, Multivector.scalar(f)) - Multivector.scalar(direct)


def lie_bracket_residual(x: Multivector, y: Multivector) -> Multivector:
    """``[[X, Y]]`` against ``(X(Y^j) - Y(X^j)) d_j``."""
    chart = x.chart
    comps = []
    for j in range(chart.dim):
        total = ScalarField.zero(chart)
        for i in range(chart.dim):
            total = total + x[(i,)] * y[(j,)].partial(i) - y[(i,)] * x[(j,)].partial(i)
        comps.append(total)
    return schouten(x, y) - Multivector.vector_field(chart, comps)


def symmetry_residual(a: Multivector, b: Multivector) -> Multivector:
    """``[[A, B]] - (-1)**(pq) [[B, A]]``."""
    return schouten(a, b) - _sign(a.degree * b.degree) * schouten(b, a)


def leibniz_residual(a: Multivector, b: Multivector, c: Multivector) -> Multivector:
    """``[[A, B ^ C]] - [[A, B]] ^ C - (-1)**(pq + q) B ^ [[A, C]]``."""
    p, q = a.degree, b.degree
    left = schouten(a, wedge(b, c))
    right = wedge(schouten(a, b), c) + _sign(p * q + q) * wedge(b, schouten(a, c))
    return left - right


def jacobi_residual(a: Multivector, b: Multivector, c: Multivector) -> Multivector:
    """Cyclic sum with signs ``(-1)**(pr)``, ``(-1)**(qp)``, ``(-1)**(rq)``."""
    p, q, r = a.degree, b.degree, c.degree
    return (
        _sign(p * r) * schouten(schouten(a, b), c)
        + _sign(q * p) * schouten(schouten(b, c), a)
        + _sign(r * q) * schouten(schouten(c, a), b)
    )


def oracle_residual(a: Multivector, b: Multivector) -> Multivector:
    return schouten(a, b) - oracle_schouten(a, b)


def random_poisson_3d(
    chart: Chart, rng: np.random.Generator, max_degree: int = 2
) -> Multivector:
    """``f * dC`` turned into a bivector on the first three coordinates.

    Poisson for every ``f`` and ``C``; the remaining coordinates are Casimirs.
    """
    f = random_polynomial(chart, rng, max_degree=max_degree, terms=2)
    c = random_polynomial(chart, rng, max_degree=max_degree + 1)
    return Multivector(
        chart,
        2,
        {(0, 1): f * c.partial(2), (1, 2): f * c.partial(0), (0, 2): -(f * c.partial(1))},
    )


def coboundary_square_residual(psi: Multivector, a: Multivector) -> Multivector:
    """``[[Psi, [[Psi, A]]]]``, which vanishes when ``Psi`` is Poisson."""
    return schouten(psi, schouten(psi, a))


def _exact_report(
    check: str, residuals: Sequence[Multivector], parameters: dict[str, object], elapsed: float
) -> CheckReport:
    sizes = [_size(r) for r in residuals]
    report = CheckReport.from_residuals(check, sizes, 0.0, exact=True, parameters=parameters)
    return report.model_copy(update={"wall_time": elapsed})


def _guarded(check: str, run: Callable[[], CheckReport]) -> CheckReport:
    try:
        return run()
    except SchoutenLabError as exc:
        logger.info("%s raised %s: %s", check, type(exc).__name__, exc)
        return CheckReport.failure(check, f"{type(exc).__name__}: {exc}")


def run_axiom_suite(
    trials: int = 200,
    seed: int = 0,
    dims: Sequence[int] = (3, 4, 5, 6),
    max_multivector_degree: int = 3,
    max_coefficient_degree: int = 2,
    checks: Sequence[str] = AXIOMS,
    density: float = 0.4,
) -> list[CheckReport]:
    """Bracket identities on seeded random exact inputs, one report per identity."""
    rng = np.random.default_rng(seed)
    residuals: dict[str, list[Multivector]] = {name: [] for name in checks}
    with timed() as elapsed:
        for _ in range(trials):
            dim = int(rng.choice(list(dims)))
            chart = standard_chart(dim)
            top = min(max_multivector_degree, dim)

            def draw(degree: int, *, c: Chart = chart) -> Multivector:
                return random_multivector(
                    c, degree, rng, max_degree=max_coefficient_degree, density=density
                )

            p, q, r = (int(rng.integers(0, top + 1)) for _ in range(3))
            if p + q == 0:
                q = 1
            a, b, c = draw(p), draw(q), draw(r)
            if "derivation" in residuals:
                f = random_polynomial(chart, rng, max_degree=max_coefficient_degree)
                residuals["derivation"].append(derivation_residual(draw(1), f))
            if "lie-bracket" in residuals:
                residuals["lie-bracket"].append(lie_bracket_residual(draw(1), draw(1)))
            if "graded-symmetry" in residuals:
                residuals["graded-symmetry"].append(symmetry_residual(a, b))
            if "oracle" in residuals:
                residuals["oracle"].append(oracle_residual(a, b))
            if "leibniz" in residuals and p + r > 0:
                residuals["leibniz"].append(leibniz_residual(a, b, c))
            if "jacobi" in residuals and min(q + r, r + p) > 0 and p + q + r >= 2:
                residuals["jacobi"].append(jacobi_residual(a, b, c))
            if "coboundary-square" in residuals:
                psi = random_poisson_3d(chart, rng, max_coefficient_degree)
                residuals["coboundary-square"].append(coboundary_square_residual(psi, a))
        total = elapsed()
    parameters = {"trials": trials, "seed": seed, "dims": list(dims)}
    return [
        _exact_report(f"axioms.{name}", values, parameters, total / max(len(checks), 1))
        for name, values in sorted(residuals.items())
    ]


# --------------------------------------------------------------------------
# Karasev-Vorobiev solver on manufactured data


def canonical_plus_zero(pairs: int, transverse: int) -> FoliationData:
    """``sum_i dq_i ^ dp_i`` on ``R^(2 pairs + transverse)`` with coordinate Casimirs."""
    names = [n for i in range(pairs) for n in (f"q{i + 1}", f"p{i + 1}")]
    names += [f"c{k + 1}" for k in range(transverse)]
    chart = Chart(tuple(names))
    psi = Multivector(chart, 2, {(2 * i, 2 * i + 1): 1 for i in range(pairs)})
    casimir_indices = range(2 * pairs, chart.dim)
    return FoliationData(
        poisson=PoissonTensor(psi, JacobiStatus.VERIFIED),
        casimirs=tuple(ScalarField.coordinate(chart, k) for k in casimir_indices),
        duals=tuple(Multivector.basis(chart, k) for k in casimir_indices),
        leaf_indices=tuple(range(2 * pairs)),
    )


def run_kv_manufactured(
    trials: int = 20, seed: int = 0, pairs: int = 1, transverse: int = 1
) -> list[CheckReport]:
    """Recover ``X`` from ``Phi = [[X_true, Psi]]`` and compare up to Poisson fields."""
    rng = np.random.default_rng(seed)
    fol = canonical_plus_zero(pairs, transverse)
    equation: list[Multivector] = []
    gauge: list[Multivector] = []
    failures: list[str] = []
    with timed() as elapsed:
        for t in range(trials):
            x_true = random_multivector(fol.chart, 1, rng, max_degree=2, density=0.8)
            phi = schouten(x_true, fol.psi)
            try:
                x = kv_solve(fol, phi)
            except SchoutenLabError as exc:
                failures.append(f"trial {t}: {type(exc).__name__}: {exc}")
                continue
            equation.append(schouten(x, fol.psi) - phi)
            gauge.append(schouten(fol.psi, x - x_true))
        total = elapsed()
    parameters: dict[str, object] = {"trials": trials, "seed": seed, "dim": fol.chart.dim}
    reports = [
        _exact_report("kv.equation", equation, parameters, total / 2),
        _exact_report("kv.gauge", gauge, parameters, total / 2),
    ]
    if failures:
        reports = [
            r.model_copy(update={"passed": False, "detail": "; ".join(failures)}) for r in reports
        ]
    return reports


# --------------------------------------------------------------------------
# Euler family


def euler_points(
    inst: EulerInstance, n: int, seed: int, eps_grid: Sequence[float]
) -> np.ndarray:
    """Seeded points where the generator is defined and the flow exists on the grid."""
    return sample_points(inst.chart, n, seed=seed, where=inst.flow_safe(eps_grid))


def _euler_jacobi(inst: EulerInstance, eps: float) -> CheckReport:
    with timed() as elapsed:
        defect = jacobi_defect(euler_tensor(inst.eta, eps).body)
    return _exact_report(
        "euler.jacobi", [defect], {"eta": _eta_list(inst), "eps": eps}, elapsed()
    )


def _eta_list(inst: EulerInstance) -> list[float]:
    return [float(v) for v in inst.eta]


def _euler_casimir(inst: EulerInstance, eps: float) -> CheckReport:
    with timed() as elapsed:
        psi = euler_tensor(inst.eta, eps).body
        residuals = [schouten(psi, Multivector.scalar(k)) for k in euler_casimirs(inst.eta, eps)]
    return _exact_report(
        "euler.casimir", residuals, {"eta": _eta_list(inst), "eps": eps}, elapsed()
    )


def euler_table_reports() -> list[CheckReport]:
    """Jacobi and both Casimirs for every preset row."""
    residuals: list[Multivector] = []
    with timed() as elapsed:
        for eta, eps in ETA_PRESETS.values():
            psi = euler_tensor(eta, eps)
            residuals.append(jacobi_defect(psi.body))
            for k in euler_casimirs(eta, eps):
                residuals.append(schouten(psi.body, Multivector.scalar(k)))
    return [_exact_report("euler.table", residuals, {"rows": sorted(ETA_PRESETS)}, elapsed())]


def _euler_first_order(
    inst: EulerInstance, samples: int, seed: int, tol: float, tolerances: Tolerances
) -> CheckReport:
    """``X_0`` solves the order-0 equation and matches the solver up to a Poisson field.

    The first residual counts surviving components of the exact equation; the
    rest are ``|[[Psi_0, kv_solve(-Phi) - X_0]]|`` at points of the foliation chart.
    """
    with timed() as elapsed:
        fol = euler_foliation(inst.eta)
        psi0 = fol.psi
        phi = euler_phi(inst.eta, fol.chart)
        x0 = euler_first_order_generator(inst.eta, fol.chart)
        equation = _size(schouten(x0, psi0) + phi)
        gauge = schouten(psi0, kv_solve(fol, -phi, tolerances=tolerances) - x0)
        points = sample_points(fol.chart, samples, seed=seed)
        per_point = [equation, *(gauge.max_abs_at([x], tolerances) for x in points)]
    return CheckReport.from_residuals(
        "euler.first-order", per_point, tol, parameters={"eta": _eta_list(inst)}
    ).model_copy(update={"wall_time": elapsed()})


def _euler_generator(inst: EulerInstance) -> CheckReport:
    with timed() as elapsed:
        reading = resolve_euler_reading(inst.eta)
        residuals = euler_generator_residual(inst.eta, reading)
    return _exact_report(
        "euler.generator",
        residuals,
        {"eta": _eta_list(inst), "reading": reading.value},
        elapsed(),
    )


def _euler_flow(
    inst: EulerInstance,
    points: np.ndarray,
    eps_grid: Sequence[float],
    tol: float,
    tolerances: Tolerances,
) -> CheckReport:
    with timed() as elapsed:
        field = euler_generator(inst.eta)
        per_point = []
        for x in points:
            worst = 0.0
            for eps in eps_grid:
                numeric = integrate_flow(
                    field, x, eps, tolerances.integrator, with_jacobian=False
                ).point
                closed = euler_flow(inst.eta, eps, x)
                worst = max(worst, float(np.max(np.abs(numeric - closed))))
            per_point.append(worst)
        # alpha = 1.1 at (y, z) = (e1, e2), eps = -0.21
        spot = float(euler_flow((1, 1, 1), -0.21, SPOT_POINT)[4])
        per_point.append(abs(spot - SPOT_ALPHA))
    return CheckReport.from_residuals(
        "euler.flow",
        per_point,
        tol,
        parameters={"eta": _eta_list(inst), "spot_alpha": spot},
        grid=list(eps_grid),
    ).model_copy(update={"wall_time": elapsed()})


def _euler_straightening(
    inst: EulerInstance,
    points: np.ndarray,
    eps_grid: Sequence[float],
    tol: float,
    tolerances: Tolerances,
) -> CheckReport:
    with timed() as elapsed:
        psi0 = euler_tensor(inst.eta, 0).body
        per_point = [0.0] * len(points)
        for eps in eps_grid:
            psi = euler_tensor(inst.eta, eps).body
            gamma = euler_flow_map(inst.eta, eps)
            for i, x in enumerate(points):
                pulled = pullback_at(psi, gamma, x, tolerances)
                per_point[i] = max(per_point[i], component_distance(pulled, psi0.at(x)))
    return CheckReport.from_residuals(
        "euler.straightening",
        per_point,
        tol,
        parameters={"eta": _eta_list(inst)},
        grid=list(eps_grid),
    ).model_copy(update={"wall_time": elapsed()})


def _euler_triviality(
    inst: EulerInstance,
    points: np.ndarray,
    eps_grid: Sequence[float],
    tol: float,
    tolerances: Tolerances,
) -> CheckReport:
    return check_triviality(
        inst.series(),
        euler_generator(inst.eta),
        eps_grid,
        points,
        tol,
        name="euler.triviality",
        integrator_tol=tolerances.integrator,
        tolerances=tolerances,
    )


def _euler_normal_form(
    inst: EulerInstance,
    points: np.ndarray,
    eps: float,
    tol: float,
    seed: int,
    tolerances: Tolerances,
) -> CheckReport:
    assert inst.hamiltonian is not None  # noqa: S101
    rng = np.random.default_rng(seed)
    extra = random_polynomial(inst.chart, rng, max_degree=2, terms=4, coefficient_range=2)
    with timed() as elapsed:
        per_point = []
        for x in points:
            worst = 0.0
            for h in (inst.hamiltonian, extra):
                worst = max(
                    worst,
                    euler_trajectory_discrepancy(h, inst.eta, eps, x, 1.0, tolerances.integrator),
                )
            per_point.append(worst)
    return CheckReport.from_residuals(
        "euler.normal-form",
        per_point,
        tol,
        parameters={"eta": _eta_list(inst), "eps": eps, "random_hamiltonian": str(extra)},
    ).model_copy(update={"wall_time": elapsed()})


def run_euler_checks(
    inst: EulerInstance,
    eps: float,
    checks: Sequence[str] = EULER_CHECKS,
    *,
    eps_grid: Sequence[float] | None = None,
    samples: int = 50,
    seed: int = 0,
    tol: float | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[CheckReport]:
    grid = list(eps_grid if eps_grid is not None else tolerances.eps_grid)
    unknown = set(checks) - set(EULER_CHECKS) - {"table"}
    if unknown:
        raise ValueError(f"unknown euler checks: {sorted(unknown)}")
    points = euler_points(inst, samples, seed, grid)
    normal_eps = eps if eps != 0 else 0.05
    runners: dict[str, Callable[[], CheckReport]] = {
        "jacobi": lambda: _euler_jacobi(inst, eps),
        "casimir": lambda: _euler_casimir(inst, eps),
        "first-order": lambda: _euler_first_order(
            inst, min(samples, 10), seed, tol or 1e-6, tolerances
        ),
        "generator": lambda: _euler_generator(inst),
        "flow": lambda: _euler_flow(inst, points, grid, tol or 1e-6, tolerances),
        "straightening": lambda: _euler_straightening(inst, points, grid, tol or 1e-6, tolerances),
        "triviality": lambda: _euler_triviality(inst, points, grid, tol or 1e-6, tolerances),
        "normal-form": lambda: _euler_normal_form(
            inst, points[:5], normal_eps, tol or 1e-5, seed, tolerances
        ),
    }
    reports = []
    for name in checks:
        if name == "table":
            reports.extend(euler_table_reports())
            continue
        reports.append(_guarded(f"euler.{name}", runners[name]))
    return reports


def run_slope_checks(
    inst: EulerInstance,
    orders: Sequence[int] = (1, 2),
    eps_values: Sequence[float] = (0.1, 0.05, 0.025, 0.0125),
    samples: int = 20,
    seed: int = 0,
    margin: float = 0.8,
) -> list[CheckReport]:
    """Log-log slope of the order-``k`` straightening residual must reach ``k + margin``."""
    points = sample_points(
        inst.chart,
        samples,
        seed=seed,
        where=lambda x: inst.in_generator_domain(x, 1e-2) and inst.in_foliation_domain(x),
    )
    reports = []
    for k in orders:

        def run(order: int = k) -> CheckReport:
            with timed() as elapsed:
                residuals = euler_order_residuals(inst.eta, order, eps_values, points)
                slope = convergence_slope(eps_values, residuals)
            return CheckReport.from_residuals(
                f"slope.order-{order}",
                [max(0.0, order + margin - slope)],
                0.0,
                parameters={"slope": slope, "residuals": residuals, "eta": _eta_list(inst)},
                grid=list(eps_values),
            ).model_copy(update={"wall_time": elapsed()})

        reports.append(_guarded(f"slope.order-{k}", run))
    return reports


# --------------------------------------------------------------------------
# Dirac brackets


def _extended(points: np.ndarray, eps: float) -> np.ndarray:
    return np.hstack([points, np.full((len(points), 1), eps)])


def _dirac_casimir(inst: DiracInstance, grid: Sequence[float]) -> CheckReport:
    with timed() as elapsed:
        family = dirac_family(inst)
        residuals = []
        for eps in grid:
            psi = family.at(eps)
            for a in inst.constraints:
                k = specialize(a, inst.base, eps)
                residuals.append(schouten(psi, Multivector.scalar(k)))
    return _exact_report("dirac.casimir", residuals, {"grid": list(grid)}, elapsed())


def _dirac_poisson_field(
    inst: DiracInstance, grid: Sequence[float], points: np.ndarray, tolerances: Tolerances
) -> CheckReport:
    with timed() as elapsed:
        per_point = [0.0] * len(points)
        exact_defect = 0.0
        for eps in grid:
            psi = dirac_tensor(inst, eps)
            fields = dirac_transversal_fields(inst, eps)
            for z in fields:
                verdict = is_poisson_vf(psi, z, points, tolerances)
                exact_defect = max(exact_defect, verdict.defect)
            for j, a in enumerate(inst.constraints):
                k = specialize(a, inst.base, eps)
                for i, z in enumerate(fields):
                    pairing = schouten(z, Multivector.scalar(k)).scalar_value
                    values = pairing.evaluate_many(points, tolerances) - (1.0 if i == j else 0.0)
                    for n, v in enumerate(np.abs(values)):
                        per_point[n] = max(per_point[n], float(v))
        residuals = [max(v, exact_defect) for v in per_point]
    return CheckReport.from_residuals(
        "dirac.poisson-field", residuals, tolerances.duality, grid=list(grid)
    ).model_copy(update={"wall_time": elapsed()})


def _dirac_generator(inst: DiracInstance, grid: Sequence[float]) -> CheckReport:
    with timed() as elapsed:
        family = dirac_family(inst)
        generator = dirac_generator_family(inst)
        rate = family.derivative()
        residuals = [schouten(generator.at(e), family.at(e)) + rate.at(e) for e in grid]
    return _exact_report("dirac.generator", residuals, {"grid": list(grid)}, elapsed())


def _dirac_triviality(
    inst: DiracInstance,
    grid: Sequence[float],
    points: np.ndarray,
    tol: float,
    tolerances: Tolerances,
) -> CheckReport:
    field = EpsVectorField.from_family(dirac_generator_family(inst))
    return check_triviality(
        dirac_family(inst),
        field,
        grid,
        points,
        tol,
        name="dirac.triviality",
        integrator_tol=tolerances.integrator,
        tolerances=tolerances,
    )


def _dirac_theta(
    inst: DiracInstance, grid: Sequence[float], points: np.ndarray, tolerances: Tolerances
) -> CheckReport:
    with timed() as elapsed:
        pts = np.vstack([_extended(points, e) for e in grid])
        verdict = dirac_theta_defect(inst, pts, tolerances)
    return CheckReport(
        check="dirac.theta",
        per_point_residuals=[verdict.defect],
        max_residual=verdict.defect,
        tolerance=tolerances.closedness,
        exact=verdict.exact,
        passed=verdict.holds,
        grid=list(grid),
        wall_time=elapsed(),
    )


def _dirac_instance(
    inst: DiracInstance, grid: Sequence[float], points: np.ndarray, tolerances: Tolerances
) -> CheckReport:
    with timed() as elapsed:
        worst = {"inverse": 0.0, "closed": 0.0, "delta_inverse": 0.0}
        smallest_det = np.inf
        for eps in grid:
            defects = dirac_instance_defects(inst, eps, points, tolerances)
            for key in worst:
                worst[key] = max(worst[key], defects[key])
            smallest_det = min(smallest_det, defects["delta_det"])
    residuals = list(worst.values())
    if inst.rank and not smallest_det > tolerances.pole:
        residuals.append(np.inf)
    return CheckReport.from_residuals(
        "dirac.instance",
        residuals,
        tolerances.duality,
        parameters={**worst, "min_det_delta": float(smallest_det)},
        grid=list(grid),
    ).model_copy(update={"wall_time": elapsed()})


def run_dirac_checks(
    inst: DiracInstance,
    checks: Sequence[str] = DIRAC_CHECKS,
    *,
    eps_grid: Sequence[float] | None = None,
    samples: int = 50,
    seed: int = 0,
    tol: float | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[CheckReport]:
    grid = list(eps_grid if eps_grid is not None else tolerances.eps_grid)
    unknown = set(checks) - set(DIRAC_CHECKS)
    if unknown:
        raise ValueError(f"unknown dirac checks: {sorted(unknown)}")
    points = sample_points(inst.base, samples, seed=seed)
    dirac_delta(inst, grid[0])
    runners: dict[str, Callable[[], CheckReport]] = {
        "casimir": lambda: _dirac_casimir(inst, grid),
        "poisson-field": lambda: _dirac_poisson_field(inst, grid, points, tolerances),
        "generator": lambda: _dirac_generator(inst, grid),
        "triviality": lambda: _dirac_triviality(inst, grid, points, tol or 1e-7, tolerances),
        "theta": lambda: _dirac_theta(inst, grid, points, tolerances),
        "instance": lambda: _dirac_instance(inst, grid, points, tolerances),
    }
    return [_guarded(f"dirac.{name}", runners[name]) for name in checks]


def euler_reading_reports(inst: EulerInstance) -> list[CheckReport]:
    """Residuals of both generator readings, so the rejected one is on record."""
    reports = []
    for reading in EulerReading:
        with timed() as elapsed:
            residuals = euler_generator_residual(inst.eta, reading)
        reports.append(
            _exact_report(
                f"euler.reading-{reading.value}",
                residuals,
                {"eta": _eta_list(inst), "chart": list(EULER_NAMES)},
                elapsed(),
            )
        )
    return reports


def poisson_checks(
    tensors: dict[str, Multivector],
    casimirs: dict[str, tuple[str, ScalarField]],
    points: np.ndarray | None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[CheckReport]:
    """Jacobi for every bivector and the declared ``(tensor, function)`` Casimir pairs."""
    reports = []
    for name, body in sorted(tensors.items()):
        if body.degree != 2:
            continue
        with timed() as elapsed:
            verdict = PoissonTensor.verify(body, points, tolerances)
        reports.append(
            CheckReport(
                check=f"poisson.jacobi.{name}",
                per_point_residuals=[verdict.defect_norm],
                max_residual=verdict.defect_norm,
                tolerance=0.0 if body.is_exact else tolerances.jacobi_sampled,
                exact=body.is_exact,
                passed=verdict.status is JacobiStatus.VERIFIED,
                wall_time=elapsed(),
            )
        )
    for label, (tensor_name, k) in sorted(casimirs.items()):
        with timed() as elapsed:
            result = is_casimir(tensors[tensor_name], k, points, tolerances)
        reports.append(
            CheckReport(
                check=f"poisson.casimir.{label}",
                per_point_residuals=[result.defect],
                max_residual=result.defect,
                tolerance=0.0 if result.exact else tolerances.casimir_sampled,
                exact=result.exact,
                passed=result.holds,
                wall_time=elapsed(),
            )
        )
    return reports
