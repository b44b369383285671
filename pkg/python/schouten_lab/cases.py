"""Worked deformations: the six-dimensional Euler family and Dirac brackets.

Euler family
------------
On ``R^6`` with coordinates ``(y, z)`` and a diagonal ``eta``::

    Psi(dy_i, dy_j) = e_ijk eta_k y_k
    Psi(dy_i, dz_j) = e_ijk eta_k z_k
    Psi(dz_i, dz_j) = eps * e_ijk eta_k y_k

so ``Psi_eps = Psi_0 + eps * Phi``. The generator that straightens it is
eps-independent and only moves ``z``; its flow has the closed form
``z -> alpha z + (1 - alpha) (eta(y).z / eta(y).y) y`` with
``alpha**2 = 1 - eps (eta(y).y)**2 / D`` and
``D = (eta(y) x eta(z)).(y x z)``. The opposite-sign reading of the generator
is kept as :attr:`EulerReading.PRINTED` so both can be checked.

Dirac brackets
--------------
A :class:`DiracInstance` carries its eps-families on the parameter-extended
chart (see :func:`schouten_lab.scalar.with_parameter`). With
``Delta^ij = {A^i, A^j}`` and ``Delta_ij`` its inverse::

    Psi_DIR = Psi + sum_{i<j} Delta_ij X_{A^i} ^ X_{A^j}
    Z_i     = sum_k Delta_ik X_{A^k}
    X_eps   = sum_ij Delta_ij (dA^j/deps) X_{A^i} + Psi_DIR(theta, .)
"""

from __future__ import annotations

import enum
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import (
    ChartMismatch,
    DenominatorZero,
    MissingThetaFamily,
    RadicandNonpositive,
    SingularDelta,
    WrongDegree,
)
from schouten_lab.flows import (
    EpsVectorField,
    convergence_slope,
    hamiltonian_flow,
    order_residuals,
)
from schouten_lab.homological import (
    DeformationSeries,
    FoliationData,
    GeneratorSeries,
    ParametrizedFamily,
    field_det,
    field_inverse,
    homological_residual,
    solve_order,
)
from schouten_lab.multivector import (
    DiffeoMap,
    Key,
    Multivector,
    contract_covector,
    specialize_multivector,
    wedge,
)
from schouten_lab.poisson import PoissonTensor, Verdict, hamiltonian_vf, measure, poisson_bracket
from schouten_lab.scalar import (
    Chart,
    PointLike,
    Scalar,
    ScalarField,
    as_coords,
    as_fraction,
    coordinates,
    specialize,
    with_parameter,
)

logger = logging.getLogger(__name__)

EULER_NAMES = ("y1", "y2", "y3", "z1", "z2", "z3")

Eta = tuple[Fraction, Fraction, Fraction]

# Table rows: eta and a representative eps of the stated sign.
ETA_PRESETS: dict[str, tuple[tuple[int, int, int], int]] = {
    "so(4)": ((1, 1, 1), 1),
    "e(3)": ((1, 1, 1), 0),
    "so(2,2)": ((1, 1, -1), 1),
    "l(3)": ((1, 1, -1), 0),
    "so(3,1)": ((1, 1, 1), -1),
}


class EulerReading(str, enum.Enum):
    """Sign of the Euler generator (and of eps in its closed-form flow)."""

    CORRECTED = "corrected"
    PRINTED = "printed"

    @property
    def sign(self) -> int:
        return -1 if self is EulerReading.CORRECTED else 1


def as_eta(values: Sequence[Scalar]) -> Eta:
    if len(values) != 3:
        raise ValueError(f"eta needs three diagonal entries, got {len(values)}")
    a, b, c = (as_fraction(v) for v in values)
    return (a, b, c)


def euler_chart(domain: Callable[[np.ndarray], bool] | None = None) -> Chart:
    return Chart(EULER_NAMES, domain)


def _levi_civita(i: int, j: int) -> tuple[int, int]:
    """Third index and sign of ``e_ijk`` for distinct ``i, j``."""
    return 3 - i - j, (1 if (j - i) % 3 == 1 else -1)


def _split(chart: Chart) -> tuple[list[ScalarField], list[ScalarField]]:
    xs = coordinates(chart)
    return list(xs[:3]), list(xs[3:6])


def _dot(a: Sequence[ScalarField], b: Sequence[ScalarField]) -> ScalarField:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a: Sequence[ScalarField], b: Sequence[ScalarField]) -> list[ScalarField]:
    return [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]


def _scaled(eta: Eta, v: Sequence[ScalarField]) -> list[ScalarField]:
    return [v[i] * eta[i] for i in range(3)]


def euler_phi(eta: Sequence[Scalar], chart: Chart | None = None) -> Multivector:
    """``Phi(df, dg) = (eta(y) x grad_z f) . grad_z g``."""
    eta3 = as_eta(eta)
    chart = chart or euler_chart()
    y, _ = _split(chart)
    comps: dict[Key, ScalarField] = {}
    for i, j in ((0, 1), (0, 2), (1, 2)):
        k, sign = _levi_civita(i, j)
        comps[(3 + i, 3 + j)] = y[k] * (sign * eta3[k])
    return Multivector(chart, 2, comps)


def _euler_body(eta3: Eta, eps: Scalar, chart: Chart) -> Multivector:
    y, z = _split(chart)
    comps: dict[Key, ScalarField] = {}
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            k, sign = _levi_civita(i, j)
            comps[(i, 3 + j)] = z[k] * (sign * eta3[k])
            if i < j:
                comps[(i, j)] = y[k] * (sign * eta3[k])
    return Multivector(chart, 2, comps) + as_fraction(eps) * euler_phi(eta3, chart)


def euler_tensor(
    eta: Sequence[Scalar], eps: Scalar, chart: Chart | None = None
) -> PoissonTensor:
    """``Psi_{eta, eps}``, Jacobi-checked symbolically."""
    body = _euler_body(as_eta(eta), eps, chart or euler_chart())
    tensor = PoissonTensor.verify(body)
    logger.debug("euler tensor eta=%s eps=%s: %s", eta, eps, tensor.status.value)
    return tensor


def euler_series(eta: Sequence[Scalar], chart: Chart | None = None) -> DeformationSeries:
    """``(Psi_0, Phi)``: the family is linear in eps."""
    chart = chart or euler_chart()
    return DeformationSeries((_euler_body(as_eta(eta), 0, chart), euler_phi(eta, chart)))


def euler_casimirs(
    eta: Sequence[Scalar], eps: Scalar, chart: Chart | None = None
) -> tuple[ScalarField, ScalarField]:
    """``k1 = eta(y).z`` and ``k2 = eps/2 eta(y).y + 1/2 eta(z).z``."""
    eta3 = as_eta(eta)
    y, z = _split(chart or euler_chart())
    ey = _scaled(eta3, y)
    half = Fraction(1, 2)
    k1 = _dot(ey, z)
    k2 = _dot(ey, y) * (half * as_fraction(eps)) + _dot(_scaled(eta3, z), z) * half
    return k1, k2


def euler_generator_field(
    eta: Sequence[Scalar],
    reading: EulerReading = EulerReading.CORRECTED,
    chart: Chart | None = None,
) -> Multivector:
    """``sign * (eta(y).y) / (2 D) * eta(y) x (z x y) d_z`` as an exact vector field."""
    eta3 = as_eta(eta)
    chart = chart or euler_chart()
    y, z = _split(chart)
    ey = _scaled(eta3, y)
    d = _dot(_cross(ey, _scaled(eta3, z)), _cross(y, z))
    coefficient = _dot(ey, y) * reading.sign / (d * 2)
    direction = _cross(ey, _cross(z, y))
    comps: dict[Key, ScalarField] = {(3 + i,): coefficient * direction[i] for i in range(3)}
    return Multivector(chart, 1, comps)


def euler_generator(
    eta: Sequence[Scalar],
    reading: EulerReading = EulerReading.CORRECTED,
    chart: Chart | None = None,
) -> EpsVectorField:
    """The straightening generator; evaluating it where ``D = 0`` raises DomainExit."""
    return EpsVectorField.from_field(euler_generator_field(eta, reading, chart))


def euler_generator_residual(
    eta: Sequence[Scalar], reading: EulerReading = EulerReading.CORRECTED
) -> list[Multivector]:
    """Exact defects of the order-0 and order-1 equations for a constant generator.

    Both vanish exactly when the generator solves ``[[X, Psi_eps]] = -Phi`` for
    every eps.
    """
    chart = euler_chart()
    x = euler_generator_field(eta, reading, chart)
    gens = GeneratorSeries((x, Multivector.zero(chart, 1)))
    return homological_residual(gens, euler_series(eta, chart).padded(2), 2)


def resolve_euler_reading(eta: Sequence[Scalar]) -> EulerReading:
    """The generator sign whose homological residual vanishes identically."""
    for reading in EulerReading:
        if all(r.is_zero for r in euler_generator_residual(eta, reading)):
            logger.info("euler generator reading: %s", reading.value)
            return reading
    raise ValueError(f"no generator reading solves the euler family for eta={eta}")


def euler_first_order_generator(
    eta: Sequence[Scalar], chart: Chart | None = None
) -> Multivector:
    """``X_0 = -(eta(y) x (z x y)) / (2 eta(z).z) d_z``.

    Solves ``[[X_0, Psi_0]] + Phi = 0`` on ``eta(z).z != 0``.
    """
    eta3 = as_eta(eta)
    chart = chart or euler_chart()
    y, z = _split(chart)
    ey = _scaled(eta3, y)
    denominator = _dot(_scaled(eta3, z), z) * 2
    direction = _cross(ey, _cross(z, y))
    return Multivector(chart, 1, {(3 + i,): -direction[i] / denominator for i in range(3)})


def _euler_parts(eta3: Eta, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
    e = np.array([float(v) for v in eta3])
    y, z = x[:3], x[3:]
    s = float(np.dot(e * y, y))
    d = float(np.dot(np.cross(e * y, e * z), np.cross(y, z)))
    return y, z, s, d


def euler_radicand(
    eta: Sequence[Scalar],
    eps: float,
    point: PointLike,
    reading: EulerReading = EulerReading.CORRECTED,
) -> float:
    """``alpha**2`` of the closed-form flow."""
    _, _, s, d = _euler_parts(as_eta(eta), as_coords(euler_chart(), point))
    if d == 0.0:
        raise DenominatorZero("(eta(y) x eta(z)).(y x z) vanishes")
    return 1.0 + reading.sign * eps * s * s / d


def euler_flow(
    eta: Sequence[Scalar],
    eps: float,
    point: PointLike,
    reading: EulerReading = EulerReading.CORRECTED,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Closed-form image of ``point`` under the generator's flow at ``eps``.

    Raises:
        DenominatorZero: if ``eta(y).y`` or ``D`` vanishes.
        RadicandNonpositive: if ``alpha**2 <= 0``.
    """
    eta3 = as_eta(eta)
    x = as_coords(euler_chart(), point)
    y, z, s, d = _euler_parts(eta3, x)
    if abs(s) <= tolerances.pole:
        raise DenominatorZero("eta(y).y vanishes")
    if abs(d) <= tolerances.pole:
        raise DenominatorZero("(eta(y) x eta(z)).(y x z) vanishes")
    radicand = 1.0 + reading.sign * eps * s * s / d
    if radicand <= 0.0:
        raise RadicandNonpositive(f"alpha**2 = {radicand:.6g} at eps={eps}")
    alpha = math.sqrt(radicand)
    e = np.array([float(v) for v in eta3])
    shift = float(np.dot(e * y, z)) / s
    return np.concatenate([y, alpha * z + (1.0 - alpha) * shift * y])


def euler_flow_map(
    eta: Sequence[Scalar],
    eps: float,
    reading: EulerReading = EulerReading.CORRECTED,
) -> DiffeoMap:
    """``gamma_eps`` with ``gamma_{-eps}`` as inverse; Jacobian by central differences."""
    return DiffeoMap(
        euler_chart(),
        forward=lambda x: euler_flow(eta, eps, x, reading),
        inverse=lambda x: euler_flow(eta, -eps, x, reading),
    )


def euler_normal_form(
    h: ScalarField,
    eta: Sequence[Scalar],
    eps: float,
    reading: EulerReading = EulerReading.CORRECTED,
) -> ScalarField:
    """``H_eps = H o gamma_eps``, numeric because ``alpha`` is a square root."""
    if h.chart.names != EULER_NAMES:
        raise ChartMismatch(f"hamiltonian on {h.chart.names}, expected {EULER_NAMES}")
    g = h.as_numeric()
    return ScalarField.numeric(h.chart, lambda x: g(euler_flow(eta, eps, x, reading)))


def euler_trajectory_discrepancy(
    h: ScalarField,
    eta: Sequence[Scalar],
    eps: float,
    x0: PointLike,
    t_final: float = 1.0,
    tol: float = DEFAULT_TOLERANCES.integrator,
    samples: int = 11,
) -> float:
    """Max distance between ``x(t)`` and ``gamma_eps(u(t))`` over ``[0, t_final]``.

    ``x`` follows ``H`` under ``Psi_eps``; ``u`` follows ``H_eps`` under
    ``Psi_0`` and starts at ``gamma_eps^{-1}(x0)``.
    """
    chart = h.chart
    times = np.linspace(0.0, t_final, samples)
    start = as_coords(chart, x0)
    perturbed = hamiltonian_flow(euler_tensor(eta, eps, chart), h, start, t_final, tol, times)
    u0 = euler_flow(eta, -eps, start)
    normal = hamiltonian_flow(
        euler_tensor(eta, 0, chart), euler_normal_form(h, eta, eps), u0, t_final, tol, times
    )
    worst = 0.0
    for k in range(len(times)):
        mapped = euler_flow(eta, eps, normal.states[:, k])
        worst = max(worst, float(np.max(np.abs(mapped - perturbed.states[:, k]))))
    return worst


def euler_conservation_drift(
    h: ScalarField,
    eta: Sequence[Scalar],
    eps: float,
    x0: PointLike,
    t_final: float = 1.0,
    tol: float = DEFAULT_TOLERANCES.integrator,
) -> dict[str, float]:
    """Drift of ``H``, ``k1`` and ``k2`` along a trajectory of ``Psi_eps``."""
    k1, k2 = euler_casimirs(eta, eps, h.chart)
    trajectory = hamiltonian_flow(euler_tensor(eta, eps, h.chart), h, x0, t_final, tol)
    out: dict[str, float] = {}
    for name, f in (("hamiltonian", h), ("k1", k1), ("k2", k2)):
        values = f.evaluate_many(trajectory.states.T)
        out[name] = float(np.max(np.abs(values - values[0])))
    return out


def euler_generators(
    eta: Sequence[Scalar], order: int, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> GeneratorSeries:
    """``X_0..X_{order-1}``: ``X_0`` in closed form, later coefficients from the solver.

    ``X_1`` and beyond come from :func:`solve_order` on :func:`euler_foliation`,
    so they live on that chart's domain.
    """
    fol = euler_foliation(eta)
    x0 = euler_first_order_generator(eta, fol.chart)
    if order <= 1:
        return GeneratorSeries((x0,)[:order])
    series = euler_series(eta, fol.chart).padded(order)
    return solve_order(fol, series, order, tolerances=tolerances, start=GeneratorSeries((x0,)))


def euler_order_residuals(
    eta: Sequence[Scalar],
    order: int,
    eps_values: Sequence[float],
    points: Sequence[PointLike] | np.ndarray,
) -> list[float]:
    """Straightening residuals of the order-truncated Lie transform.

    Order 1 uses the closed-form ``X_0``; order 2 adds ``X_1`` from the
    leafwise solver, so points must lie in the foliation's domain.
    """
    if order not in (1, 2):
        raise ValueError(f"order test covers orders 1 and 2, got {order}")
    gens = euler_generators(eta, order)
    chart = gens.coefficients[0].chart
    return order_residuals(euler_series(eta, chart), gens, order, eps_values, points)


def euler_order_slope(
    eta: Sequence[Scalar],
    order: int,
    eps_values: Sequence[float],
    points: Sequence[PointLike] | np.ndarray,
) -> float:
    return convergence_slope(eps_values, euler_order_residuals(eta, order, eps_values, points))


FOLIATION_MARGIN = 0.25


def _foliation_domain(eta3: Eta, margin: float) -> Callable[[np.ndarray], bool]:
    e = np.array([float(v) for v in eta3])

    def predicate(x: np.ndarray) -> bool:
        z = x[3:]
        return bool(abs(z[2]) > margin and np.dot(e * z, z) / e[2] > margin**2)

    return predicate


def euler_foliation(eta: Sequence[Scalar], margin: float = FOLIATION_MARGIN) -> FoliationData:
    """Leaves of ``Psi_0`` as graphs over ``y1, y2, z1, z2``.

    The Casimirs depend on the leaf coordinates, so the chart is not adapted;
    leaves are solved for ``y3, z3``. The domain keeps ``|z3| > margin`` along
    the whole radial path to the origin: ``|z3| > margin`` and
    ``eta(z).z / eta3 > margin**2``.
    """
    eta3 = as_eta(eta)
    chart = euler_chart(_foliation_domain(eta3, margin))
    y, z = _split(chart)
    ez = _scaled(eta3, z)
    norm = _dot(ez, ez)
    ey_ez = _dot(_scaled(eta3, y), ez)
    v1 = Multivector(chart, 1, {(i,): ez[i] / norm for i in range(3)})
    v2 = Multivector(
        chart,
        1,
        {(3 + i,): ez[i] / norm for i in range(3)}
        | {(i,): -(ey_ez * ez[i]) / (norm * norm) for i in range(3)},
    )
    return FoliationData(
        poisson=euler_tensor(eta3, 0, chart),
        casimirs=euler_casimirs(eta3, 0, chart),
        duals=(v1, v2),
        leaf_indices=(0, 1, 3, 4),
    )


@dataclass(frozen=True)
class EulerInstance:
    """One Euler family with its Hamiltonian and working eps interval."""

    eta: Eta
    eps_radius: float = 0.2
    hamiltonian: ScalarField | None = None

    @classmethod
    def create(
        cls,
        eta: Sequence[Scalar],
        eps_radius: float = 0.2,
        hamiltonian: str | None = None,
    ) -> EulerInstance:
        chart = euler_chart()
        text = hamiltonian or "(y1^2 + y2^2 + y3^2 + z1^2 + z2^2 + z3^2)/2"
        return cls(as_eta(eta), eps_radius, ScalarField.parse(chart, text))

    @classmethod
    def preset(cls, name: str) -> tuple[EulerInstance, int]:
        """Instance and representative eps for a named table row."""
        try:
            eta, eps = ETA_PRESETS[name]
        except KeyError:
            choices = sorted(ETA_PRESETS)
            raise ValueError(f"unknown preset {name!r}; choose from {choices}") from None
        return cls.create(eta), eps

    @property
    def chart(self) -> Chart:
        return euler_chart()

    def tensor(self, eps: Scalar) -> PoissonTensor:
        return euler_tensor(self.eta, eps)

    def series(self) -> DeformationSeries:
        return euler_series(self.eta)

    def casimirs(self, eps: Scalar) -> tuple[ScalarField, ScalarField]:
        return euler_casimirs(self.eta, eps)

    def in_generator_domain(self, x: np.ndarray, margin: float = 1e-6) -> bool:
        """``D != 0`` (the domain of the straightening generator)."""
        _, _, s, d = _euler_parts(self.eta, x)
        return abs(d) > margin and abs(s) > margin

    def in_first_order_domain(self, x: np.ndarray, margin: float = 1e-6) -> bool:
        """``eta(z).z != 0``."""
        e = np.array([float(v) for v in self.eta])
        return bool(abs(np.dot(e * x[3:], x[3:])) > margin)

    def in_foliation_domain(self, x: np.ndarray, margin: float = FOLIATION_MARGIN) -> bool:
        """Inside the chart of :func:`euler_foliation` with the given margin."""
        return _foliation_domain(self.eta, margin)(x)

    def flow_safe(
        self, eps_grid: Sequence[float], min_radicand: float = 0.1
    ) -> Callable[[np.ndarray], bool]:
        """Predicate: the closed-form radicand stays above ``min_radicand`` on the grid."""

        def predicate(x: np.ndarray) -> bool:
            if not self.in_generator_domain(x):
                return False
            return all(euler_radicand(self.eta, e, x) >= min_radicand for e in eps_grid)

        return predicate


# --------------------------------------------------------------------------
# Dirac brackets


@dataclass(frozen=True)
class DiracInstance:
    """Constrained deformation data, every family on ``with_parameter(base)``.

    ``omega`` and ``theta`` hold covariant components: ``omega[(i, j)]`` is the
    coefficient of ``dx_i ^ dx_j`` and ``theta[(k,)]`` that of ``dx_k``.
    """

    base: Chart
    psi: ParametrizedFamily
    constraints: tuple[ScalarField, ...]
    omega: ParametrizedFamily | None = None
    theta: ParametrizedFamily | None = None

    def __post_init__(self) -> None:
        ext = self.extended
        if self.psi.degree != 2:
            raise WrongDegree(f"psi must be a bivector family, got degree {self.psi.degree}")
        for a in self.constraints:
            if a.chart != ext:
                raise ChartMismatch(f"constraint on {a.chart.names}, expected {ext.names}")
        if self.omega is not None and self.omega.degree != 2:
            raise WrongDegree("omega must be a 2-form family")
        if self.theta is not None and self.theta.degree != 1:
            raise WrongDegree("theta must be a 1-form family")

    @property
    def extended(self) -> Chart:
        return self.psi.body.chart

    @property
    def rank(self) -> int:
        return len(self.constraints)


def dirac_demo_instance() -> DiracInstance:
    """``w = dq1^dp1 + dq2^dp2 + eps dq1^dq2`` with ``A = (q2, p2 + eps q1)``."""
    base = Chart(("q1", "p1", "q2", "p2"))
    ext = with_parameter(base)
    return DiracInstance(
        base=base,
        psi=ParametrizedFamily(
            Multivector.parse(ext, 2, {"0,1": "1", "2,3": "1", "1,3": "-eps"}), base
        ),
        constraints=(ScalarField.parse(ext, "q2"), ScalarField.parse(ext, "p2 + eps*q1")),
        omega=ParametrizedFamily(
            Multivector.parse(ext, 2, {"0,1": "1", "2,3": "1", "0,2": "eps"}), base
        ),
        theta=ParametrizedFamily(Multivector.parse(ext, 1, {"2": "q1"}), base),
    )


def _constraint_fields(inst: DiracInstance) -> list[Multivector]:
    return [hamiltonian_vf(inst.psi.body, a) for a in inst.constraints]


def _delta_family(inst: DiracInstance) -> tuple[list[list[ScalarField]], list[list[ScalarField]]]:
    body = inst.psi.body
    r = inst.rank
    a = inst.constraints
    delta = [[poisson_bracket(body, a[i], a[j]) for j in range(r)] for i in range(r)]
    if r == 0:
        return delta, []
    if field_det(delta).is_zero:
        raise SingularDelta(f"constraint matrix of {r} constraints is singular")
    return delta, field_inverse(delta)


def dirac_delta(
    inst: DiracInstance, eps: Scalar
) -> tuple[list[list[ScalarField]], list[list[ScalarField]]]:
    """``Delta^ij = {A^i, A^j}`` at ``eps`` and its inverse ``Delta_ij``.

    Raises:
        SingularDelta: if ``det Delta`` vanishes identically (always for odd r).
    """
    delta, inverse = _delta_family(inst)
    return (
        [[specialize(f, inst.base, eps) for f in row] for row in delta],
        [[specialize(f, inst.base, eps) for f in row] for row in inverse],
    )


def dirac_family(inst: DiracInstance) -> ParametrizedFamily:
    """``Psi_DIR`` as an eps-family."""
    _, inverse = _delta_family(inst)
    fields = _constraint_fields(inst)
    out = inst.psi.body
    for i in range(inst.rank):
        for j in range(i + 1, inst.rank):
            out = out + inverse[i][j] * wedge(fields[i], fields[j])
    return ParametrizedFamily(out, inst.base)


def dirac_tensor(inst: DiracInstance, eps: Scalar) -> PoissonTensor:
    return PoissonTensor.verify(dirac_family(inst).at(eps))


def dirac_transversal_fields(inst: DiracInstance, eps: Scalar) -> list[Multivector]:
    """``Z_i = sum_k Delta_ik X_{A^k}``, normalized by ``dA^j(Z_i) = delta_ij``."""
    _, inverse = _delta_family(inst)
    fields = _constraint_fields(inst)
    out = []
    for i in range(inst.rank):
        z = Multivector.zero(inst.extended, 1)
        for k in range(inst.rank):
            z = z + inverse[i][k] * fields[k]
        out.append(specialize_multivector(z, inst.base, eps))
    return out


def _theta_components(inst: DiracInstance) -> list[ScalarField]:
    if inst.theta is None:
        if inst.omega is not None and inst.omega.derivative().body.is_zero:
            return [ScalarField.zero(inst.extended)] * inst.base.dim
        raise MissingThetaFamily("the generator needs a 1-form family with d(theta) = dw/deps")
    return [inst.theta.body[(k,)] for k in range(inst.base.dim)]


def dirac_generator_family(inst: DiracInstance) -> ParametrizedFamily:
    """The generator that straightens ``Psi_DIR`` as an eps-family."""
    theta = _theta_components(inst)
    _, inverse = _delta_family(inst)
    fields = _constraint_fields(inst)
    eps_index = inst.base.dim
    rates = [a.partial(eps_index) for a in inst.constraints]
    out = contract_covector(dirac_family(inst).body, theta)
    for i in range(inst.rank):
        for j in range(inst.rank):
            weight = inverse[i][j] * rates[j]
            if not weight.is_zero:
                out = out + weight * fields[i]
    return ParametrizedFamily(out, inst.base)


def dirac_generator(inst: DiracInstance, eps: Scalar) -> Multivector:
    """Raises MissingThetaFamily or SingularDelta."""
    return dirac_generator_family(inst).at(eps)


def dirac_theta_defect(
    inst: DiracInstance,
    points: Sequence[PointLike] | np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Verdict:
    """Does ``d(theta) - dw/deps`` vanish on the leaves of ``Psi_DIR``?

    The 2-form is evaluated on every pair of Hamiltonian fields
    ``Psi_DIR(dx_a, .)``, which span the leaf tangents. Points live on the
    parameter-extended chart.
    """
    if inst.omega is None:
        raise ValueError("instance has no symplectic form family to compare with")
    theta = _theta_components(inst)
    n = inst.base.dim
    ext = inst.extended
    omega_rate = inst.omega.derivative().body
    beta: dict[tuple[int, int], ScalarField] = {}
    for i in range(n):
        for j in range(i + 1, n):
            beta[(i, j)] = theta[j].partial(i) - theta[i].partial(j) - omega_rate[(i, j)]
    psi = dirac_family(inst).body
    comps: dict[Key, ScalarField] = {}
    for a in range(n):
        for b in range(a + 1, n):
            total = ScalarField.zero(ext)
            for (i, j), value in beta.items():
                if value.is_zero:
                    continue
                minor = psi[(a, i)] * psi[(b, j)] - psi[(a, j)] * psi[(b, i)]
                total = total + minor * value
            comps[(a, b)] = total
    residual = Multivector(ext, 2, comps)
    return measure(residual, points, tolerances.closedness, tolerances)


def dirac_instance_defects(
    inst: DiracInstance,
    eps: Scalar,
    points: Sequence[PointLike] | np.ndarray,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, float]:
    """Sampled checks of the instance hypotheses at ``eps``.

    ``inverse``: ``|Psi w + 1|`` (``Psi^ij w_jk = -delta^i_k``);
    ``closed``: ``|dw|``; ``delta_inverse``: ``|Delta Delta^-1 - 1|``;
    ``delta_det``: smallest ``|det Delta|``.
    """
    n = inst.base.dim
    psi = inst.psi.at(eps)
    delta, inverse = dirac_delta(inst, eps)
    omega = inst.omega.at(eps) if inst.omega is not None else None
    out = {"inverse": 0.0, "closed": 0.0, "delta_inverse": 0.0, "delta_det": math.inf}
    for x in points:
        coords = as_coords(inst.base, x)
        if omega is not None:
            product = psi.matrix_at(coords, tolerances) @ omega.matrix_at(coords, tolerances)
            out["inverse"] = max(out["inverse"], float(np.max(np.abs(product + np.eye(n)))))
            for i in range(n):
                for j in range(i + 1, n):
                    for k in range(j + 1, n):
                        d = (
                            omega[(j, k)].partial(i)(coords, tolerances)
                            - omega[(i, k)].partial(j)(coords, tolerances)
                            + omega[(i, j)].partial(k)(coords, tolerances)
                        )
                        out["closed"] = max(out["closed"], abs(d))
        if inst.rank:
            dm = np.array([[f(coords, tolerances) for f in row] for row in delta])
            im = np.array([[f(coords, tolerances) for f in row] for row in inverse])
            out["delta_inverse"] = max(
                out["delta_inverse"], float(np.max(np.abs(dm @ im - np.eye(inst.rank))))
            )
            out["delta_det"] = min(out["delta_det"], abs(float(np.linalg.det(dm))))
    return out
