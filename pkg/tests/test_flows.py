"""Tests for eps-flows, transport and the triviality check."""

import math

import numpy as np
import pytest  # ty:ignore[unresolved-import]
from utils import canonical, field, vector

from schouten_lab import (
    Chart,
    EpsVectorField,
    GeneratorSeries,
    Multivector,
    ParametrizedFamily,
    check_triviality,
    flow_map,
    hamiltonian_flow,
    integrate_flow,
)
from schouten_lab.errors import DomainExit, WrongDegree
from schouten_lab.flows import (
    convergence_slope,
    order_residuals,
    pullback_along_flow,
    taylor_flow_map,
)
from schouten_lab.scalar import with_parameter

XY = Chart(("x", "y"))
EXT = with_parameter(XY)
# gamma_eps(x, y) = ((1 + eps) x, y) straightens (1 + eps) dx ^ dy
STRETCH = ParametrizedFamily(Multivector.parse(EXT, 1, {"0": "x/(1 + eps)"}), XY)
GROWING = ParametrizedFamily(Multivector.parse(EXT, 2, {"0,1": "1 + eps"}), XY)
POINTS = np.array([[0.5, 0.2], [-0.3, 1.1], [1.2, -0.7]])


class TestIntegrateFlow:
    """Tests for integrate_flow and flow_map."""

    def test_linear_field(self) -> None:
        result = integrate_flow(EpsVectorField.from_field(vector(XY, "x", "0")), [2.0, 3.0], 0.5)
        assert result.point == pytest.approx([2.0 * math.exp(0.5), 3.0], rel=1e-7)
        assert result.jacobian is not None
        assert result.jacobian == pytest.approx(np.diag([math.exp(0.5), 1.0]), rel=1e-7)
        assert result.n_steps > 0

    def test_zero_eps_is_identity(self) -> None:
        result = integrate_flow(EpsVectorField.from_field(vector(XY, "y", "x")), [1.0, 2.0], 0.0)
        assert result.point == pytest.approx([1.0, 2.0])
        assert result.n_steps == 0

    def test_series_field(self) -> None:
        gens = GeneratorSeries((vector(XY, "1", "0"), vector(XY, "0", "1")))
        result = integrate_flow(EpsVectorField.from_series(gens, XY), [0.0, 0.0], 0.4)
        assert result.point == pytest.approx([0.4, 0.08], abs=1e-8)

    def test_family_field(self) -> None:
        result = integrate_flow(EpsVectorField.from_family(STRETCH), [2.0, 1.0], 0.25)
        assert result.point == pytest.approx([2.5, 1.0], rel=1e-7)

    def test_map_inverse(self) -> None:
        gamma = flow_map(EpsVectorField.from_field(vector(XY, "y^2", "-x")), 0.3)
        x = np.array([0.4, -0.2])
        assert gamma.inverse(gamma.forward(x)) == pytest.approx(x, abs=1e-8)

    def test_jacobian_by_differences(self) -> None:
        base = EpsVectorField.from_field(vector(XY, "x", "0"))
        no_jacobian = EpsVectorField(XY, velocity=base.velocity)
        result = integrate_flow(no_jacobian, [1.0, 1.0], 0.2, tol=1e-12)
        assert result.jacobian == pytest.approx(np.diag([math.exp(0.2), 1.0]), rel=1e-4, abs=1e-5)

    def test_eps_radius(self) -> None:
        f = EpsVectorField.from_field(vector(XY, "1", "0"), eps_radius=0.1)
        with pytest.raises(DomainExit):
            integrate_flow(f, [0.0, 0.0], 0.5)

    def test_start_outside_domain(self) -> None:
        half = XY.restrict(lambda x: x[0] > 0)
        f = EpsVectorField.from_field(Multivector.basis(half, 0))
        with pytest.raises(DomainExit):
            integrate_flow(f, [-1.0, 0.0], 0.1)

    def test_leaving_domain(self) -> None:
        half = XY.restrict(lambda x: x[0] > 0)
        f = EpsVectorField.from_field(-Multivector.basis(half, 0))
        with pytest.raises(DomainExit):
            integrate_flow(f, [0.1, 0.0], 1.0)

    def test_vector_field_required(self) -> None:
        with pytest.raises(WrongDegree):
            EpsVectorField.from_field(Multivector.basis(XY, 0, 1))


class TestTriviality:
    """Tests for check_triviality."""

    def test_straightened(self) -> None:
        report = check_triviality(
            GROWING, EpsVectorField.from_family(STRETCH), [-0.2, 0.1, 0.2], POINTS, 1e-6
        )
        assert report.passed
        assert report.parameters["homological_residual"] == pytest.approx(0.0, abs=1e-12)
        assert report.grid == [-0.2, 0.1, 0.2]

    def test_wrong_field_fails(self) -> None:
        report = check_triviality(GROWING, EpsVectorField.zero(XY), [0.1, 0.2], POINTS, 1e-6)
        assert not report.passed
        assert report.max_residual == pytest.approx(1.0)

    def test_pullback_components(self) -> None:
        pulled = pullback_along_flow(GROWING, EpsVectorField.from_family(STRETCH), 0.2, POINTS)
        assert len(pulled) == len(POINTS)
        for components in pulled:
            assert components[(0, 1)] == pytest.approx(1.0, abs=1e-7)

    def test_named(self) -> None:
        report = check_triviality(
            GROWING, EpsVectorField.from_family(STRETCH), [0.1], POINTS, 1e-6, name="stretch"
        )
        assert report.check == "stretch"


class TestHamiltonianFlow:
    """Tests for hamiltonian_flow."""

    def test_rotation(self) -> None:
        chart, psi = canonical()
        h = field(chart, "(q1^2 + p1^2)/2")
        traj = hamiltonian_flow(psi, h, [1.0, 0.0], math.pi / 2, tol=1e-10)
        assert traj.final == pytest.approx([0.0, 1.0], abs=1e-7)

    def test_energy_conserved(self) -> None:
        chart, psi = canonical()
        h = field(chart, "q1^2*p1 + p1^2/2")
        traj = hamiltonian_flow(psi, h, [0.3, 0.2], 1.0, tol=1e-10, t_eval=np.linspace(0, 1, 11))
        energies = h.evaluate_many(traj.states.T)
        assert np.ptp(energies) < 1e-7
        assert len(traj.times) == 11


class TestOrderResiduals:
    """Truncated flows and convergence slopes."""

    def test_taylor_map_translation(self) -> None:
        gamma = taylor_flow_map(GeneratorSeries((vector(XY, "1", "0"),)), XY, 1, 0.25)
        assert gamma.forward(np.array([1.0, 2.0])) == pytest.approx([1.25, 2.0])

    def test_first_order_stretch(self) -> None:
        gens = GeneratorSeries((vector(XY, "x", "0"),))
        residuals = order_residuals(GROWING, gens, 1, [0.1, 0.05], POINTS)
        assert max(residuals) < 1e-12

    def test_slope(self) -> None:
        assert convergence_slope([0.1, 0.01, 0.001], [1e-2, 1e-4, 1e-6]) == pytest.approx(2.0)
