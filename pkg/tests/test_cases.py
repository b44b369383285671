"""Tests for the Euler and Dirac families."""

import dataclasses
import math

import numpy as np
import pytest  # ty:ignore[unresolved-import]

from schouten_lab import (
    Chart,
    JacobiStatus,
    Multivector,
    ScalarField,
    hamiltonian_vf,
    homological_residual,
    integrate_flow,
    poisson_bracket,
    recursive_rhs,
    schouten,
)
from schouten_lab.cases import (
    ETA_PRESETS,
    DiracInstance,
    EulerInstance,
    EulerReading,
    as_eta,
    dirac_delta,
    dirac_family,
    dirac_generator,
    dirac_generator_family,
    dirac_instance_defects,
    dirac_tensor,
    dirac_theta_defect,
    dirac_transversal_fields,
    euler_casimirs,
    euler_conservation_drift,
    euler_first_order_generator,
    euler_flow,
    euler_flow_map,
    euler_foliation,
    euler_generator,
    euler_generator_residual,
    euler_generators,
    euler_normal_form,
    euler_order_slope,
    euler_phi,
    euler_radicand,
    euler_series,
    euler_tensor,
    euler_trajectory_discrepancy,
    resolve_euler_reading,
)
from schouten_lab.errors import (
    ChartMismatch,
    DenominatorZero,
    MissingThetaFamily,
    RadicandNonpositive,
    SingularDelta,
)
from schouten_lab.multivector import component_distance, pullback_at
from schouten_lab.sampling import sample_points
from schouten_lab.scalar import specialize

# (y, z) = (e1, e2): s = D = 1
SPOT = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
GENERIC = [1.0, 0.5, 0.2, 0.3, 1.0, -0.4]


class TestEulerTensor:
    """Jacobi, Casimirs and the linear series."""

    @pytest.mark.parametrize("name", sorted(ETA_PRESETS))
    def test_table_rows_are_poisson(self, name: str) -> None:
        eta, eps = ETA_PRESETS[name]
        assert euler_tensor(eta, eps).status is JacobiStatus.VERIFIED

    @pytest.mark.parametrize("eps", [0, 1, -1, 0.5])
    def test_casimirs(self, eps: float) -> None:
        psi = euler_tensor((1, 1, -1), eps).body
        for k in euler_casimirs((1, 1, -1), eps):
            assert hamiltonian_vf(psi, k).is_zero

    def test_series_is_linear(self) -> None:
        series = euler_series((1, 1, 1))
        assert series.order == 1
        assert series.at(0.5) == euler_tensor((1, 1, 1), 0.5).body
        assert series.coefficient(1) == euler_phi((1, 1, 1))

    def test_phi_is_cocycle(self) -> None:
        psi0 = euler_tensor((1, 1, -1), 0).body
        assert schouten(psi0, euler_phi((1, 1, -1))).is_zero

    def test_eta_length(self) -> None:
        with pytest.raises(ValueError, match="three"):
            as_eta((1, 1))


class TestEulerInstance:
    """Presets and domains."""

    def test_preset(self) -> None:
        inst, eps = EulerInstance.preset("so(2,2)")
        assert inst.eta == as_eta((1, 1, -1))
        assert eps == 1

    def test_unknown_preset(self) -> None:
        with pytest.raises(ValueError, match="unknown preset"):
            EulerInstance.preset("so(5)")

    def test_default_hamiltonian(self, euler_instance: EulerInstance) -> None:
        assert euler_instance.hamiltonian is not None
        assert euler_instance.hamiltonian(SPOT) == pytest.approx(1.0)

    def test_domains(self, euler_instance: EulerInstance) -> None:
        assert euler_instance.in_generator_domain(np.array(SPOT))
        assert not euler_instance.in_generator_domain(np.array([1.0, 0, 0, 2.0, 0, 0]))
        assert not euler_instance.in_first_order_domain(np.zeros(6))

    def test_flow_safe(self, euler_instance: EulerInstance) -> None:
        safe = euler_instance.flow_safe([0.1, -0.1])
        assert safe(np.array(SPOT))
        assert not euler_instance.flow_safe([0.95])(np.array(SPOT))


class TestEulerGenerator:
    """The straightening generator and its closed-form flow."""

    @pytest.mark.parametrize("eta", [(1, 1, 1), (1, 1, -1), (1, 2, 3)])
    def test_reading_resolves(self, eta: tuple[int, int, int]) -> None:
        assert resolve_euler_reading(eta) is EulerReading.CORRECTED
        assert all(r.is_zero for r in euler_generator_residual(eta))

    def test_printed_reading_fails(self) -> None:
        residuals = euler_generator_residual((1, 1, 1), EulerReading.PRINTED)
        assert not all(r.is_zero for r in residuals)

    def test_first_order_generator(self) -> None:
        eta = (1, 1, -1)
        x0 = euler_first_order_generator(eta)
        psi0 = euler_tensor(eta, 0).body
        assert (schouten(x0, psi0) + euler_phi(eta)).is_zero

    def test_spot_alpha(self) -> None:
        assert euler_radicand((1, 1, 1), -0.21, SPOT) == pytest.approx(1.21)
        image = euler_flow((1, 1, 1), -0.21, SPOT)
        assert image == pytest.approx([1.0, 0.0, 0.0, 0.0, 1.1, 0.0])

    def test_generator_flow_matches_closed_form(self) -> None:
        result = integrate_flow(euler_generator((1, 1, 1)), GENERIC, 0.05, tol=1e-11)
        assert result.point == pytest.approx(euler_flow((1, 1, 1), 0.05, GENERIC), abs=1e-7)

    def test_group_inverse(self) -> None:
        there = euler_flow((1, 1, -1), 0.05, GENERIC)
        assert euler_flow((1, 1, -1), -0.05, there) == pytest.approx(GENERIC, abs=1e-12)

    def test_straightens(self) -> None:
        eta = (1, 1, 1)
        for eps in (-0.1, 0.05):
            pulled = pullback_at(euler_tensor(eta, eps).body, euler_flow_map(eta, eps), GENERIC)
            want = euler_tensor(eta, 0).body.at(GENERIC)
            assert component_distance(pulled, want) < 1e-6

    def test_degenerate_points(self) -> None:
        with pytest.raises(DenominatorZero):
            euler_flow((1, 1, 1), 0.1, [0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        with pytest.raises(RadicandNonpositive):
            euler_flow((1, 1, 1), 2.0, SPOT)

    @pytest.mark.integration
    def test_first_order_slope(self) -> None:
        inst = EulerInstance.create((1, 1, 1))
        points = sample_points(
            inst.chart,
            4,
            seed=7,
            where=lambda x: inst.in_first_order_domain(x) and inst.in_foliation_domain(x),
        )
        slope = euler_order_slope(inst.eta, 1, [0.1, 0.05, 0.025, 0.0125], points)
        assert slope >= 1.8


class TestEulerDynamics:
    """Normal form and conserved quantities."""

    def test_normal_form(self, euler_instance: EulerInstance) -> None:
        h = euler_instance.hamiltonian
        assert h is not None
        normal = euler_normal_form(h, euler_instance.eta, 0.05)
        image = euler_flow(euler_instance.eta, 0.05, GENERIC)
        assert normal(GENERIC) == pytest.approx(h(image))

    def test_normal_form_chart(self, euler_instance: EulerInstance) -> None:
        wrong = ScalarField.parse(Chart(("x",)), "x")
        with pytest.raises(ChartMismatch):
            euler_normal_form(wrong, euler_instance.eta, 0.1)

    def test_conservation(self, euler_instance: EulerInstance) -> None:
        h = euler_instance.hamiltonian
        assert h is not None
        drift = euler_conservation_drift(h, euler_instance.eta, 0.1, GENERIC, tol=1e-10)
        assert max(drift.values()) < 1e-6

    @pytest.mark.integration
    def test_trajectories_agree(self, split_euler_instance: EulerInstance) -> None:
        h = split_euler_instance.hamiltonian
        assert h is not None
        gap = euler_trajectory_discrepancy(
            h, split_euler_instance.eta, 0.05, GENERIC, t_final=0.5, tol=1e-11
        )
        assert gap < 1e-6


class TestEulerFoliation:
    """Leaf-graph foliation of Psi_0 and the solver-built generators."""

    def test_check(self) -> None:
        fol = euler_foliation((1, 1, 1))
        points = sample_points(fol.chart, 6, seed=2)
        verdicts = fol.check(points)
        assert verdicts["duality"].holds
        assert verdicts["casimir"].holds
        assert fol.leaf_rank == 4

    def test_leaf_graph_chart(self) -> None:
        fol = euler_foliation((1, 1, 1))
        assert not fol.is_adapted
        assert fol.is_leaf_graph
        assert fol.chart.contains(GENERIC)
        assert not fol.chart.contains([1.0, 0.5, 0.2, 0.3, 1.0, 0.1])

    def test_split_signature_domain(self, split_euler_instance: EulerInstance) -> None:
        # eta3 < 0: the leaf must reach the origin with z3^2 > z1^2 + z2^2
        assert split_euler_instance.in_foliation_domain(np.array([0, 0, 0, 0.3, 0.2, 1.0]))
        assert not split_euler_instance.in_foliation_domain(np.array([0, 0, 0, 1.0, 0.2, 0.5]))

    def test_first_order_generator_only(self) -> None:
        gens = euler_generators((1, 1, 1), 1)
        assert len(gens.coefficients) == 1
        assert gens.coefficients[0].is_exact

    @pytest.mark.integration
    def test_second_generator_solves_recursion(self, euler_instance: EulerInstance) -> None:
        gens = euler_generators(euler_instance.eta, 2)
        x1 = gens.coefficients[1]
        assert not x1.is_exact
        chart = x1.chart
        points = sample_points(chart, 5, seed=4)
        first, second = homological_residual(
            gens, euler_series(euler_instance.eta, chart).padded(2), 2
        )
        assert first.is_zero
        assert second.max_abs_at(points) < 1e-6
        rhs = recursive_rhs(1, euler_series(euler_instance.eta, chart).padded(2), gens)
        assert rhs.max_abs_at(points) > 1e-3

    @pytest.mark.integration
    def test_second_order_slope(self, euler_instance: EulerInstance) -> None:
        inst = euler_instance
        points = sample_points(
            inst.chart,
            4,
            seed=7,
            where=lambda x: inst.in_generator_domain(x, 1e-2) and inst.in_foliation_domain(x),
        )
        slope = euler_order_slope(inst.eta, 2, [0.1, 0.05, 0.025, 0.0125], points)
        assert slope >= 2.8


class TestDiracDemo:
    """The demo instance: constraints ``q2`` and ``p2 + eps q1``."""

    def test_delta(self, dirac_instance: DiracInstance) -> None:
        delta, inverse = dirac_delta(dirac_instance, 0.3)
        assert delta[0][1] == ScalarField.one(dirac_instance.base)
        assert inverse[0][1] == -ScalarField.one(dirac_instance.base)

    @pytest.mark.parametrize("eps", [0, 0.25, -1])
    def test_dirac_tensor_is_poisson(self, dirac_instance: DiracInstance, eps: float) -> None:
        assert dirac_tensor(dirac_instance, eps).status is JacobiStatus.VERIFIED

    def test_constraints_are_casimirs(self, dirac_instance: DiracInstance) -> None:
        eps = 0.5
        psi = dirac_tensor(dirac_instance, eps).body
        for a in dirac_instance.constraints:
            assert hamiltonian_vf(psi, specialize(a, dirac_instance.base, eps)).is_zero

    def test_transversal_normalized(self, dirac_instance: DiracInstance) -> None:
        eps = 0.5
        base = dirac_instance.base
        zs = dirac_transversal_fields(dirac_instance, eps)
        for i, z in enumerate(zs):
            for j, a in enumerate(dirac_instance.constraints):
                value = schouten(z, Multivector.scalar(specialize(a, base, eps))).scalar_value
                assert value == ScalarField.constant(base, int(i == j))

    def test_generator_solves_homological_equation(self, dirac_instance: DiracInstance) -> None:
        family = dirac_family(dirac_instance)
        generator = dirac_generator_family(dirac_instance)
        assert (schouten(generator.body, family.body) + family.derivative().body).is_zero

    def test_generator_at(self, dirac_instance: DiracInstance) -> None:
        x = dirac_generator(dirac_instance, 0.2)
        assert x.degree == 1 and x.chart == dirac_instance.base

    def test_theta(self, dirac_instance: DiracInstance) -> None:
        verdict = dirac_theta_defect(dirac_instance)
        assert verdict.holds and verdict.exact

    def test_instance_defects(self, dirac_instance: DiracInstance) -> None:
        points = sample_points(dirac_instance.base, 5, seed=11)
        defects = dirac_instance_defects(dirac_instance, 0.4, points)
        assert defects["inverse"] < 1e-12
        assert defects["closed"] < 1e-12
        assert defects["delta_inverse"] < 1e-12
        assert defects["delta_det"] == pytest.approx(1.0)


class TestDiracErrors:
    def test_odd_rank_is_singular(self, dirac_instance: DiracInstance) -> None:
        inst = dirac_instance
        single = DiracInstance(inst.base, inst.psi, inst.constraints[:1])
        with pytest.raises(SingularDelta):
            dirac_delta(single, 0.0)

    def test_missing_theta(self, dirac_instance: DiracInstance) -> None:
        with pytest.raises(MissingThetaFamily):
            dirac_generator(dataclasses.replace(dirac_instance, theta=None), 0.1)

    def test_theta_needs_omega(self, dirac_instance: DiracInstance) -> None:
        with pytest.raises(ValueError, match="symplectic"):
            dirac_theta_defect(dataclasses.replace(dirac_instance, omega=None))

    def test_constraint_chart(self, dirac_instance: DiracInstance) -> None:
        stray = ScalarField.parse(dirac_instance.base, "q1")
        with pytest.raises(ChartMismatch):
            DiracInstance(dirac_instance.base, dirac_instance.psi, (stray,))

    def test_bracket_of_constraints(self, dirac_instance: DiracInstance) -> None:
        a1, a2 = dirac_instance.constraints
        bracket = poisson_bracket(dirac_instance.psi.body, a1, a2)
        assert math.isclose(bracket([0.1, 0.2, 0.3, 0.4, 0.5]), 1.0)
