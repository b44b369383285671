"""Tests for deformation series, leafwise calculus and the homological solver."""

import numpy as np
import pytest  # ty:ignore[unresolved-import]
from utils import canonical, field, vector

from schouten_lab import (
    Chart,
    DeformationSeries,
    FoliationData,
    GeneratorSeries,
    Multivector,
    ParametrizedFamily,
    PoissonTensor,
    contract_differentials,
    hamiltonian_potential,
    hamiltonian_vf,
    homological_residual,
    homotopy_primitive,
    is_poisson_vf,
    kv_solve,
    lie_transform,
    recursive_rhs,
    schouten,
    sharp,
    sharp_invert,
    solve_order,
    transform_tensor,
    vertical_d,
)
from schouten_lab.cases import (
    EULER_NAMES,
    euler_first_order_generator,
    euler_foliation,
    euler_phi,
)
from schouten_lab.config import Tolerances
from schouten_lab.errors import (
    FoliationNotAdapted,
    InsufficientSeriesOrder,
    LeafMatrixSingular,
    NotClosed,
    NotCocycle,
    NotHamiltonian,
    NotVertical,
    WrongDegree,
)
from schouten_lab.homological import (
    VerticalForm,
    field_inverse,
    foliation_from_model,
    foliation_to_model,
)
from schouten_lab.sampling import sample_points
from schouten_lab.scalar import with_parameter


def generators(chart: Chart, *rows: tuple[str, ...]) -> GeneratorSeries:
    return GeneratorSeries(tuple(vector(chart, *row) for row in rows))


class TestSeries:
    """Tests for DeformationSeries and ParametrizedFamily."""

    def test_from_powers(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        b2 = Multivector.parse(chart, 2, {"0,2": "q1"})
        series = DeformationSeries.from_powers([psi, Multivector.zero(chart, 2), b2])
        assert series.coefficient(2) == 2 * b2
        assert series.at(0.5) == psi + Multivector.parse(chart, 2, {"0,2": "q1/4"})

    def test_coefficient_past_order_is_zero(self, split_foliation: FoliationData) -> None:
        series = DeformationSeries.constant(split_foliation.psi)
        assert series.coefficient(3).is_zero
        assert series.padded(3).order == 3
        assert series.derivative().coefficients[0].is_zero

    def test_mixed_degrees_rejected(self, split_foliation: FoliationData) -> None:
        with pytest.raises(WrongDegree):
            DeformationSeries((split_foliation.psi, Multivector.basis(split_foliation.chart, 0)))

    def test_empty_rejected(self) -> None:
        with pytest.raises(InsufficientSeriesOrder):
            DeformationSeries(())

    def test_family_taylor(self, split_foliation: FoliationData) -> None:
        base = split_foliation.chart
        ext = with_parameter(base)
        family = ParametrizedFamily(Multivector.parse(ext, 2, {"0,1": "1/(1 - eps*c1)"}), base)
        series = family.taylor(2)
        assert series.coefficient(1) == Multivector.parse(base, 2, {"0,1": "c1"})
        assert series.coefficient(2) == Multivector.parse(base, 2, {"0,1": "2*c1^2"})
        assert family.derivative().at(0) == series.coefficient(1)


class TestRecursion:
    """Tests for recursive_rhs, lie_transform and transform_tensor."""

    def test_order_zero(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        a1 = Multivector.parse(chart, 2, {"0,1": "c1"})
        rhs = recursive_rhs(0, DeformationSeries((psi, a1)), GeneratorSeries(()))
        assert rhs == -a1

    def test_needs_enough_terms(self, split_foliation: FoliationData) -> None:
        series = DeformationSeries.constant(split_foliation.psi)
        with pytest.raises(InsufficientSeriesOrder):
            recursive_rhs(0, series, GeneratorSeries(()))
        with pytest.raises(InsufficientSeriesOrder):
            recursive_rhs(1, series.padded(2), GeneratorSeries(()))

    def test_translation(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        c = Multivector.parse(chart, 2, {"0,1": "q1"})
        series = lie_transform(generators(chart, ("1", "0", "0")), c, 3)
        assert series.coefficient(1) == Multivector.basis(chart, 0, 1)
        assert series.coefficient(2).is_zero
        assert series.coefficient(3).is_zero

    def test_first_order_agrees(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        gens = generators(chart, ("p1^2", "q1*c1", "q1"))
        assert transform_tensor(gens, psi, 1) == lie_transform(gens, psi, 1)

    def test_transform_needs_generators(self, split_foliation: FoliationData) -> None:
        with pytest.raises(InsufficientSeriesOrder):
            transform_tensor(GeneratorSeries(()), split_foliation.psi, 1)


class TestSharp:
    """Tests for sharp and sharp_invert."""

    def test_sharp_of_dq(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        dq = VerticalForm.differential(field(chart, "q1"))
        assert sharp(split_foliation, dq) == -Multivector.basis(chart, 1)

    def test_round_trip_on_vertical(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        a = Multivector.parse(chart, 2, {"0,1": "q1*c1 + p1^2"})
        assert sharp(split_foliation, sharp_invert(split_foliation, a)) == a

    def test_not_vertical(self, split_foliation: FoliationData) -> None:
        with pytest.raises(NotVertical):
            sharp_invert(split_foliation, Multivector.basis(split_foliation.chart, 2))

    def test_forms_agree_modulo_transverse(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        a = VerticalForm.differential(field(chart, "q1 + c1^2"))
        b = VerticalForm.differential(field(chart, "q1"))
        assert split_foliation.forms_agree(a, b)

    def test_singular_leaf_block(self) -> None:
        chart = Chart(("x",))
        x = field(chart, "x")
        with pytest.raises(LeafMatrixSingular):
            field_inverse([[x, x], [x, x]])


class TestLeafwiseCalculus:
    """Tests for vertical_d, homotopy_primitive and hamiltonian_potential."""

    def test_primitive_of_exact_form(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        alpha = VerticalForm.differential(field(chart, "q1^2*p1 + c1*q1 + c1^2"))
        beta = homotopy_primitive(split_foliation, alpha)
        assert beta.body.scalar_value == field(chart, "q1^2*p1 + c1*q1")
        assert split_foliation.forms_agree(vertical_d(split_foliation, beta), alpha)

    def test_primitive_of_two_form(self, wide_foliation: FoliationData) -> None:
        chart = wide_foliation.chart
        alpha = VerticalForm.from_components(chart, 2, {(0, 1): field(chart, "c1"), (2, 3): 1})
        beta = homotopy_primitive(wide_foliation, alpha)
        assert vertical_d(wide_foliation, beta).restricted(range(4)) == alpha

    def test_not_closed(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        alpha = VerticalForm.from_components(chart, 1, {(1,): field(chart, "q1")})
        with pytest.raises(NotClosed):
            homotopy_primitive(split_foliation, alpha)

    def test_function_has_no_primitive(self, split_foliation: FoliationData) -> None:
        with pytest.raises(WrongDegree):
            homotopy_primitive(split_foliation, VerticalForm.zero(split_foliation.chart, 0))

    def test_potential(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        y = schouten(psi, Multivector.scalar(field(chart, "q1^2*p1 + c1*p1")))
        h = hamiltonian_potential(split_foliation, y)
        assert schouten(psi, Multivector.scalar(h)) == y

    def test_potential_by_quadrature(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        h = field(chart, "1/(1 + q1^2)")
        potential = hamiltonian_potential(split_foliation, schouten(psi, Multivector.scalar(h)))
        assert not potential.is_exact
        x = [0.5, 0.3, 0.2]
        assert potential(x) == pytest.approx(h(x) - 1.0, abs=1e-10)

    def test_not_hamiltonian(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        with pytest.raises(NotHamiltonian):
            hamiltonian_potential(split_foliation, vector(chart, "q1", "0", "0"))

    def test_potential_needs_vertical(self, split_foliation: FoliationData) -> None:
        with pytest.raises(NotVertical):
            hamiltonian_potential(split_foliation, Multivector.basis(split_foliation.chart, 2))


class TestLeafGraphs:
    """Leafwise calculus and the solver on charts that are not adapted."""

    X = np.array([0.5, -0.3, 0.7])

    def test_tilted_chart(self, tilted_foliation: FoliationData) -> None:
        assert not tilted_foliation.is_adapted
        assert tilted_foliation.is_leaf_graph

    def test_primitive_of_area_form(self, tilted_foliation: FoliationData) -> None:
        chart = tilted_foliation.chart
        alpha = VerticalForm.from_components(chart, 2, {(0, 1): 1})
        beta = homotopy_primitive(tilted_foliation, alpha)
        assert beta[(0,)](self.X) == pytest.approx(0.15, abs=1e-12)
        assert beta[(1,)](self.X) == pytest.approx(0.25, abs=1e-12)

    def test_primitive_of_differential(self, tilted_foliation: FoliationData) -> None:
        # f vanishes at the center of every leaf, so the primitive is f itself
        f = field(tilted_foliation.chart, "q^2*p + s*q")
        beta = homotopy_primitive(tilted_foliation, VerticalForm.differential(f))
        assert beta.body.scalar_value(self.X) == pytest.approx(f(self.X), abs=1e-12)

    def test_not_closed(self, tilted_foliation: FoliationData) -> None:
        chart = tilted_foliation.chart
        alpha = VerticalForm.from_components(chart, 1, {(1,): field(chart, "q")})
        with pytest.raises(NotClosed):
            homotopy_primitive(tilted_foliation, alpha, sample_points(chart, 5, seed=1))

    def test_potential_is_exact(self, tilted_foliation: FoliationData) -> None:
        chart, psi = tilted_foliation.chart, tilted_foliation.psi
        y = hamiltonian_vf(psi, field(chart, "q^2*p + s*q + p^3"))
        h = hamiltonian_potential(tilted_foliation, y)
        assert h.is_exact
        assert hamiltonian_vf(psi, h) == y

    def test_manufactured(self, tilted_foliation: FoliationData) -> None:
        chart, psi = tilted_foliation.chart, tilted_foliation.psi
        true = vector(chart, "q*p", "s^2", "q")
        phi = schouten(true, psi)
        x = kv_solve(tilted_foliation, phi)
        points = sample_points(chart, 6, seed=3)
        assert (schouten(x, psi) - phi).max_abs_at(points) < 1e-6
        assert is_poisson_vf(psi, x - true, points, Tolerances(casimir_sampled=1e-6)).holds

    def test_solve_order(self, tilted_foliation: FoliationData) -> None:
        chart, psi = tilted_foliation.chart, tilted_foliation.psi
        series = lie_transform(generators(chart, ("p", "q^2", "0")), psi, 2)
        gens = solve_order(tilted_foliation, series, 1)
        points = sample_points(chart, 4, seed=6)
        (residual,) = homological_residual(gens, series, 1)
        assert residual.max_abs_at(points) < 1e-6

    def test_transverse_casimir_missing(self) -> None:
        chart, psi = canonical(1, 2)
        fol = FoliationData(
            poisson=PoissonTensor.verify(psi),
            casimirs=(field(chart, "c1"),),
            duals=(Multivector.basis(chart, 2),),
            leaf_indices=(0, 1),
        )
        assert not fol.is_leaf_graph
        with pytest.raises(FoliationNotAdapted):
            kv_solve(fol, Multivector.parse(chart, 2, {"0,1": "c2"}))
        with pytest.raises(FoliationNotAdapted):
            vertical_d(fol, VerticalForm.zero(chart, 1))

    @pytest.mark.integration
    def test_euler_phi(self) -> None:
        fol = euler_foliation((1, 1, 1))
        assert fol.chart.names == EULER_NAMES
        phi = euler_phi((1, 1, 1), fol.chart)
        x = kv_solve(fol, phi)
        points = sample_points(fol.chart, 4, seed=1)
        assert (schouten(x, fol.psi) - phi).max_abs_at(points) < 1e-6

    @pytest.mark.integration
    def test_euler_gauge(self) -> None:
        fol = euler_foliation((1, 1, 1))
        phi = euler_phi((1, 1, 1), fol.chart)
        x0 = euler_first_order_generator((1, 1, 1), fol.chart)
        x = kv_solve(fol, -phi)
        points = sample_points(fol.chart, 4, seed=2)
        assert schouten(fol.psi, x - x0).max_abs_at(points) < 1e-6

    def test_euler_potential_is_exact(self) -> None:
        fol = euler_foliation((1, 1, 1))
        y = contract_differentials(euler_phi((1, 1, 1), fol.chart), [fol.casimirs[1]])
        h = hamiltonian_potential(fol, y)
        assert h.is_exact
        assert hamiltonian_vf(fol.psi, h) == y


class TestFoliationData:
    """Tests for the foliation record."""

    def test_check(self, wide_foliation: FoliationData) -> None:
        points = sample_points(wide_foliation.chart, 10, seed=5)
        assert all(v.holds for v in wide_foliation.check(points).values())

    def test_odd_leaf_rejected(self, split_foliation: FoliationData) -> None:
        with pytest.raises(ValueError, match="even"):
            FoliationData(split_foliation.poisson, (), (), (0,))

    def test_model_round_trip(self, split_foliation: FoliationData) -> None:
        restored = foliation_from_model(foliation_to_model(split_foliation))
        assert restored.psi == split_foliation.psi
        assert restored.casimirs == split_foliation.casimirs
        assert restored.leaf_indices == split_foliation.leaf_indices


class TestSolver:
    """Tests for kv_solve and solve_order."""

    def test_manufactured(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        phi = schouten(vector(chart, "q1*p1", "c1^2", "q1"), psi)
        x = kv_solve(split_foliation, phi)
        assert schouten(x, psi) == phi

    def test_manufactured_wide(self, wide_foliation: FoliationData) -> None:
        chart, psi = wide_foliation.chart, wide_foliation.psi
        phi = schouten(vector(chart, "q2*c1", "p1^2", "0", "q1*c2", "p2", "0"), psi)
        assert schouten(kv_solve(wide_foliation, phi), psi) == phi

    def test_zero_rhs(self, split_foliation: FoliationData) -> None:
        x = kv_solve(split_foliation, Multivector.zero(split_foliation.chart, 2))
        assert x.degree == 1 and x.is_zero

    def test_bivector_required(self, split_foliation: FoliationData) -> None:
        with pytest.raises(WrongDegree):
            kv_solve(split_foliation, Multivector.basis(split_foliation.chart, 0))

    def test_not_cocycle(self, split_foliation: FoliationData) -> None:
        chart = split_foliation.chart
        phi = Multivector.parse(chart, 2, {"0,2": "q1"})
        with pytest.raises(NotCocycle):
            kv_solve(split_foliation, phi)

    def test_solve_order_on_pulled_back_family(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        true = generators(chart, ("p1^2", "c1*q1", "q1"), ("0", "q1*c1", "0"))
        series = lie_transform(true, psi, 3)
        gens = solve_order(split_foliation, series, 2)
        assert len(gens.coefficients) == 2
        assert all(r.is_zero for r in homological_residual(gens, series, 2))

    def test_solve_order_checks_start(self, split_foliation: FoliationData) -> None:
        other = DeformationSeries.constant(2 * split_foliation.psi).padded(2)
        with pytest.raises(ValueError, match="start"):
            solve_order(split_foliation, other, 1)

    def test_sampled_points_accepted(self, split_foliation: FoliationData) -> None:
        chart, psi = split_foliation.chart, split_foliation.psi
        phi = schouten(vector(chart, "p1", "q1", "c1"), psi)
        points = np.zeros((1, 3))
        assert schouten(kv_solve(split_foliation, phi, points), psi) == phi
