"""schouten-lab: Schouten bracket calculus and Poisson deformation checks.

Multivector fields carry exact rational-function components when they can
(sympy ``QQ(x1, ..., xn)``) and fall back to numeric evaluation otherwise.
On top of the bracket sit Poisson tensors, the homological recursion of the
Lie-transform method, a leafwise solver for ``[[X, Psi]] = Phi`` and two
worked families (Euler systems and Dirac bracket deformations).

Example:
    >>> from schouten_lab import Chart, Multivector, ScalarField, schouten
    >>> chart = Chart(("q", "p"))
    >>> psi = Multivector.basis(chart, 0, 1)
    >>> q = ScalarField.coordinate(chart, 0)
    >>> schouten(psi, Multivector.scalar(q))  # X_q = d_p

Classes:
    Chart: Ordered coordinate names with an optional domain predicate
    ScalarField: Exact or numeric function on a chart
    Multivector: Antisymmetric contravariant tensor field
    PoissonTensor: Bivector with a recorded Jacobi verdict
    DeformationSeries: Taylor coefficients of an eps-family
    FoliationData: Poisson tensor with Casimirs, duals and leaf coordinates
    EpsVectorField: Time-dependent generator for numeric flows
    CheckReport: Outcome of one named check

Functions:
    schouten(a, b): The bracket ``[[a, b]]``
    kv_solve(fol, phi): Solve ``[[X, Psi]] = Phi``
    solve_order(fol, series, k): Generators of the homological recursion
    check_triviality(family, field, grid, points, tol): Flow straightening check
"""

from schouten_lab import cases, checks
from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import SchoutenLabError
from schouten_lab.flows import (
    EpsVectorField,
    FlowResult,
    check_triviality,
    flow_map,
    hamiltonian_flow,
    integrate_flow,
)
from schouten_lab.homological import (
    DeformationSeries,
    FoliationData,
    GeneratorSeries,
    ParametrizedFamily,
    hamiltonian_potential,
    homological_residual,
    homotopy_primitive,
    kv_solve,
    lie_transform,
    recursive_rhs,
    sharp,
    sharp_invert,
    solve_order,
    transform_tensor,
    vertical_d,
)
from schouten_lab.multivector import (
    DiffeoMap,
    Multivector,
    contract_covector,
    contract_differentials,
    lie_derivative,
    pullback_at,
    schouten,
    wedge,
)
from schouten_lab.poisson import (
    JacobiStatus,
    PoissonTensor,
    Verdict,
    coboundary,
    hamiltonian_vf,
    is_casimir,
    is_poisson_vf,
    jacobi_defect,
    poisson_bracket,
    rank_at,
)
from schouten_lab.report import CONVENTION_LEDGER, CheckReport, ledger_digest
from schouten_lab.scalar import Chart, ScalarField

__all__ = [
    "CONVENTION_LEDGER",
    "DEFAULT_TOLERANCES",
    "Chart",
    "CheckReport",
    "DeformationSeries",
    "DiffeoMap",
    "EpsVectorField",
    "FlowResult",
    "FoliationData",
    "GeneratorSeries",
    "JacobiStatus",
    "Multivector",
    "ParametrizedFamily",
    "PoissonTensor",
    "ScalarField",
    "SchoutenLabError",
    "Tolerances",
    "Verdict",
    "cases",
    "check_triviality",
    "checks",
    "coboundary",
    "contract_covector",
    "contract_differentials",
    "flow_map",
    "hamiltonian_flow",
    "hamiltonian_potential",
    "hamiltonian_vf",
    "homological_residual",
    "homotopy_primitive",
    "integrate_flow",
    "is_casimir",
    "is_poisson_vf",
    "jacobi_defect",
    "kv_solve",
    "ledger_digest",
    "lie_derivative",
    "lie_transform",
    "poisson_bracket",
    "pullback_at",
    "rank_at",
    "recursive_rhs",
    "schouten",
    "sharp",
    "sharp_invert",
    "solve_order",
    "transform_tensor",
    "vertical_d",
    "wedge",
]
