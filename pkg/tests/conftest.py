"""Pytest configuration and fixtures."""

import pytest  # ty:ignore[unresolved-import]
from hypothesis import HealthCheck, settings
from utils import canonical, so3

from schouten_lab import Chart, Multivector, PoissonTensor, ScalarField
from schouten_lab.cases import EulerInstance, dirac_demo_instance
from schouten_lab.checks import canonical_plus_zero
from schouten_lab.homological import FoliationData

# Bounded, reproducible property runs.
settings.register_profile(
    "schouten",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("schouten")


@pytest.fixture
def plane() -> tuple[Chart, Multivector]:
    """Canonical ``dq ^ dp`` on ``(q1, p1)``."""
    return canonical()


@pytest.fixture
def lie_poisson() -> tuple[Chart, Multivector]:
    """so(3) Lie-Poisson tensor on ``(x1, x2, x3)``."""
    return so3()


@pytest.fixture
def split_foliation() -> FoliationData:
    """``dq ^ dp`` on ``(q1, p1, c1)`` with the Casimir ``c1``."""
    return canonical_plus_zero(1, 1)


@pytest.fixture
def wide_foliation() -> FoliationData:
    """Two canonical pairs and two Casimir coordinates."""
    return canonical_plus_zero(2, 2)


@pytest.fixture
def tilted_foliation() -> FoliationData:
    """``(d_q + d_s) ^ d_p`` on ``(q, p, s)``: leaves ``s - q = const`` over ``(q, p)``."""
    chart = Chart(("q", "p", "s"))
    psi = Multivector(chart, 2, {(0, 1): 1, (2, 1): 1})
    return FoliationData(
        poisson=PoissonTensor.verify(psi),
        casimirs=(ScalarField.parse(chart, "s - q"),),
        duals=(Multivector.basis(chart, 2),),
        leaf_indices=(0, 1),
    )


@pytest.fixture(scope="session")
def euler_instance() -> EulerInstance:
    return EulerInstance.create((1, 1, 1))


@pytest.fixture(scope="session")
def split_euler_instance() -> EulerInstance:
    return EulerInstance.create((1, 1, -1))


@pytest.fixture(scope="session")
def dirac_instance():  # type: ignore[no-untyped-def]
    return dirac_demo_instance()


@pytest.fixture
def problem_file(tmp_path):  # type: ignore[no-untyped-def]
    """Write a JSON problem file and return its path."""

    def write(text: str, name: str = "problem.json"):  # type: ignore[no-untyped-def]
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
