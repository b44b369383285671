"""Poisson tensors and the objects they distinguish.

A :class:`PoissonTensor` wraps a bivector together with the outcome of its
Jacobi check. Predicates such as :func:`is_casimir` return a :class:`Verdict`
carrying the size of the defect rather than a bare boolean.
"""

from __future__ import annotations

import enum
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import ChartMismatch, NotPoisson, WrongDegree
from schouten_lab.multivector import Multivector, schouten
from schouten_lab.scalar import Chart, PointLike, ScalarField

logger = logging.getLogger(__name__)


class JacobiStatus(str, enum.Enum):
    VERIFIED = "verified"
    UNVERIFIED = "unverified"
    FAILED = "failed"


@dataclass(frozen=True)
class Verdict:
    """Outcome of a vanishing test: ``holds`` plus the measured defect."""

    holds: bool
    defect: float
    exact: bool

    def __bool__(self) -> bool:
        return self.holds


def measure(
    residual: Multivector,
    points: Sequence[PointLike] | np.ndarray | None,
    tol: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Verdict:
    """Decide whether ``residual`` vanishes.

    Exact residuals are decided symbolically; their defect is the sampled
    magnitude (or the count of surviving components when no points are
    given). Numeric residuals are judged by their max-norm on ``points``.
    """
    if residual.is_exact:
        if residual.is_zero:
            return Verdict(True, 0.0, True)
        size = float(len(residual.components))
        if points is not None and len(points) > 0:
            size = max(residual.max_abs_at(list(points), tolerances), np.finfo(float).tiny)
        return Verdict(False, size, True)
    if points is None or len(points) == 0:
        raise ValueError("numeric residuals need sample points")
    worst = residual.max_abs_at(list(points), tolerances)
    return Verdict(worst <= tol, worst, False)


@dataclass(frozen=True)
class PoissonTensor:
    body: Multivector
    status: JacobiStatus = JacobiStatus.UNVERIFIED
    defect_norm: float = 0.0

    def __post_init__(self) -> None:
        if self.body.degree != 2:
            raise WrongDegree(f"a poisson tensor is a bivector, got degree {self.body.degree}")

    @property
    def chart(self) -> Chart:
        return self.body.chart

    @classmethod
    def verify(
        cls,
        body: Multivector,
        points: Sequence[PointLike] | np.ndarray | None = None,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ) -> PoissonTensor:
        """Check ``[[body, body]] = 0`` and record the outcome."""
        verdict = measure(jacobi_defect(body), points, tolerances.jacobi_sampled, tolerances)
        status = JacobiStatus.VERIFIED if verdict.holds else JacobiStatus.FAILED
        logger.debug("jacobi check %s (defect %.3e)", status.value, verdict.defect)
        return cls(body, status, verdict.defect)


def _body(psi: PoissonTensor | Multivector) -> Multivector:
    return psi.body if isinstance(psi, PoissonTensor) else psi


def _same_chart(psi: Multivector, f: ScalarField) -> None:
    if f.chart != psi.chart:
        raise ChartMismatch(f"function on {f.chart.names}, tensor on {psi.chart.names}")


def jacobi_defect(psi: Multivector) -> Multivector:
    """``[[Psi, Psi]]``; zero exactly when ``Psi`` is Poisson."""
    if psi.degree != 2:
        raise WrongDegree(f"jacobi defect needs a bivector, got degree {psi.degree}")
    return schouten(psi, psi)


def hamiltonian_vf(psi: PoissonTensor | Multivector, f: ScalarField) -> Multivector:
    """``X_f = [[Psi, f]] = Psi(df, .)``."""
    body = _body(psi)
    _same_chart(body, f)
    return schouten(body, Multivector.scalar(f))


def poisson_bracket(
    psi: PoissonTensor | Multivector, f: ScalarField, g: ScalarField
) -> ScalarField:
    """``{f, g} = [[[[Psi, f]], g]] = Psi(df, dg)``."""
    body = _body(psi)
    _same_chart(body, g)
    return schouten(hamiltonian_vf(body, f), Multivector.scalar(g)).scalar_value


def is_casimir(
    psi: PoissonTensor | Multivector,
    k: ScalarField,
    points: Sequence[PointLike] | np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Verdict:
    return measure(hamiltonian_vf(psi, k), points, tolerances.casimir_sampled, tolerances)


def is_poisson_vf(
    psi: PoissonTensor | Multivector,
    x: Multivector,
    points: Sequence[PointLike] | np.ndarray | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Verdict:
    """Does ``x`` preserve the tensor (``[[Psi, X]] = 0``)?"""
    if x.degree != 1:
        raise WrongDegree(f"poisson vector field test needs degree 1, got {x.degree}")
    return measure(schouten(_body(psi), x), points, tolerances.casimir_sampled, tolerances)


def coboundary(
    psi: PoissonTensor,
    a: Multivector,
    *,
    allow_non_poisson: bool = False,
) -> Multivector:
    """Lichnerowicz coboundary ``delta(A) = [[Psi, A]]``.

    Raises:
        NotPoisson: if the tensor's Jacobi check failed, unless
            ``allow_non_poisson`` is set.
    """
    if psi.status is JacobiStatus.UNVERIFIED and not allow_non_poisson:
        psi = PoissonTensor.verify(psi.body)
    if psi.status is JacobiStatus.FAILED and not allow_non_poisson:
        raise NotPoisson(f"coboundary of a non-poisson tensor (defect {psi.defect_norm:.3e})")
    return schouten(psi.body, a)


def rank_at(
    psi: PoissonTensor | Multivector,
    x: PointLike,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> int:
    """Rank of ``Psi^{ij}(x)``, counting singular values above the rank cutoff."""
    matrix = _body(psi).matrix_at(x, tolerances)
    singular = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(singular > tolerances.rank))
