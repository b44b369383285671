"""Numeric policy: every tolerance and step size in one frozen model."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

DEFAULT_EPS_GRID = (-0.1, -0.05, -0.025, -0.0125, 0.0125, 0.025, 0.05, 0.1)


class Tolerances(BaseModel):
    """Thresholds used by evaluation, rank, closedness and integration."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fd_step: float = Field(default=1e-6, gt=0)
    pole: float = Field(default=1e-12, ge=0)
    rank: float = Field(default=1e-10, ge=0)
    jacobi_sampled: float = Field(default=1e-9, ge=0)
    casimir_sampled: float = Field(default=1e-10, ge=0)
    closedness: float = Field(default=1e-9, ge=0)
    duality: float = Field(default=1e-10, ge=0)
    vertical: float = Field(default=1e-10, ge=0)
    integrator: float = Field(default=1e-9, gt=0)
    inverse_check: float = Field(default=1e-8, ge=0)
    samples: int = Field(default=100, ge=1)
    quadrature_nodes: int = Field(default=24, ge=2)
    eps_grid: tuple[float, ...] = DEFAULT_EPS_GRID


DEFAULT_TOLERANCES = Tolerances()
