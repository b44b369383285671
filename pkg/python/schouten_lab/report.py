"""Check reports and the convention-ledger digest embedded in them."""

from __future__ import annotations

import hashlib
import json
import math
import time
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

LEDGER_DOMAIN = b"schouten-lab.ledger.v1\n"

# Frozen statement of every sign the library commits to. Changing any line
# changes the digest carried by every report.
CONVENTION_LEDGER = """\
schouten: [[A,B]] = sum_k iota_k A ^ d_k B + (-1)^(pq) iota_k B ^ d_k A
iota_k: left odd derivative, removing xi_k at 0-based position s costs (-1)^s
graded symmetry: [[A,B]] = (-1)^(pq) [[B,A]]
leibniz: [[A,B^C]] = [[A,B]]^C + (-1)^(pq+q) B^[[A,C]]
hamiltonian field: X_f = [[Psi,f]] = Psi(df,.)
poisson bracket: {f,g} = Psi(df,dg); {q,p} = 1 for Psi = dq^dp
sharp: (Psi# a)^(j1..jr) = Psi^(j1k1)..Psi^(jrkr) a_(k1..kr); X_f = -Psi# df
lie of sharp: [[Psi# b, Psi]] = -Psi# db
homological: [[X_eps, A_eps]] = -dA_eps/deps; taylor A_eps = sum eps^i/i! A_i
pullback: gamma^*A = (D gamma)^-1 A(gamma)
euler generator: X = -(eta(y).y)/(2 D) eta(y)x(z x y) d_z, D = (eta(y)x eta(z)).(y x z)
euler flow: alpha = sqrt(1 - eps (eta(y).y)^2 / D)
euler first order: X_0 = -(eta(y)x(z x y))/(2 eta(z).z) d_z
dirac delta: Delta^ij = {A^i, A^j}; Z_i = sum_k Delta_ik X_(A^k); dA^j(Z_i) = delta_ij
dirac tensor: Psi_DIR = Psi + sum_(i<j) Delta_ij X_(A^i) ^ X_(A^j)
dirac generator: X = sum_ij Delta_ij (dA^j/deps) X_(A^i) + Psi_DIR(theta, .)
dirac theta: d theta = dw/deps on the leaves of Psi_DIR
symplectic inverse: Psi^ij w_jk = -delta^i_k
"""


def ledger_digest(ledger: str = CONVENTION_LEDGER) -> str:
    """Domain-separated SHA-256 of the convention ledger."""
    return hashlib.sha256(LEDGER_DOMAIN + ledger.encode("utf-8")).hexdigest()


class CheckReport(BaseModel):
    """Outcome of one named check.

    ``passed`` serializes as ``pass``. Exact checks report a residual of 0
    or the size of the surviving symbolic defect.
    """

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    check: str
    parameters: dict[str, Any] = Field(default_factory=dict)
    grid: list[float] | None = None
    per_point_residuals: list[float] = Field(default_factory=list)
    max_residual: float = 0.0
    tolerance: float = 0.0
    exact: bool = False
    passed: bool = Field(default=False, alias="pass")
    detail: str | None = None
    wall_time: float = 0.0
    ledger: str = Field(default_factory=ledger_digest)

    @classmethod
    def from_residuals(
        cls,
        check: str,
        residuals: Sequence[float],
        tolerance: float,
        *,
        exact: bool = False,
        parameters: dict[str, Any] | None = None,
        grid: Sequence[float] | None = None,
        detail: str | None = None,
    ) -> CheckReport:
        values = [float(r) for r in residuals]
        worst = max(values, default=0.0)
        finite = all(math.isfinite(v) for v in values)
        return cls(
            check=check,
            parameters=parameters or {},
            grid=list(grid) if grid is not None else None,
            per_point_residuals=values,
            max_residual=worst,
            tolerance=tolerance,
            exact=exact,
            passed=finite and worst <= tolerance,
            detail=detail,
        )

    @classmethod
    def failure(
        cls, check: str, detail: str, parameters: dict[str, Any] | None = None
    ) -> CheckReport:
        """A check that could not produce residuals (an operation raised)."""
        return cls(
            check=check,
            parameters=parameters or {},
            max_residual=math.inf,
            passed=False,
            detail=detail,
        )


@contextmanager
def timed() -> Iterator[Callable[[], float]]:
    start = time.perf_counter()
    yield lambda: time.perf_counter() - start


def dump_reports(reports: Sequence[CheckReport]) -> str:
    """Sorted-key JSON for a list of reports, ordered by check name."""
    ordered = sorted(reports, key=lambda r: r.check)
    payload = [r.model_dump(mode="json", by_alias=True) for r in ordered]
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=True)
