"""Seeded sample points and random exact inputs.

Points come from a scrambled Sobol sequence over a box, filtered by the
chart's domain predicate, so a given seed always yields the same sample.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable

import numpy as np
from scipy.stats import qmc

from schouten_lab.errors import DomainExit
from schouten_lab.multivector import Multivector
from schouten_lab.scalar import Chart, ScalarField

logger = logging.getLogger(__name__)

_MAX_BATCHES = 12


def sample_points(
    chart: Chart,
    n: int,
    *,
    seed: int,
    low: float = -2.0,
    high: float = 2.0,
    where: Callable[[np.ndarray], bool] | None = None,
) -> np.ndarray:
    """Return ``n`` rows of in-domain points from a seeded low-discrepancy sequence.

    Raises:
        DomainExit: if the domain is too thin to collect ``n`` points.
    """
    sampler = qmc.Sobol(d=chart.dim, scramble=True, seed=seed)
    kept: list[np.ndarray] = []
    batch = 1 << max(4, int(np.ceil(np.log2(max(n, 1)))) + 1)
    for _ in range(_MAX_BATCHES):
        raw = qmc.scale(sampler.random(batch), [low] * chart.dim, [high] * chart.dim)
        for row in raw:
            if chart.contains(row) and (where is None or where(row)):
                kept.append(row)
                if len(kept) == n:
                    return np.asarray(kept)
    logger.debug("collected %d of %d points on %s", len(kept), n, chart.names)
    raise DomainExit(f"only {len(kept)} of {n} sample points fall inside the domain")


def random_polynomial(
    chart: Chart,
    rng: np.random.Generator,
    *,
    max_degree: int = 2,
    terms: int = 3,
    coefficient_range: int = 5,
) -> ScalarField:
    """A random polynomial with small integer coefficients."""
    gens = chart.gens
    value = chart.field.zero
    for _ in range(terms):
        coeff = int(rng.integers(-coefficient_range, coefficient_range + 1))
        monomial = chart.field.one
        for _ in range(int(rng.integers(0, max_degree + 1))):
            monomial *= gens[int(rng.integers(0, chart.dim))]
        value += coeff * monomial
    return ScalarField(chart, exact=value)


def random_multivector(
    chart: Chart,
    degree: int,
    rng: np.random.Generator,
    *,
    max_degree: int = 2,
    density: float = 0.6,
) -> Multivector:
    """A random exact multivector; each basis key is populated with probability ``density``."""
    components = {
        key: random_polynomial(chart, rng, max_degree=max_degree)
        for key in itertools.combinations(range(chart.dim), degree)
        if rng.random() < density
    }
    return Multivector(chart, degree, components)


def standard_chart(dim: int, prefix: str = "x") -> Chart:
    """Chart ``x1, ..., x_dim``."""
    return Chart(tuple(f"{prefix}{i + 1}" for i in range(dim)))
