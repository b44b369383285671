"""Shared test utilities: hypothesis strategies and small tensor builders."""

import numpy as np
from hypothesis import strategies as st

from schouten_lab import Chart, Multivector, ScalarField
from schouten_lab.sampling import random_multivector, random_polynomial, standard_chart

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=3, max_value=6)


@st.composite
def charts(draw: st.DrawFn) -> Chart:
    return standard_chart(draw(dims))


@st.composite
def multivectors(
    draw: st.DrawFn,
    chart: Chart | None = None,
    degree: int | None = None,
    max_degree: int = 3,
) -> Multivector:
    """Random exact multivector with polynomial coefficients of degree at most 2."""
    chart = chart or draw(charts())
    if degree is None:
        degree = draw(st.integers(min_value=0, max_value=min(max_degree, chart.dim)))
    rng = np.random.default_rng(draw(seeds))
    return random_multivector(chart, degree, rng, max_degree=2, density=0.5)


@st.composite
def functions(draw: st.DrawFn, chart: Chart) -> ScalarField:
    rng = np.random.default_rng(draw(seeds))
    return random_polynomial(chart, rng, max_degree=2)


@st.composite
def same_chart(draw: st.DrawFn, count: int, min_total: int = 1) -> list[Multivector]:
    """``count`` multivectors on one chart whose degrees sum to at least ``min_total``."""
    chart = draw(charts())
    degree = st.integers(min_value=0, max_value=min(3, chart.dim))
    degrees = draw(
        st.lists(degree, min_size=count, max_size=count).filter(lambda ds: sum(ds) >= min_total)
    )
    return [draw(multivectors(chart, degree=d)) for d in degrees]


def canonical(pairs: int = 1, transverse: int = 0) -> tuple[Chart, Multivector]:
    """``sum dq_i ^ dp_i`` plus ``transverse`` Casimir coordinates."""
    names = [n for i in range(pairs) for n in (f"q{i + 1}", f"p{i + 1}")]
    names += [f"c{k + 1}" for k in range(transverse)]
    chart = Chart(tuple(names))
    psi = Multivector(chart, 2, {(2 * i, 2 * i + 1): 1 for i in range(pairs)})
    return chart, psi


def so3() -> tuple[Chart, Multivector]:
    """Lie-Poisson tensor of so(3): ``{x1, x2} = x3`` and cyclic."""
    chart = Chart(("x1", "x2", "x3"))
    psi = Multivector.parse(chart, 2, {"0,1": "x3", "1,2": "x1", "2,0": "x2"})
    return chart, psi


def field(chart: Chart, text: str) -> ScalarField:
    return ScalarField.parse(chart, text)


def vector(chart: Chart, *texts: str) -> Multivector:
    return Multivector.vector_field(chart, [ScalarField.parse(chart, t) for t in texts])


@st.composite
def vector_and_function(draw: st.DrawFn) -> tuple[Multivector, ScalarField]:
    chart = draw(charts())
    return draw(multivectors(chart, degree=1)), draw(functions(chart))
