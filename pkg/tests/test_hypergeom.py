import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypadbgnn.hypergeom import (
    hypergeom_cdf,
    hypergeom_log_pmf,
    hypergeom_pmf,
    hypergeom_sf,
    mode,
    support,
)
from oracles import exact_cdf, exact_pmf


@st.composite
def urns(draw, max_M=200):
    M = draw(st.integers(1, max_M))
    m = draw(st.integers(0, M))
    xi = draw(st.integers(0, M))
    return M, m, xi


def test_textbook_pmf():
    assert hypergeom_pmf(10, 5, 4, 2) == pytest.approx(120 / 252, abs=1e-14)


def test_textbook_cdf():
    assert hypergeom_cdf(10, 5, 4, 1) == pytest.approx(66 / 252, abs=1e-14)


def test_empty_cell():
    assert hypergeom_pmf(30, 7, 0, 0) == 1.0


def test_draw_everything():
    assert hypergeom_pmf(9, 9, 3, 3) == pytest.approx(1.0, abs=1e-15)


def test_outside_support_is_minus_infinity():
    assert hypergeom_log_pmf(10, 5, 4, 5) == -math.inf
    assert hypergeom_log_pmf(10, 5, 4, -1) == -math.inf


def test_cdf_edges():
    assert hypergeom_cdf(10, 5, 4, 4) == 1.0
    assert hypergeom_cdf(10, 5, 4, 100) == 1.0
    assert hypergeom_cdf(10, 9, 4, 2) == 0.0  # support starts at 3


@settings(max_examples=300, deadline=None)
@given(urns())
def test_pmf_cdf_match_exact_oracle(urn):
    M, m, xi = urn
    lo, hi = support(M, m, xi)
    for x in range(max(0, lo - 1), hi + 2):
        assert abs(hypergeom_pmf(M, m, xi, x) - float(exact_pmf(M, m, xi, x))) <= 1e-10
        assert abs(hypergeom_cdf(M, m, xi, x) - float(exact_cdf(M, m, xi, x))) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(urns(max_M=10_000))
def test_pmf_normalised(urn):
    M, m, xi = urn
    lo, hi = support(M, m, xi)
    total = math.fsum(hypergeom_pmf(M, m, xi, x) for x in range(lo, hi + 1))
    assert abs(total - 1.0) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(urns(max_M=2000), st.integers(-5, 2005))
def test_cdf_sf_complement(urn, f):
    M, m, xi = urn
    assert abs(hypergeom_cdf(M, m, xi, f) + hypergeom_sf(M, m, xi, f) - 1.0) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(urns(max_M=500))
def test_cdf_monotone(urn):
    M, m, xi = urn
    lo, hi = support(M, m, xi)
    values = [hypergeom_cdf(M, m, xi, f) for f in range(lo - 1, hi + 1)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0


@settings(max_examples=100, deadline=None)
@given(urns(max_M=500))
def test_mode_is_a_maximum(urn):
    M, m, xi = urn
    lo, hi = support(M, m, xi)
    k = mode(M, m, xi)
    assert lo <= k <= hi
    peak = hypergeom_pmf(M, m, xi, k)
    assert all(hypergeom_pmf(M, m, xi, x) <= peak * (1 + 1e-12) for x in range(lo, hi + 1))


def test_large_urn_against_high_precision():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    M, m, xi = 2**32, 40_000, 3_000_000
    f = 30

    def pmf(x):
        return mpmath.binomial(xi, x) * mpmath.binomial(M - xi, m - x) / mpmath.binomial(M, m)

    want = float(mpmath.fsum(pmf(x) for x in range(0, f + 1)))
    assert hypergeom_cdf(M, m, xi, f) == pytest.approx(want, rel=1e-10)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        hypergeom_pmf(5, 6, 1, 0)
    with pytest.raises(ValueError):
        hypergeom_pmf(5, 2, 6, 0)


def test_vector_sum_matches_scalar():
    M, m, xi = 120, 40, 33
    lo, hi = support(M, m, xi)
    pmf = np.array([hypergeom_pmf(M, m, xi, x) for x in range(lo, hi + 1)])
    assert np.cumsum(pmf)[10 - lo] == pytest.approx(hypergeom_cdf(M, m, xi, 10), abs=1e-12)
