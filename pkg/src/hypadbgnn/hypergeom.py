"""Numerically stable hypergeometric PMF and CDF.

Parameterisation follows the urn picture of the soft configuration model:
``M`` possible placements in total, ``m`` of them drawn without
replacement, ``xi`` placements belong to the cell of interest and ``x`` is
the number of drawn placements that fall into it::

    P(X = x) = C(xi, x) C(M - xi, m - x) / C(M, m)

The log-PMF uses Loader's saddle-point expansion (Stirling error terms and
the deviance ``bd0``) which avoids the catastrophic cancellation of naive
log-gamma differences once ``M`` reaches the thousands.
"""

from __future__ import annotations

import math

import numpy as np

_LN_2PI = math.log(2.0 * math.pi)
_LN_SQRT_2PI = 0.5 * _LN_2PI

# Stirling series coefficients 1/12, 1/360, 1/1260, 1/1680, 1/1188
_S0, _S1, _S2, _S3, _S4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188


def stirlerr(n: float) -> float:
    """``log(n!) - log(sqrt(2 pi n) (n/e)^n)``."""
    if n <= 15.0:
        if n == 0:
            return 0.0
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI
    nn = n * n
    if n > 500:
        return (_S0 - _S1 / nn) / n
    if n > 80:
        return (_S0 - (_S1 - _S2 / nn) / nn) / n
    if n > 35:
        return (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / n
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / n


def bd0(x: float, np_: float) -> float:
    """Deviance term ``x log(x/np) + np - x`` computed without cancellation."""
    if abs(x - np_) < 0.1 * (x + np_):
        v = (x - np_) / (x + np_)
        s = (x - np_) * v
        if abs(s) < 1e-300:
            return s
        ej = 2 * x * v
        v2 = v * v
        for j in range(1, 1000):
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
    return x * math.log(x / np_) + np_ - x


def log_dbinom(x: int, n: int, p: float, q: float) -> float:
    """Log binomial probability with ``q = 1 - p`` supplied separately."""
    if p == 0:
        return 0.0 if x == 0 else -math.inf
    if q == 0:
        return 0.0 if x == n else -math.inf
    if x == 0:
        if n == 0:
            return 0.0
        return -bd0(n, n * q) - n * p if p < 0.1 else n * math.log(q)
    if x == n:
        return -bd0(n, n * p) - n * q if q < 0.1 else n * math.log(p)
    if x < 0 or x > n:
        return -math.inf
    lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q)
    lf = _LN_2PI + math.log(x) + math.log1p(-x / n)
    return lc - 0.5 * lf


def support(M: int, m: int, xi: int) -> tuple[int, int]:
    """Inclusive range of values ``X`` can take."""
    return max(0, m - (M - xi)), min(m, xi)


def _check(M: int, m: int, xi: int) -> None:
    if not (0 <= m <= M):
        raise ValueError(f"need 0 <= m <= M, got m={m}, M={M}")
    if not (0 <= xi <= M):
        raise ValueError(f"need 0 <= xi <= M, got xi={xi}, M={M}")


def hypergeom_log_pmf(M: int, m: int, xi: int, x: int) -> float:
    """``log P(X = x)``; ``-inf`` outside the support."""
    M, m, xi, x = int(M), int(m), int(xi), int(x)
    _check(M, m, xi)
    lo, hi = support(M, m, xi)
    if x < lo or x > hi:
        return -math.inf
    if m == 0 or m == M or xi == 0 or xi == M:
        return 0.0
    p = m / M
    q = (M - m) / M
    return (
        log_dbinom(x, xi, p, q)
        + log_dbinom(m - x, M - xi, p, q)
        - log_dbinom(m, M, p, q)
    )


def hypergeom_pmf(M: int, m: int, xi: int, x: int) -> float:
    return math.exp(hypergeom_log_pmf(M, m, xi, x))


def mode(M: int, m: int, xi: int) -> int:
    lo, hi = support(M, m, xi)
    md = ((m + 1) * (xi + 1)) // (M + 2)
    return min(max(md, lo), hi)


def _log_ratio(M: int, m: int, xi: int, x: np.ndarray) -> np.ndarray:
    """``log P(x+1) - log P(x)`` for each ``x``."""
    return (
        np.log(xi - x) + np.log(m - x) - np.log(x + 1.0) - np.log(M - xi - m + x + 1.0)
    )


_CHUNK = 256
_NEGLIGIBLE = 1e-18


def _tail_sum(M: int, m: int, xi: int, start: int, stop: int, step: int) -> float:
    """Sum of PMF over ``start, start+step, ...`` up to ``stop`` (inclusive).

    Walks away from the mode, so terms are non-increasing; iteration stops
    once a chunk contributes nothing at double precision.
    """
    if (stop - start) * step < 0:
        return 0.0
    log_p = hypergeom_log_pmf(M, m, xi, start)
    parts: list[float] = []
    total = 0.0
    x = start
    while True:
        n = min(_CHUNK, abs(stop - x) + 1)
        xs = x + step * np.arange(n - 1)
        if step > 0:
            incr = _log_ratio(M, m, xi, xs)
        else:
            incr = -_log_ratio(M, m, xi, xs - 1)
        logs = log_p + np.concatenate(([0.0], np.cumsum(incr)))
        terms = np.exp(logs)
        parts.extend(terms.tolist())
        chunk = math.fsum(terms.tolist())
        total += chunk
        x += step * n
        if (stop - x) * step < 0:
            break
        if terms[-1] <= _NEGLIGIBLE * total or chunk == 0.0:
            break
        # re-anchor each chunk on a fresh evaluation to stop drift in the cumsum
        log_p = hypergeom_log_pmf(M, m, xi, x)
    return math.fsum(parts)


def hypergeom_cdf(M: int, m: int, xi: int, f: int) -> float:
    """``P(X <= f)``.

    Sums whichever side of ``f`` lies away from the mode: the lower tail
    directly when ``f`` is below the mode, otherwise ``1 - P(X > f)``.
    """
    M, m, xi, f = int(M), int(m), int(xi), int(f)
    _check(M, m, xi)
    lo, hi = support(M, m, xi)
    if f < lo:
        return 0.0
    if f >= hi:
        return 1.0
    if f < mode(M, m, xi):
        val = _tail_sum(M, m, xi, f, lo, -1)
    else:
        val = 1.0 - _tail_sum(M, m, xi, f + 1, hi, 1)
    return min(1.0, max(0.0, val))


def hypergeom_sf(M: int, m: int, xi: int, f: int) -> float:
    """``P(X > f)``."""
    M, m, xi, f = int(M), int(m), int(xi), int(f)
    _check(M, m, xi)
    lo, hi = support(M, m, xi)
    if f < lo:
        return 1.0
    if f >= hi:
        return 0.0
    if f < mode(M, m, xi):
        val = 1.0 - _tail_sum(M, m, xi, f, lo, -1)
    else:
        val = _tail_sum(M, m, xi, f + 1, hi, 1)
    return min(1.0, max(0.0, val))
