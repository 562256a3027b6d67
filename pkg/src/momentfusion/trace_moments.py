"""Exact Grassmannian trace moments.

Closed forms for degree t <= 3 at any rank k, exact arbitrary-order
evaluation at rank 1 via sphere integrals, and the analytic lower bound
lambda_t on the cubature potential.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .errors import DimensionMismatch, UnsupportedDegree, UnsupportedDimension
from .grassmann import check_symmetric


@dataclass(frozen=True)
class TraceMomentCoefficients:
    """Normalizer q and partition coefficients of the degree-t trace moment."""

    t: int
    q: float
    alphas: dict


@dataclass(frozen=True)
class GramPair:
    """The scalars ||x||^2, <x,y>, ||y||^2 of a vector pair."""

    xx: float
    xy: float
    yy: float

    def __post_init__(self):
        if self.xx < 0 or self.yy < 0:
            raise DimensionMismatch("squared norms must be nonnegative")
        if self.xy**2 > self.xx * self.yy + 1e-12:
            raise DimensionMismatch("Cauchy-Schwarz violated")

    @classmethod
    def of(cls, x, y) -> "GramPair":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(float(x @ x), float(x @ y), float(y @ y))


def coefficients(k: int, d: int, t: int) -> TraceMomentCoefficients:
    """Exact coefficient set of the degree-t trace moment on G_{k,d}."""
    if not (1 <= k < d):
        raise UnsupportedDimension(f"need 1 <= k < d, got k={k}, d={d}")
    if t == 1:
        return TraceMomentCoefficients(1, float(d), {(1,): float(k)})
    if t == 2:
        q = (d - 1) * d * (d + 2)
        return TraceMomentCoefficients(2, float(q), {
            (1, 1): float((d + 1) * k**2 - 2 * k),
            (2,): float(2 * k * (d - k)),
        })
    if t == 3:
        if d == 2:
            if k != 1:
                raise UnsupportedDimension("t=3 with d=2 requires k=1")
            # the generic q_{3,2} vanishes; modified coefficient set
            return TraceMomentCoefficients(3, 48.0, {
                (1, 1, 1): 1.0, (2, 1): 6.0, (3,): 8.0,
            })
        q = (d - 2) * (d - 1) * d * (d + 2) * (d + 4)
        return TraceMomentCoefficients(3, float(q), {
            (1, 1, 1): float((d**2 + 3 * d - 2) * k**3 - 6 * (d + 2) * k**2 + 16 * k),
            (2, 1): float(-6 * (d + 2) * k**3 + 6 * (d**2 + 2 * d + 4) * k**2 - 24 * d * k),
            (3,): float(8 * k * (d - k) * (d - 2 * k)),
        })
    raise UnsupportedDegree(f"no closed form for t={t} (only t <= 3)")


def _double_factorial_odd(m: int) -> int:
    """(2m-1)!! with the empty-product convention for m=0."""
    out = 1
    for i in range(1, 2 * m, 2):
        out *= i
    return out


def _compositions(total: int, parts: int):
    """All nonnegative integer vectors of given length summing to total."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def mu_t_rank1(M: np.ndarray, d: int, t: int) -> float:
    """Exact degree-t trace moment on G_{1,d} for any t, via sphere integrals.

    Diagonalize M and expand E[(sum_i lam_i u_i^2)^t] over the uniform sphere.
    """
    M = check_symmetric(M)
    if M.shape[0] != d:
        raise DimensionMismatch("matrix dimension does not match d")
    if t == 0:
        return 1.0
    lam = np.linalg.eigvalsh(M)
    denom = 1.0
    for i in range(t):
        denom *= d + 2 * i
    total = 0.0
    for a in _compositions(t, d):
        coef = factorial(t)
        term = 1.0
        for ai, li in zip(a, lam):
            coef //= factorial(ai)
            term *= li**ai * _double_factorial_odd(ai)
        total += coef * term
    return total / denom


def mu_t(M: np.ndarray, k: int, t: int, d: int | None = None) -> float:
    """Trace moment of <P, M>^t over the Haar measure on G_{k,d}."""
    M = check_symmetric(M)
    d = M.shape[0] if d is None else d
    if M.shape[0] != d:
        raise DimensionMismatch("matrix dimension does not match d")
    if t > 3:
        if k == 1:
            return mu_t_rank1(M, d, t)
        raise UnsupportedDegree(f"t={t} with k={k} >= 2 has no implemented closed form")
    c = coefficients(k, d, t)
    tr1 = np.trace(M)
    if t == 1:
        return float(c.alphas[(1,)] * tr1 / c.q)
    M2 = M @ M
    tr2 = np.trace(M2)
    if t == 2:
        return float((c.alphas[(1, 1)] * tr1**2 + c.alphas[(2,)] * tr2) / c.q)
    tr3 = np.trace(M2 @ M)
    return float((c.alphas[(1, 1, 1)] * tr1**3
                  + c.alphas[(2, 1)] * tr1 * tr2
                  + c.alphas[(3,)] * tr3) / c.q)


def mu_mixed(*Ms: np.ndarray, k: int) -> float:
    """Mixed trace moment of up to three symmetric matrices on G_{k,d}."""
    mats = [check_symmetric(M) for M in Ms]
    t = len(mats)
    if t == 0 or t > 3:
        raise UnsupportedDegree("mu_mixed takes 1, 2, or 3 matrices")
    d = mats[0].shape[0]
    for M in mats[1:]:
        if M.shape[0] != d:
            raise DimensionMismatch("matrix dimensions differ")
    c = coefficients(k, d, t)
    if t == 1:
        return float(c.alphas[(1,)] * np.trace(mats[0]) / c.q)
    if t == 2:
        M1, M2 = mats
        return float((c.alphas[(1, 1)] * np.trace(M1) * np.trace(M2)
                      + c.alphas[(2,)] * np.trace(M1 @ M2)) / c.q)
    M1, M2, M3 = mats
    t1, t2, t3 = np.trace(M1), np.trace(M2), np.trace(M3)
    t12, t13, t23 = np.trace(M1 @ M2), np.trace(M1 @ M3), np.trace(M2 @ M3)
    t123 = np.trace(M1 @ M2 @ M3)
    return float((c.alphas[(1, 1, 1)] * t1 * t2 * t3
                  + c.alphas[(2, 1)] / 3.0 * (t1 * t23 + t2 * t13 + t3 * t12)
                  + c.alphas[(3,)] * t123) / c.q)


def gaussian_pair_moment(a: int, b: int, gram: GramPair) -> float:
    """E[s^a t^b] for a centered Gaussian pair with covariance from gram.

    Two-variable Isserlis recursion:
    E[s^a t^b] = (a-1) xx E[s^(a-2) t^b] + b xy E[s^(a-1) t^(b-1)].
    """
    if a < 0 or b < 0:
        raise DimensionMismatch("exponents must be nonnegative")
    if (a + b) % 2 == 1:
        return 0.0
    table = {(0, 0): 1.0}

    def rec(i, j):
        if i < 0 or j < 0 or (i + j) % 2 == 1:
            return 0.0
        if (i, j) in table:
            return table[(i, j)]
        if i >= 1:
            v = (i - 1) * gram.xx * rec(i - 2, j) + j * gram.xy * rec(i - 1, j - 1)
        else:
            v = (j - 1) * gram.yy * rec(i, j - 2)
        table[(i, j)] = v
        return v

    return rec(a, b)


def sphere_bilinear_integral(a: int, b: int, gram: GramPair, d: int) -> float:
    """Integral of <u,x>^a <u,y>^b over the uniform measure on S^(d-1)."""
    if (a + b) % 2 == 1:
        return 0.0
    denom = 1.0
    for i in range((a + b) // 2):
        denom *= d + 2 * i
    return gaussian_pair_moment(a, b, gram) / denom


def mu_rank1(m: int, ell: int, gram: GramPair, d: int) -> float:
    """Mixed rank-1 trace moment with E_{x,y} repeated m times and xx* ell times."""
    return sphere_bilinear_integral(m + 2 * ell, m, gram, d)


def rising_factorial(a: float, ell: int) -> float:
    out = 1.0
    for i in range(ell):
        out *= a + i
    return out


def lambda_t(k: int, d: int, t: int) -> float:
    """Analytic minimum of the degree-t cubature potential on G_{k,d}."""
    if t <= 3:
        c = coefficients(k, d, t)
        if t == 1:
            return float(k**2) / d
        if t == 2:
            return (c.alphas[(1, 1)] * k**2 + c.alphas[(2,)] * k) / c.q
        return (c.alphas[(1, 1, 1)] * k**3 + c.alphas[(2, 1)] * k**2
                + c.alphas[(3,)] * k) / c.q
    if k != 1:
        raise UnsupportedDegree(f"lambda_t with t={t} requires k=1")
    return rising_factorial(0.5, t) / rising_factorial(d / 2.0, t)
