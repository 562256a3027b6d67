"""Moment fusion: recovering high-dimensional moments from projected ones.

Implements polarization of monomials, the pushforward from measurement
coordinates to projector coordinates, closed-form reconstruction up to
third moments for any projector rank, arbitrary-order reconstruction for
rank-1 projections, and the explicit spanning-family alternative.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cubature import CubatureRule
from .errors import (DegreeUnsupported, DegreeZero, DimensionMismatch,
                     DimensionTooSmall, IllConditioned, RankDeficient,
                     RankMismatch, SpanDeficient, UncertifiedRule,
                     UnsupportedCombination)
from .grassmann import MeasurementEnsemble
from .moments import (MomentTensor, ProjectedMomentSet, homogeneous_indices,
                      linear_form_power, multi_indices, norm_square_power,
                      poly_expect, poly_mul)
from .trace_moments import GramPair, coefficients, mu_rank1

DEFAULT_GAP_TOL = 1e-8


@dataclass(frozen=True)
class PolarizationTerm:
    """One signed power-of-linear-form term of a polarized monomial."""

    coefficient: float
    direction: tuple  # integer vector, not normalized


def polarize(alpha) -> list:
    """Expand x^alpha into a signed combination of t-th powers <x, y_J>^t.

    Inclusion-exclusion over subsets J of the index list of alpha; terms
    with equal directions are merged.
    """
    alpha = tuple(int(a) for a in alpha)
    t = sum(alpha)
    if t < 1:
        raise DegreeZero("cannot polarize a degree-0 monomial")
    d = len(alpha)
    idx = [i for i, a in enumerate(alpha) for _ in range(a)]
    terms = {}
    for mask in range(1, 2**t):
        y = [0] * d
        bits = 0
        for j in range(t):
            if mask >> j & 1:
                y[idx[j]] += 1
                bits += 1
        sign = (-1)**(t + bits)
        # reduce to the primitive direction so parallel terms merge
        g = math.gcd(*y)
        y = tuple(e // g for e in y)
        terms[y] = terms.get(y, 0.0) + sign * g**t / math.factorial(t)
    return [PolarizationTerm(c, y) for y, c in terms.items() if c != 0.0]


def pushforward(Q: np.ndarray, moments_of_qx: MomentTensor, p: int) -> MomentTensor:
    """Convert moments of QX (k-dimensional) into moments of PX (d-dimensional)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    k, d = Q.shape
    if moments_of_qx.d != k:
        raise DimensionMismatch("QX tensor dimension does not match Q")
    if moments_of_qx.p < p:
        raise DimensionMismatch("QX tensor degree too low")
    s = np.linalg.svd(Q, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise RankDeficient("measurement matrix is rank deficient")
    Z = Q.T @ np.linalg.inv(Q @ Q.T)  # d x k; PX = Z^T-contraction of QX
    values = {}
    for alpha in multi_indices(d, p):
        poly = {tuple([0] * k): 1.0}
        for i, ai in enumerate(alpha):
            if ai:
                poly = poly_mul(poly, linear_form_power(Z[i], ai))
        values[alpha] = poly_expect(poly, moments_of_qx)
    return MomentTensor(d, p, values)


# ---------------------------------------------------------------------------
# fusion constants

@dataclass(frozen=True)
class FusionConstants:
    A1: float
    A2: float
    B2: float
    A3: float
    B3: float
    C1: float
    C2: float


def fusion_constants(k: int, d: int) -> FusionConstants:
    """All reconstruction constants, derived from the trace-moment coefficients."""
    A1 = d / k
    c2 = coefficients(k, d, 2).alphas
    q2 = coefficients(k, d, 2).q
    lead2 = (2 * c2[(1, 1)] + c2[(2,)]) / (2 * q2)
    A2 = 1.0 / lead2
    B2 = (c2[(2,)] / (2 * q2)) / lead2 * (d / k)
    c3 = coefficients(k, d, 3).alphas
    q3 = coefficients(k, d, 3).q
    lead3 = (4 * c3[(1, 1, 1)] + 2 * c3[(2, 1)] + c3[(3,)]) / (4 * q3)
    sub3 = (2 * c3[(2, 1)] + 3 * c3[(3,)]) / (4 * q3)
    A3 = 1.0 / lead3
    B3 = (sub3 / lead3) * (d / k)**2
    C1 = A3
    C2 = (sub3 / lead3) * (d * (d + 2)) / (k * (k + 2))
    return FusionConstants(A1, A2, B2, A3, B3, C1, C2)


# ---------------------------------------------------------------------------
# cubature-based reconstruction

def _check_rule(rule: CubatureRule, t: int, tol: float):
    if rule.gap is None:
        raise UncertifiedRule("rule has no certified gap")
    if rule.t < t:
        raise UncertifiedRule(f"rule certified for degree {rule.t} < requested {t}")
    approximate = rule.gap > tol
    return approximate, math.sqrt(max(rule.gap, 0.0))


def _aggregate(rule: CubatureRule, projected: ProjectedMomentSet, t: int) -> dict:
    """Weighted mean of the projected tensors; all formulas are linear in it."""
    if projected.convention != "PX":
        raise DimensionMismatch("fusion formulas consume PX-convention moments")
    if len(projected) != rule.n:
        raise DimensionMismatch("projected set size does not match rule")
    if projected.p < t:
        raise DimensionMismatch("projected moments below requested degree")
    agg = {s: 0.0 for s in multi_indices(rule.d, t)}
    for w, tensor in zip(rule.weights, projected.tensors):
        if tensor.d != rule.d:
            raise DimensionMismatch("tensor dimension does not match rule")
        for s in agg:
            agg[s] += w * tensor[s]
    return agg


def _unit(i: int, d: int, deg: int = 1) -> tuple:
    return tuple(deg if j == i else 0 for j in range(d))


def _pair(i: int, l: int, d: int) -> tuple:
    s = [0] * d
    s[i] += 1
    s[l] += 1
    return tuple(s)


def _triple(i: int, l: int, m: int, d: int) -> tuple:
    s = [0] * d
    s[i] += 1
    s[l] += 1
    s[m] += 1
    return tuple(s)


def reconstruct_sphere(rule: CubatureRule, projected: ProjectedMomentSet,
                       t: int, tol: float = DEFAULT_GAP_TOL) -> MomentTensor:
    """Moments up to degree t of a sphere-supported X from projected moments."""
    if t not in (1, 2, 3):
        raise DegreeUnsupported(f"sphere reconstruction supports t <= 3, got {t}")
    if rule.d < 3:
        raise DegreeUnsupported("sphere reconstruction requires d >= 3")
    approximate, eps = _check_rule(rule, t, tol)
    d, k = rule.d, rule.k
    con = fusion_constants(k, d)
    agg = _aggregate(rule, projected, t)
    kd = k / d
    values = {tuple([0] * d): 1.0}
    for i in range(d):
        values[_unit(i, d)] = con.A1 * agg[_unit(i, d)]
    if t >= 2:
        for i in range(d):
            for l in range(i, d):
                values[_pair(i, l, d)] = (con.A2 * agg[_pair(i, l, d)]
                                          - con.B2 * kd * (i == l))
    if t >= 3:
        b = [agg[_unit(i, d)] for i in range(d)]
        for i in range(d):
            for l in range(i, d):
                for m in range(l, d):
                    kron = (b[m] * (i == l) + b[l] * (i == m) + b[i] * (l == m))
                    values[_triple(i, l, m, d)] = (
                        con.A3 * agg[_triple(i, l, m, d)]
                        - con.B3 / 3.0 * kd * kron)
    return MomentTensor(d, t, values, approximate=approximate, epsilon=eps)


def reconstruct_general(rule: CubatureRule, projected: ProjectedMomentSet,
                        t: int, tol: float = DEFAULT_GAP_TOL) -> MomentTensor:
    """Moments up to degree t of an arbitrary X in R^d from projected moments."""
    if t not in (1, 2, 3):
        raise DegreeUnsupported(f"general reconstruction supports t <= 3, got {t}")
    if rule.d < 3:
        raise DegreeUnsupported("general reconstruction requires d >= 3")
    approximate, eps = _check_rule(rule, t, tol)
    d, k = rule.d, rule.k
    con = fusion_constants(k, d)
    agg = _aggregate(rule, projected, t)
    values = {tuple([0] * d): 1.0}
    for i in range(d):
        values[_unit(i, d)] = con.A1 * agg[_unit(i, d)]
    if t >= 2:
        s2 = sum(agg[_unit(m, d, 2)] for m in range(d))
        for i in range(d):
            for l in range(i, d):
                v = con.A2 * agg[_pair(i, l, d)]
                if i == l:
                    v -= con.B2 * s2
                values[_pair(i, l, d)] = v
    if t >= 3:
        # r[h] = sum_j sum_m w_j E (P_j X)_h (P_j X)_m^2
        r = [sum(agg[tuple(np.add(_unit(h, d), _unit(m, d, 2)))] for m in range(d))
             for h in range(d)]
        for i in range(d):
            for l in range(i, d):
                for m in range(l, d):
                    s = _triple(i, l, m, d)
                    v = con.C1 * agg[s]
                    if i == l == m:
                        v -= con.C2 * r[i]
                    elif i == l or l == m or i == m:
                        # pattern x_a^2 x_h with h the odd index out
                        h = m if i == l else (i if l == m else l)
                        v -= con.C2 / 3.0 * r[h]
                    values[s] = v
    return MomentTensor(d, t, values, approximate=approximate, epsilon=eps)


# ---------------------------------------------------------------------------
# rank-1 arbitrary order

def _chebyshev_nodes(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.cos((2 * j + 1) * np.pi / (2 * n))


def rank1_coefficients(t: int, d: int) -> np.ndarray:
    """Coefficients a_i with <x,y>^t = sum_i a_i mu^(t-2i, i) of a unit pair.

    Fitted on Chebyshev-spaced inner products and validated on fresh points.
    """
    if t > d:
        raise DimensionTooSmall(f"rank-1 expansion needs t <= d, got t={t}, d={d}")
    n = t // 2 + 1
    # all basis functions share the parity of t, so nodes must stay positive
    cs = 0.5 + 0.45 * _chebyshev_nodes(n)
    A = np.array([[mu_rank1(t - 2 * i, i, GramPair(1.0, c, 1.0), d)
                   for i in range(n)] for c in cs])
    a = np.linalg.solve(A, cs**t)
    check = np.linspace(-0.98, 0.98, 50)
    for c in check:
        fit = sum(a[i] * mu_rank1(t - 2 * i, i, GramPair(1.0, c, 1.0), d)
                  for i in range(n))
        if abs(fit - c**t) > 1e-10:
            raise IllConditioned("rank-1 coefficient fit residual exceeds 1e-10")
    return a


def reconstruct_rank1(rule: CubatureRule, projected: ProjectedMomentSet,
                      t: int, tol: float = DEFAULT_GAP_TOL) -> MomentTensor:
    """All moments up to degree t from rank-1 projections, any t <= d."""
    if rule.k != 1:
        raise RankMismatch("rank-1 reconstruction requires a k=1 rule")
    d = rule.d
    if t > d:
        raise DegreeUnsupported(f"rank-1 reconstruction needs t <= d, got t={t}")
    approximate, eps = _check_rule(rule, t, tol)
    agg = _aggregate(rule, projected, t)
    values = {tuple([0] * d): 1.0}
    for deg in range(1, t + 1):
        a = rank1_coefficients(deg, d)
        cache = {}
        for alpha in homogeneous_indices(d, deg):
            total = 0.0
            for term in polarize(alpha):
                y = np.asarray(term.direction, dtype=float)
                norm = float(np.linalg.norm(y))
                key = term.direction
                if key not in cache:
                    yhat = y / norm
                    # sum_i a_i sum_j w_j E <P_j X, yhat>^(deg-2i) ||P_j X||^(2i)
                    val = 0.0
                    for i in range(deg // 2 + 1):
                        poly = poly_mul(linear_form_power(yhat, deg - 2 * i),
                                        norm_square_power(d, i))
                        val += a[i] * sum(c * agg[s] for s, c in poly.items())
                    cache[key] = val
                total += term.coefficient * norm**deg * cache[key]
            values[alpha] = total
    return MomentTensor(d, t, values, approximate=approximate, epsilon=eps)


# ---------------------------------------------------------------------------
# explicit spanning families

def spanning_family(p: int, d: int, k: int) -> MeasurementEnsemble:
    """The explicit measurement families that span degree-<=p polynomials."""
    e = np.eye(d)
    mats = []
    if k == 1:
        if p not in (1, 2, 3, 4):
            raise UnsupportedCombination(f"k=1 spanning families exist for p <= 4, got {p}")
        for i in range(d):
            mats.append(e[i:i + 1])
        if p >= 2:
            for i, j in itertools.combinations(range(d), 2):
                mats.append((e[i] + e[j]).reshape(1, d))
        if p >= 3:
            for i, j in itertools.combinations(range(d), 2):
                mats.append((e[i] - e[j]).reshape(1, d))
            for i, j, l in itertools.combinations(range(d), 3):
                mats.append((e[i] + e[j] + e[l]).reshape(1, d))
        if p >= 4:
            for i, j in itertools.combinations(range(d), 2):
                mats.append((e[i] + 2 * e[j]).reshape(1, d))
            for i, j, l in itertools.combinations(range(d), 3):
                mats.append((e[i] - e[j] + e[l]).reshape(1, d))
                mats.append((e[i] + e[j] - e[l]).reshape(1, d))
            for i, j, l, m in itertools.combinations(range(d), 4):
                mats.append((e[i] + e[j] + e[l] + e[m]).reshape(1, d))
    elif k == 2:
        if p == 1:
            pairs = [(i, i + 1) for i in range(0, d - 1, 2)]
            if d % 2 == 1:
                pairs.append((d - 1, 0))
            for i, j in pairs:
                mats.append(np.vstack([e[i], e[j]]))
        elif p == 2:
            for i, j in itertools.combinations(range(d), 2):
                mats.append(np.vstack([e[i], e[j]]))
        else:
            raise UnsupportedCombination(f"k=2 spanning families exist for p <= 2, got {p}")
    else:
        raise UnsupportedCombination(f"no explicit spanning family for k={k}")
    return MeasurementEnsemble(d, k, tuple(mats))


def spanning_reconstruct(ensemble: MeasurementEnsemble,
                         projected: ProjectedMomentSet, p: int) -> MomentTensor:
    """Recover all moments up to degree p by linear solve over the family.

    Each measured moment E (Q_j X)^s is a known linear combination of the
    unknown high-dimensional moments; the (possibly overdetermined) system
    is solved by least squares after a numerical-rank spanning check.
    """
    if projected.convention != "QX":
        raise DimensionMismatch("spanning reconstruction consumes QX-convention moments")
    if len(projected) != len(ensemble):
        raise DimensionMismatch("projected set size does not match ensemble")
    if projected.p < p:
        raise DimensionMismatch("projected moments below requested degree")
    d, k = ensemble.d, ensemble.k
    unknowns = [s for s in multi_indices(d, p) if sum(s) >= 1]
    col = {s: i for i, s in enumerate(unknowns)}
    rows, rhs = [], []
    qx_indices = [s for s in multi_indices(k, p) if sum(s) >= 1]
    for Q, tensor in zip(ensemble.matrices, projected.tensors):
        if tensor.d != k:
            raise DimensionMismatch("QX tensor dimension does not match ensemble")
        for s in qx_indices:
            poly = {tuple([0] * d): 1.0}
            for i, si in enumerate(s):
                if si:
                    poly = poly_mul(poly, linear_form_power(Q[i], si))
            row = np.zeros(len(unknowns))
            for mono, c in poly.items():
                row[col[mono]] = c
            rows.append(row)
            rhs.append(tensor[s])
    A = np.asarray(rows)
    b = np.asarray(rhs)
    rank = np.linalg.matrix_rank(A, tol=1e-10 * np.linalg.norm(A))
    if rank < len(unknowns):
        raise SpanDeficient(
            f"family spans rank {rank} < {len(unknowns)} monomials at degree <= {p}")
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    values = {tuple([0] * d): 1.0}
    for s, i in col.items():
        values[s] = float(x[i])
    return MomentTensor(d, p, values)
