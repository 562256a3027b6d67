"""Multi-index moment tensors and small polynomial-expansion helpers.

A moment tensor maps exponent vectors s (|s| <= p) to E[X^s].  Polynomials
in projected coordinates are represented as dicts from exponent tuples to
coefficients; that is all the symbolic machinery the fusion formulas need.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import DimensionMismatch, IncompleteMoments

SPHERE_TOL = 1e-10


def multi_indices(d: int, p: int):
    """All exponent vectors of length d with total degree <= p, graded-lex order."""
    out = []
    for deg in range(p + 1):
        out.extend(homogeneous_indices(d, deg))
    return out


def homogeneous_indices(d: int, deg: int):
    """Exponent vectors of total degree exactly deg, lexicographic order."""
    if d == 1:
        return [(deg,)]
    out = []
    for first in range(deg + 1):
        for rest in homogeneous_indices(d - 1, deg - first):
            out.append((first,) + rest)
    return out


def graded_lex_key(s) -> tuple:
    return (sum(s), tuple(s))


def degree(s) -> int:
    return int(sum(s))


@dataclass
class MomentTensor:
    """Moments E[X^s] for all |s| <= p, with the degree-0 entry fixed to 1."""

    d: int
    p: int
    values: dict
    sphere: bool = False
    approximate: bool = False
    epsilon: float = 0.0

    def __post_init__(self):
        vals = {}
        for s, v in self.values.items():
            s = tuple(int(e) for e in s)
            if len(s) != self.d or any(e < 0 for e in s):
                raise DimensionMismatch(f"bad multi-index {s} for d={self.d}")
            vals[s] = float(v)
        for s in multi_indices(self.d, self.p):
            if s not in vals:
                raise IncompleteMoments(f"missing multi-index {s}")
        zero = tuple([0] * self.d)
        if abs(vals[zero] - 1.0) > 1e-12:
            raise IncompleteMoments("degree-0 moment must equal 1")
        if self.sphere and self.p >= 2:
            second = sum(vals[tuple(2 if j == i else 0 for j in range(self.d))]
                         for i in range(self.d))
            if abs(second - 1.0) > SPHERE_TOL:
                raise IncompleteMoments("sphere-supported tensor must have E||X||^2 = 1")
        self.values = vals

    def __getitem__(self, s) -> float:
        return self.values[tuple(s)]

    def degree_slice(self, deg: int) -> dict:
        return {s: v for s, v in self.values.items() if sum(s) == deg}

    def max_abs_diff(self, other: "MomentTensor") -> float:
        common = set(self.values) & set(other.values)
        return max(abs(self.values[s] - other.values[s]) for s in common)

    def to_json_dict(self) -> dict:
        items = sorted(self.values.items(), key=lambda kv: graded_lex_key(kv[0]))
        out = {"d": self.d, "p": self.p,
               "values": [{"s": list(s), "v": v} for s, v in items]}
        if self.sphere:
            out["sphere"] = True
        if self.approximate:
            out["approximate"] = True
            out["epsilon"] = self.epsilon
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MomentTensor":
        values = {tuple(item["s"]): item["v"] for item in obj["values"]}
        return cls(int(obj["d"]), int(obj["p"]), values,
                   sphere=bool(obj.get("sphere", False)),
                   approximate=bool(obj.get("approximate", False)),
                   epsilon=float(obj.get("epsilon", 0.0)))


@dataclass
class ProjectedMomentSet:
    """Per-measurement moment tensors of Q_j X (k-dim) or P_j X (d-dim)."""

    convention: str  # "PX" or "QX"
    p: int
    tensors: list

    def __post_init__(self):
        if self.convention not in ("PX", "QX"):
            raise DimensionMismatch(f"unknown convention {self.convention!r}")
        for t in self.tensors:
            if t.p < self.p:
                raise IncompleteMoments("member tensor below common degree")

    def __len__(self) -> int:
        return len(self.tensors)

    def to_json_dict(self) -> dict:
        return {"convention": self.convention, "p": self.p,
                "tensors": [t.to_json_dict() for t in self.tensors]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ProjectedMomentSet":
        return cls(obj["convention"], int(obj["p"]),
                   [MomentTensor.from_json_dict(t) for t in obj["tensors"]])


# ---------------------------------------------------------------------------
# polynomial-as-dict helpers

def linear_form_power(coeffs: np.ndarray, m: int) -> dict:
    """Expand (sum_i c_i x_i)^m into {exponent tuple: coefficient}."""
    d = len(coeffs)
    if m == 0:
        return {tuple([0] * d): 1.0}
    out = {}
    for a in homogeneous_indices(d, m):
        coef = factorial(m)
        term = 1.0
        for ci, ai in zip(coeffs, a):
            if ai:
                if ci == 0.0:
                    term = 0.0
                    break
                coef //= factorial(ai)
                term *= ci**ai
        if term != 0.0:
            out[a] = coef * term
    return out


def norm_square_power(d: int, i: int) -> dict:
    """Expand (x_1^2 + ... + x_d^2)^i into {exponent tuple: coefficient}."""
    if i == 0:
        return {tuple([0] * d): 1.0}
    out = {}
    for a in homogeneous_indices(d, i):
        coef = factorial(i)
        for ai in a:
            coef //= factorial(ai)
        out[tuple(2 * ai for ai in a)] = float(coef)
    return out


def poly_mul(p1: dict, p2: dict) -> dict:
    out = {}
    for s1, c1 in p1.items():
        for s2, c2 in p2.items():
            s = tuple(a + b for a, b in zip(s1, s2))
            out[s] = out.get(s, 0.0) + c1 * c2
    return out


def poly_expect(poly: dict, tensor: MomentTensor) -> float:
    """Expected value of a polynomial under a moment tensor."""
    return sum(c * tensor[s] for s, c in poly.items())
