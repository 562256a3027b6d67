"""Projector algebra and Haar sampling on the real Grassmannian.

A point of the Grassmannian is represented by its rank-k orthogonal
projection matrix, stored dense.  Rank-<=2 symmetric matrices built from
vector pairs are the test functionals used by the reconstruction formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RankDeficient

SYMMETRY_TOL = 1e-12
IDEMPOTENCY_TOL = 1e-10
TRACE_TOL = 1e-10
RANK_RTOL = 1e-10


def as_generator(rng) -> np.random.Generator:
    """Coerce a seed or Generator into a Philox-backed Generator.

    Philox is counter-based and splittable, which keeps parallel streams
    reproducible from a single integer seed.
    """
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))


def check_symmetric(M: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if np.max(np.abs(M - M.T)) > tol:
        raise DimensionMismatch("matrix is not symmetric within tolerance")
    return M


@dataclass(frozen=True)
class Projector:
    """A d x d symmetric idempotent matrix of trace k."""

    d: int
    k: int
    entries: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.entries, dtype=float).reshape(self.d, self.d)
        if not (0 < self.k < self.d):
            raise DimensionMismatch(f"need 0 < k < d, got k={self.k}, d={self.d}")
        if np.max(np.abs(P - P.T)) > SYMMETRY_TOL:
            raise DimensionMismatch("projector is not symmetric")
        if np.linalg.norm(P @ P - P) > IDEMPOTENCY_TOL:
            raise DimensionMismatch("projector is not idempotent")
        if abs(np.trace(P) - self.k) > TRACE_TOL:
            raise DimensionMismatch("projector trace does not equal k")
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(x, dtype=float)

    def to_json_dict(self) -> dict:
        return {"d": self.d, "k": self.k, "entries": list(self.entries.ravel())}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Projector":
        return cls(int(obj["d"]), int(obj["k"]),
                   np.asarray(obj["entries"], dtype=float).reshape(obj["d"], obj["d"]))


@dataclass(frozen=True)
class MeasurementEnsemble:
    """A list of full-rank k x d measurement matrices."""

    d: int
    k: int
    matrices: tuple

    def __post_init__(self):
        mats = []
        for Q in self.matrices:
            Q = np.asarray(Q, dtype=float).reshape(self.k, self.d)
            s = np.linalg.svd(Q, compute_uv=False)
            if s[-1] <= RANK_RTOL * s[0]:
                raise RankDeficient("measurement matrix is rank deficient")
            Q.setflags(write=False)
            mats.append(Q)
        object.__setattr__(self, "matrices", tuple(mats))

    def __len__(self) -> int:
        return len(self.matrices)

    def projectors(self) -> list:
        return [projector_from_measurement(Q) for Q in self.matrices]

    def to_json_dict(self) -> dict:
        return {"d": self.d, "k": self.k,
                "matrices": [[list(row) for row in Q] for Q in self.matrices]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MeasurementEnsemble":
        return cls(int(obj["d"]), int(obj["k"]),
                   tuple(np.asarray(Q, dtype=float) for Q in obj["matrices"]))


def projector_from_measurement(Q: np.ndarray) -> Projector:
    """Orthogonal projector onto the row space of a full-rank k x d matrix."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    k, d = Q.shape
    if k >= d:
        raise DimensionMismatch(f"need k < d, got shape {Q.shape}")
    s = np.linalg.svd(Q, compute_uv=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficient("measurement matrix is rank deficient")
    P = Q.T @ np.linalg.solve(Q @ Q.T, Q)
    P = 0.5 * (P + P.T)  # kill roundoff asymmetry
    return Projector(d, k, P)


def _orthonormalize(G: np.ndarray) -> np.ndarray:
    """QR with the R-diagonal sign fixed, so Q is Haar for Gaussian input."""
    V, R = np.linalg.qr(G)
    signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    signs = np.where(signs == 0.0, 1.0, signs)
    return V * signs[..., None, :]


def haar_frame_batch(d: int, k: int, n: int, rng) -> np.ndarray:
    """n independent Haar-distributed orthonormal frames, shape (n, d, k).

    Each frame V yields the projector V V^T; keeping frames instead of dense
    projectors is what makes large Monte Carlo runs affordable.
    """
    gen = as_generator(rng)
    G = gen.standard_normal((n, d, k))
    return _orthonormalize(G)


def haar_sample(d: int, k: int, rng) -> Projector:
    """One Haar-distributed rank-k projector on R^d."""
    if not (1 <= k < d):
        raise DimensionMismatch(f"need 1 <= k < d, got k={k}, d={d}")
    V = haar_frame_batch(d, k, 1, rng)[0]
    return Projector(d, k, V @ V.T)


def e_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """The symmetric rank-<=2 matrix (x y^T + y x^T) / 2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatch(f"vector shapes differ: {x.shape} vs {y.shape}")
    return 0.5 * (np.outer(x, y) + np.outer(y, x))
