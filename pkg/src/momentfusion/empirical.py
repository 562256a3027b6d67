"""Synthetic distributions, sample-based estimators, and Monte Carlo oracles.

Everything here serves as independent ground truth for the closed-form
machinery: exact atom moments, sampling-based moment estimates, and Haar
Monte Carlo estimates of trace moments with jackknife standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .grassmann import (MeasurementEnsemble, Projector, as_generator,
                        haar_frame_batch)
from .moments import MomentTensor, ProjectedMomentSet, multi_indices


@dataclass(frozen=True)
class DiscreteDistribution:
    """A finitely supported law given by atoms and probabilities."""

    atoms: np.ndarray      # (n_atoms, d)
    probs: np.ndarray      # (n_atoms,)
    sphere_flag: bool = False

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if atoms.ndim != 2 or len(atoms) != len(probs):
            raise DimensionMismatch("atoms and probs are inconsistent")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise DimensionMismatch("probabilities must be nonnegative and sum to 1")
        if self.sphere_flag:
            norms = np.linalg.norm(atoms, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-12:
                raise DimensionMismatch("sphere-flagged atoms must be unit norm")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def to_json_dict(self) -> dict:
        return {"atoms": [list(a) for a in self.atoms], "probs": list(self.probs),
                "sphere": self.sphere_flag}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DiscreteDistribution":
        return cls(np.asarray(obj["atoms"], dtype=float),
                   np.asarray(obj["probs"], dtype=float),
                   sphere_flag=bool(obj.get("sphere", False)))


def random_discrete(d: int, n_atoms: int, rng, sphere: bool = False,
                    scale: float = 1.0) -> DiscreteDistribution:
    """A seeded test law: Gaussian atoms (unit-normalized if sphere) and random probs."""
    gen = as_generator(rng)
    atoms = gen.standard_normal((n_atoms, d)) * scale
    if sphere:
        atoms = atoms / np.linalg.norm(atoms, axis=1, keepdims=True)
    probs = gen.random(n_atoms) + 0.1
    probs /= probs.sum()
    return DiscreteDistribution(atoms, probs, sphere_flag=sphere)


@dataclass(frozen=True)
class SampleBatch:
    d: int
    n_samples: int
    data: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != (self.n_samples, self.d):
            raise DimensionMismatch("data shape does not match (n_samples, d)")
        if not np.all(np.isfinite(data)):
            raise DimensionMismatch("samples contain non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


def _moments_from_weighted_points(points: np.ndarray, weights: np.ndarray,
                                  p: int, sphere: bool = False) -> MomentTensor:
    d = points.shape[1]
    values = {}
    for s in multi_indices(d, p):
        mono = np.ones(len(points))
        for i, si in enumerate(s):
            if si:
                mono = mono * points[:, i]**si
        values[s] = float(weights @ mono)
    return MomentTensor(d, p, values, sphere=sphere)


def true_moments(dist: DiscreteDistribution, p: int) -> MomentTensor:
    """Exact moments of a discrete law by direct summation over atoms."""
    return _moments_from_weighted_points(dist.atoms, dist.probs, p,
                                         sphere=dist.sphere_flag)


def sample(law, n: int, rng, d: int | None = None) -> SampleBatch:
    """Draw n samples from a DiscreteDistribution or a named law.

    Named laws: "uniform_sphere", "gaussian", "dirichlet" (flat Dirichlet).
    """
    gen = as_generator(rng)
    if isinstance(law, DiscreteDistribution):
        idx = gen.choice(len(law.probs), size=n, p=law.probs)
        data = law.atoms[idx]
        name = "discrete"
        d = law.d
    elif law == "uniform_sphere":
        if d is None:
            raise DimensionMismatch("named laws require d")
        g = gen.standard_normal((n, d))
        data = g / np.linalg.norm(g, axis=1, keepdims=True)
        name = law
    elif law == "gaussian":
        if d is None:
            raise DimensionMismatch("named laws require d")
        data = gen.standard_normal((n, d))
        name = law
    elif law == "dirichlet":
        if d is None:
            raise DimensionMismatch("named laws require d")
        data = gen.dirichlet(np.ones(d), size=n)
        name = law
    else:
        raise DimensionMismatch(f"unknown law {law!r}")
    return SampleBatch(d, n, data, provenance=name)


def estimate_moments(batch: SampleBatch, p: int) -> MomentTensor:
    """Sample-average moments of a batch, complete to degree p."""
    w = np.full(batch.n_samples, 1.0 / batch.n_samples)
    return _moments_from_weighted_points(batch.data, w, p)


def project_moments(source, onto, p: int, convention: str = "PX") -> ProjectedMomentSet:
    """Projected moment tensors of a law or batch, per measurement.

    `onto` is a MeasurementEnsemble, a list of Projectors, or a CubatureRule.
    QX convention requires an ensemble (it needs the k-dim coordinates).
    """
    if isinstance(source, DiscreteDistribution):
        points, weights, d = source.atoms, source.probs, source.d
    elif isinstance(source, SampleBatch):
        points = source.data
        weights = np.full(source.n_samples, 1.0 / source.n_samples)
        d = source.d
    else:
        raise DimensionMismatch("source must be a DiscreteDistribution or SampleBatch")

    if convention == "QX":
        if not isinstance(onto, MeasurementEnsemble):
            raise DimensionMismatch("QX convention requires a MeasurementEnsemble")
        if onto.d != d:
            raise DimensionMismatch("ensemble dimension does not match source")
        tensors = [_moments_from_weighted_points(points @ Q.T, weights, p)
                   for Q in onto.matrices]
    elif convention == "PX":
        if isinstance(onto, MeasurementEnsemble):
            projs = onto.projectors()
        elif hasattr(onto, "nodes"):
            projs = onto.nodes
        else:
            projs = list(onto)
        if projs and projs[0].d != d:
            raise DimensionMismatch("projector dimension does not match source")
        tensors = [_moments_from_weighted_points(points @ P.entries, weights, p)
                   for P in projs]
    else:
        raise DimensionMismatch(f"unknown convention {convention!r}")
    return ProjectedMomentSet(convention, p, tensors)


def mc_trace_moment(Ms, k: int, d: int, N: int, rng,
                    chunk: int = 100_000) -> tuple:
    """Haar Monte Carlo estimate of the mixed trace moment, with jackknife SE."""
    if N < 1000:
        raise DimensionMismatch("need N >= 1000")
    gen = as_generator(rng)
    mats = [np.asarray(M, dtype=float) for M in Ms]
    prods = np.empty(N)
    done = 0
    while done < N:
        m = min(chunk, N - done)
        V = haar_frame_batch(d, k, m, gen)
        acc = np.ones(m)
        for M in mats:
            acc *= np.einsum("nik,ij,njk->n", V, M, V)
        prods[done:done + m] = acc
        done += m
    est = float(np.mean(prods))
    # leave-one-out jackknife collapses to the usual SE for a plain mean
    se = float(np.std(prods, ddof=1) / np.sqrt(N))
    return est, se
