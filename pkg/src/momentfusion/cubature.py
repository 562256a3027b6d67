"""Construction and certification of cubature rules on the Grassmannian.

A rule is certified by the gap between its degree-t potential and the
analytic lower bound lambda_t; the gap equals the squared worst-case
cubature error over the degree-t polynomial space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IllConditioned, UnsupportedDegree
from .grassmann import Projector, as_generator, e_matrix, haar_frame_batch
from .trace_moments import lambda_t, mu_t

COND_LIMIT = 1e12


@dataclass
class OptimizerConfig:
    max_iters: int = 4000
    step_init: float = 0.1
    armijo_c: float = 1e-4
    restarts: int = 10
    tol_gap: float = 1e-11
    weight_mode: str = "optimize"  # fixed_uniform | optimize | solve_linear

    def __post_init__(self):
        if self.max_iters <= 0 or self.step_init <= 0 or self.restarts <= 0:
            raise DimensionMismatch("optimizer parameters must be positive")
        if not (0.0 < self.armijo_c < 1.0):
            raise DimensionMismatch("armijo_c must lie in (0,1)")
        if self.tol_gap <= 0:
            raise DimensionMismatch("tol_gap must be positive")
        if self.weight_mode not in ("fixed_uniform", "optimize", "solve_linear"):
            raise DimensionMismatch(f"unknown weight_mode {self.weight_mode!r}")


@dataclass
class CubatureRule:
    """Weighted projector nodes with a cached certification gap."""

    d: int
    k: int
    t: int
    nodes: list
    weights: np.ndarray
    gap: float | None = None
    converged: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.nodes) != len(self.weights):
            raise DimensionMismatch("node and weight counts differ")
        for P in self.nodes:
            if not isinstance(P, Projector):
                raise DimensionMismatch("nodes must be Projector instances")
            if P.d != self.d or P.k != self.k:
                raise DimensionMismatch("node dimensions inconsistent with rule")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def epsilon(self) -> float:
        if self.gap is None:
            return math.inf
        return math.sqrt(max(self.gap, 0.0))

    def node_array(self) -> np.ndarray:
        return np.stack([P.entries for P in self.nodes])

    def to_json_dict(self) -> dict:
        return {"d": self.d, "k": self.k, "t": self.t,
                "gap": self.gap,
                "nodes": [P.to_json_dict() for P in self.nodes],
                "weights": list(self.weights)}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CubatureRule":
        gap = obj["gap"]
        return cls(int(obj["d"]), int(obj["k"]), int(obj["t"]),
                   [Projector.from_json_dict(p) for p in obj["nodes"]],
                   np.asarray(obj["weights"], dtype=float),
                   gap=None if gap is None else float(gap))


def _gram(stack: np.ndarray) -> np.ndarray:
    n, d, _ = stack.shape
    flat = stack.reshape(n, d * d)
    return flat @ flat.T


def potential(nodes, weights, t: int) -> float:
    """The weighted degree-t frame potential sum_ij w_i w_j <P_i, P_j>^t."""
    if t < 1:
        raise UnsupportedDegree("t must be >= 1")
    stack = np.stack([P.entries if isinstance(P, Projector) else np.asarray(P)
                      for P in nodes])
    w = np.asarray(weights, dtype=float)
    if stack.shape[1] != stack.shape[2]:
        raise DimensionMismatch("nodes must be square matrices")
    G = _gram(stack)
    return float(w @ (G**t) @ w)


def certify(rule: CubatureRule) -> float:
    """Recompute and cache the rule's gap; its epsilon is sqrt(max(gap, 0))."""
    gap = potential(rule.nodes, rule.weights, rule.t) - lambda_t(rule.k, rule.d, rule.t)
    rule.gap = gap
    return gap


def probabilistic_rule(n: int, k: int, d: int, rng, t: int = 2) -> CubatureRule:
    """n i.i.d. Haar nodes with uniform weights, certified."""
    gen = as_generator(rng)
    V = haar_frame_batch(d, k, n, gen)
    nodes = [Projector(d, k, v @ v.T) for v in V]
    rule = CubatureRule(d, k, t, nodes, np.full(n, 1.0 / n))
    certify(rule)
    return rule


def _random_test_matrices(n_mats: int, d: int, gen) -> list:
    """Generic symmetric test matrices: E_{x,y} plus a random rank-2 bump."""
    mats = []
    for _ in range(n_mats):
        x = gen.standard_normal(d)
        y = gen.standard_normal(d)
        u = gen.standard_normal(d)
        v = gen.standard_normal(d)
        mats.append(e_matrix(x, y) + e_matrix(u, v))
    return mats


def solve_weights(nodes, t: int, test_matrices="auto", rng=0,
                  return_rule: bool = False):
    """Least-squares weights matching the exact trace moments on test functionals.

    Solves sum_j <M_i, P_j>^t w_j = mu^t(M_i) over a generic matrix family;
    weights may be negative.
    """
    nodes = [P if isinstance(P, Projector) else
             Projector(np.asarray(P).shape[0],
                       int(round(np.trace(np.asarray(P)))), np.asarray(P))
             for P in nodes]
    n = len(nodes)
    d, k = nodes[0].d, nodes[0].k
    gen = as_generator(rng)
    if test_matrices == "auto":
        # grow the family until it covers the numerical rank of the design
        mats = _random_test_matrices(n, d, gen)
        A = _design_matrix(mats, nodes, t)
        rank = np.linalg.matrix_rank(A, tol=1e-10 * np.linalg.norm(A))
        while len(mats) < max(n, rank + 10):
            mats.extend(_random_test_matrices(max(n, rank + 10) - len(mats), d, gen))
            A = _design_matrix(mats, nodes, t)
            new_rank = np.linalg.matrix_rank(A, tol=1e-10 * np.linalg.norm(A))
            if new_rank == rank:
                break
            rank = new_rank
    else:
        mats = list(test_matrices)
        A = _design_matrix(mats, nodes, t)
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > s[0] * 1e-13)) if s[0] > 0 else 0
    if rank == 0 or s[0] / s[rank - 1] > COND_LIMIT:
        raise IllConditioned("weight-solve design matrix condition number exceeds 1e12")
    b = np.array([mu_t(M, k, t, d=d) for M in mats])
    w, *_ = np.linalg.lstsq(A, b, rcond=1e-13)
    if not return_rule:
        return w
    rule = CubatureRule(d, k, t, nodes, w)
    certify(rule)
    return rule


def _design_matrix(mats, nodes, t: int) -> np.ndarray:
    stack = np.stack([P.entries for P in nodes])
    flat_nodes = stack.reshape(len(nodes), -1)
    flat_mats = np.stack([np.asarray(M).ravel() for M in mats])
    return (flat_mats @ flat_nodes.T)**t


# ---------------------------------------------------------------------------
# potential minimization on products of Stiefel manifolds

def _frames_to_projectors(V: np.ndarray) -> np.ndarray:
    return np.einsum("nik,njk->nij", V, V)


def _objective(V: np.ndarray, w: np.ndarray, t: int, lam: float) -> float:
    """||sum_j w_j P_j^(x)t - Lambda_t||^2; equals the gap when sum w = 1."""
    P = _frames_to_projectors(V)
    G = _gram(P)
    return float(w @ (G**t) @ w - 2.0 * lam * w.sum() + lam)


def _node_gradient(V: np.ndarray, w: np.ndarray, t: int) -> np.ndarray:
    """Riemannian gradient of the potential on the product Stiefel manifold."""
    P = _frames_to_projectors(V)
    G = _gram(P)
    W = (np.outer(w, w)) * (t * G**(t - 1))
    # A_j = sum_i W_ij P_i;  Euclidean grad_j = 4 A_j V_j
    A = np.einsum("ij,iab->jab", W, P)
    G_eucl = 4.0 * np.einsum("jab,jbk->jak", A, V)
    VtG = np.einsum("jak,jal->jkl", V, G_eucl)
    sym = 0.5 * (VtG + np.swapaxes(VtG, 1, 2))
    return G_eucl - np.einsum("jak,jkl->jal", V, sym)


def _retract(V: np.ndarray, xi: np.ndarray, step: float) -> np.ndarray:
    Q, R = np.linalg.qr(V - step * xi)
    signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    signs = np.where(signs == 0.0, 1.0, signs)
    return Q * signs[..., None, :]


def _solve_weights_from_gram(G: np.ndarray, t: int, lam: float) -> np.ndarray:
    """Unconstrained minimizer of the squared error over the weights."""
    K = G**t
    w, *_ = np.linalg.lstsq(K, np.full(len(K), lam), rcond=None)
    return w


def minimize_potential(n: int, k: int, d: int, t: int,
                       config: OptimizerConfig | None = None,
                       rng=0) -> CubatureRule:
    """Gradient descent with QR retraction on the degree-t frame potential.

    Nodes are parameterized as V V^T with V on the Stiefel manifold; weights
    follow config.weight_mode.  Returns the best rule over the restarts,
    certified; rule.converged is False if tol_gap was never reached.
    """
    if n < 1:
        raise DimensionMismatch("need at least one node")
    cfg = config or OptimizerConfig()
    gen = as_generator(rng)
    lam = lambda_t(k, d, t)
    best_V, best_w, best_val = None, None, math.inf

    for _ in range(cfg.restarts):
        V = haar_frame_batch(d, k, n, gen)
        theta = np.zeros(n)  # softmax weight parameters
        w = np.full(n, 1.0 / n)
        step = cfg.step_init
        val = _objective(V, w, t, lam)
        for _ in range(cfg.max_iters):
            if cfg.weight_mode == "solve_linear":
                P = _frames_to_projectors(V)
                w = _solve_weights_from_gram(_gram(P), t, lam)
                val = _objective(V, w, t, lam)
            xi = _node_gradient(V, w, t)
            gnorm2 = float(np.sum(xi * xi))
            if cfg.weight_mode == "optimize":
                P = _frames_to_projectors(V)
                K = _gram(P)**t
                gw = 2.0 * (K @ w - lam)
                gtheta = w * (gw - float(w @ gw))
                gnorm2 += float(gtheta @ gtheta)
            else:
                gtheta = None
            if gnorm2 < 1e-26 or val <= cfg.tol_gap:
                break
            # Armijo backtracking with step growth on acceptance
            accepted = False
            while step > 1e-18:
                V_new = _retract(V, xi, step)
                theta_new = theta - step * gtheta if gtheta is not None else theta
                w_new = (np.exp(theta_new - theta_new.max())
                         if gtheta is not None else w)
                if gtheta is not None:
                    w_new = w_new / w_new.sum()
                val_new = _objective(V_new, w_new, t, lam)
                if val_new <= val - cfg.armijo_c * step * gnorm2:
                    V, theta, w, val = V_new, theta_new, w_new, val_new
                    step *= 1.8
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        if val < best_val:
            best_V, best_w, best_val = V, w, val
        if best_val <= cfg.tol_gap:
            break

    nodes = [Projector(d, k, v @ v.T) for v in best_V]
    rule = CubatureRule(d, k, t, nodes, best_w,
                        converged=best_val <= cfg.tol_gap)
    certify(rule)
    return rule


# ---------------------------------------------------------------------------
# probabilistic cubature concentration

@dataclass
class ConcentrationReport:
    n: int
    trials: int
    t: int
    empirical_mean_gap: float
    predicted_mean_gap: float
    tau: float
    psi: float
    r: float
    bound: float
    empirical_exceed_fraction: float


def psi_tau(n: int, tau: float, k: int, d: int, t: int) -> float:
    ratio = lambda_t(k, d, t) / k**t
    return (tau**2 / 2.0) / ((1.0 - ratio) + tau / (3.0 * math.sqrt(n)))


def r_tau(n: int, tau: float, k: int, d: int, t: int) -> float:
    ratio = lambda_t(k, d, t) / k**t
    log_term = math.log(1.0 + tau / (math.sqrt(n) * (1.0 - ratio)))
    return 1.0 + 6.0 / (n * tau**2 * log_term**2)


def concentration_experiment(n: int, k: int, d: int, t: int, tau: float,
                             trials: int, rng=0) -> ConcentrationReport:
    """Empirical check of the Bernstein-type tail bound on the random gap."""
    if tau <= 0:
        raise DimensionMismatch("tau must be positive")
    if trials < 100:
        raise DimensionMismatch("need at least 100 trials")
    gen = as_generator(rng)
    lam = lambda_t(k, d, t)
    gaps = np.empty(trials)
    w = np.full(n, 1.0 / n)
    for i in range(trials):
        V = haar_frame_batch(d, k, n, gen)
        P = _frames_to_projectors(V)
        gaps[i] = w @ (_gram(P)**t) @ w - lam
    predicted = (k**t - lam) / n
    threshold = tau**2 * k**t / n
    exceed = float(np.mean(gaps - predicted >= threshold))
    psi = psi_tau(n, tau, k, d, t)
    r = r_tau(n, tau, k, d, t)
    bound = 4.0 * math.exp(-psi) * r
    return ConcentrationReport(n=n, trials=trials, t=t,
                               empirical_mean_gap=float(np.mean(gaps)),
                               predicted_mean_gap=predicted,
                               tau=tau, psi=psi, r=r, bound=bound,
                               empirical_exceed_fraction=exceed)
