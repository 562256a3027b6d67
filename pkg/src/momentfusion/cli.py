"""Command-line interface: build/verify cubature rules, project, fuse, simulate.

Exit codes: 0 success, 1 usage or validation failure, 2 numerical
non-convergence (artifacts are still written, flagged as unconverged).
Every command echoes its resolved configuration next to its outputs so
runs are reproducible from the artifacts alone.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import jsonio
from .cubature import (CubatureRule, OptimizerConfig, certify,
                       minimize_potential, probabilistic_rule, solve_weights)
from .empirical import (DiscreteDistribution, SampleBatch, estimate_moments,
                        mc_trace_moment, project_moments, sample, true_moments)
from .errors import MomentFusionError
from .grassmann import (MeasurementEnsemble, as_generator, e_matrix,
                        haar_frame_batch, haar_sample)
from .moments import MomentTensor, ProjectedMomentSet, multi_indices
from .reconstruct import (polarize, reconstruct_general, reconstruct_rank1,
                          reconstruct_sphere, spanning_family,
                          spanning_reconstruct)
from .trace_moments import lambda_t, mu_t

DEFAULT_TOL = 1e-8


def worker_count() -> int:
    """Worker cap for internally parallel commands (MF_THREADS env var)."""
    cap = os.environ.get("MF_THREADS")
    n = os.cpu_count() or 1
    if cap is not None:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"MF_THREADS must be an integer, got {cap!r}")
    return n


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract reserves 2 for
    # non-convergence, so remap usage problems to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _write_with_config(out_path: str, payload: dict, config: dict):
    jsonio.write_json(out_path, payload)
    jsonio.write_json(out_path + ".config.json", config)


def _load_rule(path: str) -> CubatureRule:
    try:
        return CubatureRule.from_json_dict(jsonio.read_json(path))
    except (OSError, ValueError, KeyError, TypeError, MomentFusionError) as exc:
        raise UsageError(f"cannot read cubature rule from {path}: {exc}")


def _load_ensemble(path: str) -> MeasurementEnsemble:
    try:
        return MeasurementEnsemble.from_json_dict(jsonio.read_json(path))
    except (OSError, ValueError, KeyError, TypeError, MomentFusionError) as exc:
        raise UsageError(f"cannot read measurement ensemble from {path}: {exc}")


def _load_source(args):
    """A DiscreteDistribution (--dist JSON) or SampleBatch (--samples CSV)."""
    if getattr(args, "dist", None):
        try:
            return DiscreteDistribution.from_json_dict(jsonio.read_json(args.dist))
        except (OSError, ValueError, KeyError, MomentFusionError) as exc:
            raise UsageError(f"cannot read distribution from {args.dist}: {exc}")
    if getattr(args, "samples", None):
        try:
            data = np.genfromtxt(args.samples, delimiter=",", names=True)
            data = np.column_stack([data[name] for name in data.dtype.names])
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read samples from {args.samples}: {exc}")
        return SampleBatch(data.shape[1], data.shape[0], data,
                           provenance=args.samples)
    raise UsageError("one of --dist or --samples is required")


# ---------------------------------------------------------------------------
# build-cubature

def cmd_build_cubature(args) -> int:
    if not (1 <= args.k < args.d):
        raise UsageError(f"need 1 <= k < d, got k={args.k}, d={args.d}")
    if args.t < 1:
        raise UsageError("need t >= 1")
    if args.n < 1:
        raise UsageError("need n >= 1")
    gen = as_generator(args.seed)
    if args.method == "minimize":
        workers = min(worker_count(), args.restarts)
        per = [args.restarts // workers + (1 if i < args.restarts % workers else 0)
               for i in range(workers)]
        seqs = np.random.SeedSequence(args.seed).spawn(workers)
        jobs = [(m, np.random.Generator(np.random.Philox(seq)))
                for m, seq in zip(per, seqs) if m > 0]

        def run(job):
            m, rng = job
            cfg = OptimizerConfig(max_iters=args.max_iters, restarts=m,
                                  tol_gap=min(args.tol, 1e-11))
            return minimize_potential(args.n, args.k, args.d, args.t, cfg, rng=rng)

        if len(jobs) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
                rules = list(pool.map(run, jobs))
        else:
            rules = [run(jobs[0])]
        rule = min(rules, key=lambda r: r.gap)
    elif args.method == "solve":
        frames = haar_frame_batch(args.d, args.k, args.n, gen)
        nodes = np.einsum("nik,njk->nij", frames, frames)
        rule = solve_weights(nodes, args.t, rng=gen, return_rule=True)
    else:
        rule = probabilistic_rule(args.n, args.k, args.d, gen, t=args.t)
    config = {"command": "build-cubature", "d": args.d, "k": args.k,
              "t": args.t, "n": args.n, "method": args.method,
              "seed": args.seed, "tol": args.tol, "restarts": args.restarts,
              "max_iters": args.max_iters, "out": args.out}
    _write_with_config(args.out, rule.to_json_dict(), config)
    print(f"wrote {args.out}: n={rule.n} gap={rule.gap:.6e} "
          f"epsilon={rule.epsilon:.6e}")
    if args.method == "probabilistic":
        return 0
    if rule.gap <= args.tol:
        return 0
    print(f"did not reach gap <= {args.tol:g}; best rule written", file=sys.stderr)
    return 2


# ---------------------------------------------------------------------------
# verify-cubature

def cmd_verify_cubature(args) -> int:
    rule = _load_rule(args.rule)
    degrees = range(1, rule.t + 1) if args.certify_all_below else [rule.t]
    rows = []
    for t in degrees:
        sub = CubatureRule(rule.d, rule.k, t, rule.nodes, rule.weights)
        gap = certify(sub)
        rows.append({"d": rule.d, "k": rule.k, "t": t, "n": rule.n,
                     "gap": gap, "epsilon": math.sqrt(max(gap, 0.0))})
    if args.json:
        print(jsonio.dumps({"rule": args.rule, "report": rows}))
    else:
        for r in rows:
            print(f"d={r['d']} k={r['k']} t={r['t']} n={r['n']} "
                  f"gap={r['gap']:.6e} epsilon={r['epsilon']:.6e}")
    return 0


# ---------------------------------------------------------------------------
# project

def cmd_project(args) -> int:
    source = _load_source(args)
    if args.rule:
        onto = _load_rule(args.rule)
    elif args.ensemble:
        onto = _load_ensemble(args.ensemble)
    else:
        raise UsageError("one of --rule or --ensemble is required")
    try:
        projected = project_moments(source, onto, args.p,
                                    convention=args.convention)
    except MomentFusionError as exc:
        raise UsageError(str(exc))
    config = {"command": "project", "dist": args.dist, "samples": args.samples,
              "rule": args.rule, "ensemble": args.ensemble, "p": args.p,
              "convention": args.convention, "out": args.out}
    _write_with_config(args.out, projected.to_json_dict(), config)
    print(f"wrote {args.out}: {len(projected)} tensors to degree {args.p}")
    return 0


# ---------------------------------------------------------------------------
# fuse

def _sphere_support_check(rule: CubatureRule, projected: ProjectedMomentSet):
    """On the sphere, sum_j w_j sum_m E (P_j X)_m^2 must equal k/d."""
    if projected.p < 2:
        return
    total = 0.0
    for w, tensor in zip(rule.weights, projected.tensors):
        for m in range(rule.d):
            s = tuple(2 if i == m else 0 for i in range(rule.d))
            total += w * tensor[s]
    if abs(total - rule.k / rule.d) > 1e-6:
        raise UsageError(
            "sphere mode rejected: projected second moments are inconsistent "
            f"with unit-norm support (got {total:.6g}, want {rule.k / rule.d:.6g})")


def cmd_fuse(args) -> int:
    try:
        projected = ProjectedMomentSet.from_json_dict(jsonio.read_json(args.projected))
    except (OSError, ValueError, KeyError, MomentFusionError) as exc:
        raise UsageError(f"cannot read projected moments from {args.projected}: {exc}")
    try:
        if args.mode == "spanning":
            ensemble = _load_ensemble(args.rule)
            tensor = spanning_reconstruct(ensemble, projected, args.t)
        else:
            rule = _load_rule(args.rule)
            if args.mode == "sphere":
                _sphere_support_check(rule, projected)
                tensor = reconstruct_sphere(rule, projected, args.t, tol=args.tol)
            elif args.mode == "general":
                tensor = reconstruct_general(rule, projected, args.t, tol=args.tol)
            else:
                tensor = reconstruct_rank1(rule, projected, args.t, tol=args.tol)
    except MomentFusionError as exc:
        raise UsageError(str(exc))
    config = {"command": "fuse", "projected": args.projected, "rule": args.rule,
              "t": args.t, "mode": args.mode, "tol": args.tol, "out": args.out}
    _write_with_config(args.out, tensor.to_json_dict(), config)
    flag = " (approximate)" if tensor.approximate else ""
    print(f"wrote {args.out}: degree-{args.t} moments{flag}")
    return 0


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    if not (1 <= args.k < args.d):
        raise UsageError(f"need 1 <= k < d, got k={args.k}, d={args.d}")
    gen = as_generator(args.seed)

    # reference law: a file, or a named law backed by a large reference batch
    dist = None
    if args.law.endswith(".json"):
        try:
            dist = DiscreteDistribution.from_json_dict(jsonio.read_json(args.law))
        except (OSError, ValueError, KeyError, MomentFusionError) as exc:
            raise UsageError(f"cannot read distribution from {args.law}: {exc}")
        if dist.d != args.d:
            raise UsageError("distribution dimension does not match --d")

    frames = haar_frame_batch(args.d, args.k, args.n_rule, gen)
    nodes = np.einsum("nik,njk->nij", frames, frames)
    rule = solve_weights(nodes, args.t, rng=gen, return_rule=True)

    if args.n_samples == 0:
        if dist is None:
            raise UsageError("--n-samples 0 (exact path) requires a distribution file")
        projected = project_moments(dist, rule, args.t, convention="PX")
    else:
        batch = sample(dist if dist is not None else args.law,
                       args.n_samples, gen, d=args.d)
        projected = project_moments(batch, rule, args.t, convention="PX")

    sphere = dist.sphere_flag if dist is not None else args.law == "uniform_sphere"
    mode = args.mode or ("rank1" if args.k == 1 and args.t > 3
                         else ("sphere" if sphere else "general"))
    if mode == "sphere":
        fused = reconstruct_sphere(rule, projected, args.t)
    elif mode == "rank1":
        fused = reconstruct_rank1(rule, projected, args.t)
    else:
        fused = reconstruct_general(rule, projected, args.t)

    if dist is not None:
        reference = true_moments(dist, args.t)
        ref_desc = "exact atom moments"
    else:
        ref_batch = sample(args.law, args.n_reference, gen, d=args.d)
        reference = estimate_moments(ref_batch, args.t)
        ref_desc = f"{args.n_reference}-sample estimate"

    per_degree = {}
    for deg in range(1, args.t + 1):
        errs = [abs(fused[s] - reference[s])
                for s in multi_indices(args.d, args.t) if sum(s) == deg]
        per_degree[deg] = max(errs)
    max_err = max(per_degree.values())
    eps = rule.epsilon
    report = {"command": "simulate", "law": args.law, "d": args.d, "k": args.k,
              "t": args.t, "mode": mode, "n_rule": args.n_rule,
              "n_samples": args.n_samples, "seed": args.seed,
              "reference": ref_desc, "rule_gap": rule.gap, "rule_epsilon": eps,
              "max_error": max_err,
              "per_degree_error": {str(k_): v for k_, v in per_degree.items()},
              "error_over_epsilon": max_err / eps if eps > 0 else None}
    if args.out:
        jsonio.write_json(args.out, report)
    print(f"{'degree':>8} {'max error':>14}")
    for deg, err in per_degree.items():
        print(f"{deg:>8} {err:>14.6e}")
    print(f"rule gap {rule.gap:.6e}  epsilon {eps:.6e}  max error {max_err:.6e}")
    if eps > 0:
        print(f"error/epsilon {max_err / eps:.3f}")
    print(jsonio.dumps(report))
    return 0


# ---------------------------------------------------------------------------
# oracle

def cmd_oracle(args) -> int:
    gen = as_generator(args.seed)
    if args.what == "mu":
        if not (1 <= args.k < args.d):
            raise UsageError(f"need 1 <= k < d, got k={args.k}, d={args.d}")
        x = gen.standard_normal(args.d)
        y = gen.standard_normal(args.d)
        M = e_matrix(x, y)
        closed = mu_t(M, args.k, args.t, d=args.d)
        est, se = mc_trace_moment([M] * args.t, args.k, args.d, args.n, gen)
        z = abs(est - closed) / se if se > 0 else 0.0
        print(f"mu_t closed={closed:.10g} mc={est:.10g} se={se:.3g} z={z:.2f}")
        return 0 if z <= 3.0 else 1
    if args.what == "lambda":
        # lambda_t equals E <P, P'>^t over an independent Haar pair
        lam = lambda_t(args.k, args.d, args.t)
        V1 = haar_frame_batch(args.d, args.k, args.n, gen)
        V2 = haar_frame_batch(args.d, args.k, args.n, gen)
        P1 = np.einsum("nik,njk->nij", V1, V1)
        P2 = np.einsum("nik,njk->nij", V2, V2)
        vals = np.einsum("nij,nij->n", P1, P2)**args.t
        est = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / np.sqrt(args.n))
        z = abs(est - lam) / se if se > 0 else 0.0
        print(f"lambda_t closed={lam:.10g} mc={est:.10g} se={se:.3g} z={z:.2f}")
        return 0 if z <= 3.0 else 1
    # identity: polarization expansion and the projector pairing identity
    x = gen.standard_normal(args.d)
    alpha = [0] * args.d
    for _ in range(args.t):
        alpha[gen.integers(args.d)] += 1
    target = float(np.prod(x**np.asarray(alpha)))
    expanded = sum(term.coefficient * float(np.dot(x, term.direction))**args.t
                   for term in polarize(alpha))
    err1 = abs(expanded - target)
    P = haar_sample(args.d, args.k, gen)
    y = gen.standard_normal(args.d)
    err2 = abs(float(np.sum(P.entries * e_matrix(x, y))) - float(x @ P.entries @ y))
    print(f"polarization error={err1:.3e} pairing error={err2:.3e}")
    return 0 if err1 <= 1e-9 * max(1.0, abs(target)) and err2 <= 1e-12 else 1


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="mfuse",
                     description="Moment reconstruction from low-dimensional "
                                 "projections via Grassmannian cubature.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-cubature", help="construct and certify a rule")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=["minimize", "solve", "probabilistic"],
                   required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=4000)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_build_cubature)

    p = sub.add_parser("verify-cubature", help="recompute a rule's gap")
    p.add_argument("rule")
    p.add_argument("--certify-all-below", "--t-all-below", action="store_true",
                   dest="certify_all_below",
                   help="report the gap at every degree below the rule's")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify_cubature)

    p = sub.add_parser("project", help="projected moments of a law or batch")
    p.add_argument("--dist", help="DiscreteDistribution JSON")
    p.add_argument("--samples", help="sample CSV with header x1,...,xd")
    p.add_argument("--rule", help="CubatureRule JSON")
    p.add_argument("--ensemble", help="MeasurementEnsemble JSON")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--convention", choices=["PX", "QX"], default="PX")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fuse", help="reconstruct moments from projected ones")
    p.add_argument("--projected", required=True)
    p.add_argument("--rule", required=True,
                   help="CubatureRule JSON (MeasurementEnsemble for spanning)")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--mode", choices=["sphere", "general", "rank1", "spanning"],
                   required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("simulate", help="sample, project, fuse, and compare")
    p.add_argument("--law", required=True,
                   help="uniform_sphere | gaussian | dirichlet | path to JSON")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--n-rule", type=int, required=True)
    p.add_argument("--n-samples", type=int, required=True,
                   help="0 uses the exact-moment path (distribution files only)")
    p.add_argument("--n-reference", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["sphere", "general", "rank1"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="Monte Carlo cross-checks of closed forms")
    p.add_argument("--what", choices=["mu", "lambda", "identity"], required=True)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--n", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MomentFusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
