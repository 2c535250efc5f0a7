"""Self-contained correctness checks used by ``spbp verify`` and the tests.

Each check returns a report dict with at least ``passed`` and ``detail``.
"""
from __future__ import annotations

import itertools
import time
from fractions import Fraction

import numpy as np

from ..bias import apsp_bias, cflp_reversal_check, neighbor_fixpoint
from ..gnn import GcnnModel, gcnn_forward, gcnn_forward_local, gcnn_loss_and_grad
from ..scheduling import is_independent, lgs_schedule, mwis_bruteforce
from ..topology import ConflictGraph, build_conflict_graph, generate_network, graph_from_positions


def _ineq_sides(q, o, b, p):
    lhs = (np.maximum(q - o, b) + p) ** 2
    rhs = q * q + o * o + p * p + b * b + 2 * b * p + 2 * q * (p - o)
    return lhs, rhs


def _exact_holds(q, o, b, p) -> bool:
    q, o, b, p = (Fraction(float(v)) for v in (q, o, b, p))
    lhs = (max(q - o, b) + p) ** 2
    return lhs <= q * q + o * o + p * p + b * b + 2 * b * p + 2 * q * (p - o)


def verify_appendix_inequality(trials: int = 1_000_000, rng_seed=0, high: float = 100.0) -> dict:
    """``(max(q-o, b) + p)^2 <= q^2+o^2+p^2+b^2+2bp+2q(p-o)`` for nonnegative
    quadruples.  Float comparisons that fail are re-evaluated exactly, so
    rounding cannot produce a false counterexample."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    start = time.perf_counter()
    rng = np.random.default_rng(rng_seed)
    samples = rng.uniform(0.0, high, size=(trials, 4))
    corners = np.array(list(itertools.product((0.0, 1.0, high), repeat=4)))
    ties = np.array([[v, v, b, p] for v in (0.0, 3.0, high) for b in (0.0, high) for p in (0.0, 2.0)])
    X = np.vstack([corners, ties, samples])
    lhs, rhs = _ineq_sides(*X.T)
    suspects = np.flatnonzero(lhs > rhs)
    violations = [tuple(map(float, X[i])) for i in suspects if not _exact_holds(*X[i])]
    elapsed = time.perf_counter() - start
    return {"passed": not violations, "trials": int(len(X)), "violations": violations[:10],
            "num_violations": len(violations), "rounding_rechecks": int(len(suspects)),
            "elapsed": elapsed,
            "detail": f"{len(X)} quadruples, {len(violations)} violations, {elapsed:.2f}s"}


def verify_reversal_boundary(rbar: float = 26.0, steps: int = 2600) -> dict:
    """Sweep ``q`` over ``(0, rbar]`` and several ``delta``; the check must
    report no reversal exactly when ``delta >= q``."""
    qs = [rbar * k / steps for k in range(1, steps + 1)]
    deltas = sorted({rbar, 0.5 * rbar, 1.5 * rbar, 1.0, rbar - 1e-9, *qs[::100]})
    bad = [(d, q) for d in deltas for q in qs if cflp_reversal_check(d, rbar, q) != (d < q)]
    never = not any(cflp_reversal_check(rbar, rbar, q) for q in qs)
    return {"passed": not bad and never, "mismatches": bad[:10],
            "detail": f"{len(deltas) * len(qs)} (delta, q) pairs, {len(bad)} mismatches"}


def random_conflict_graph(n: int, rng, p: float = 0.35) -> ConflictGraph:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return ConflictGraph(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def verify_gradients(graphs: int = 3, rng_seed=0, h: float = 1e-6, tol: float = 1e-4,
                     weight_decay: float = 1e-3) -> dict:
    """Analytic gradients against central differences on every parameter."""
    rng = np.random.default_rng(rng_seed)
    start = time.perf_counter()
    worst = 0.0
    for k in range(graphs):
        cg = random_conflict_graph(int(rng.integers(6, 11)), rng)
        model = GcnnModel.init(rng_seed=int(rng.integers(2**31)))
        s = rng.random((20, cg.num_vertices)) < 0.4
        _, grads, _ = gcnn_loss_and_grad(model, cg, s, weight_decay=weight_decay)
        for l, (t0, t1) in enumerate(model.layers):
            for which, P in ((0, t0), (1, t1)):
                G = grads[l][which]
                for idx in np.ndindex(P.shape):
                    old = P[idx]
                    P[idx] = old + h
                    up = gcnn_loss_and_grad(model, cg, s, weight_decay=weight_decay)[0]
                    P[idx] = old - h
                    dn = gcnn_loss_and_grad(model, cg, s, weight_decay=weight_decay)[0]
                    P[idx] = old
                    num = (up - dn) / (2 * h)
                    err = abs(num - G[idx]) / max(abs(num), abs(G[idx]), 1e-6)
                    worst = max(worst, err)
    elapsed = time.perf_counter() - start
    return {"passed": worst < tol, "max_rel_error": worst, "elapsed": elapsed,
            "detail": f"max relative error {worst:.2e} over {graphs} graphs, {elapsed:.1f}s"}


def verify_local_forward(instances: int = 20, rng_seed=0, max_vertices: int = 60, tol: float = 1e-9) -> dict:
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(instances):
        cg = random_conflict_graph(int(rng.integers(1, max_vertices + 1)), rng, p=float(rng.uniform(0, 0.3)))
        model = GcnnModel.init(rng_seed=int(rng.integers(2**31)))
        diff = np.abs(gcnn_forward(model, cg).output - gcnn_forward_local(model, cg).output).max()
        worst = max(worst, float(diff))
    return {"passed": worst < tol, "max_abs_diff": worst,
            "detail": f"max abs difference {worst:.2e} over {instances} instances"}


def verify_scheduler(instances: int = 50, rng_seed=0, max_links: int = 12) -> dict:
    """LGS against exact MWIS; equal on edgeless conflict graphs."""
    rng = np.random.default_rng(rng_seed)
    problems = []
    edgeless_seen = 0
    for k in range(instances):
        m = int(rng.integers(1, max_links + 1))
        edgeless = k % 5 == 0
        cg = random_conflict_graph(m, rng, p=0.0 if edgeless else float(rng.uniform(0.1, 0.6)))
        u = np.where(rng.random(m) < 0.2, 0.0, rng.integers(0, 50, m) * rng.random(m))
        lgs = lgs_schedule(u, cg)
        opt = mwis_bruteforce(u, cg)
        if not is_independent(lgs.active, cg):
            problems.append((k, "LGS schedule not independent"))
        if lgs.value > opt.value:
            problems.append((k, f"LGS {lgs.value} above optimum {opt.value}"))
        if len(cg.conflicts) == 0:
            edgeless_seen += 1
            if lgs.value != opt.value:
                problems.append((k, "edgeless graph but LGS is not optimal"))
    return {"passed": not problems, "problems": problems[:10], "edgeless": edgeless_seen,
            "detail": f"{instances} instances ({edgeless_seen} edgeless), {len(problems)} problems"}


def brute_force_distances(n: int, links, weights) -> np.ndarray:
    """Shortest simple-path lengths by depth-first enumeration of simple
    paths.  Branches strictly longer than the best known distance are cut;
    with positive weights this never discards a shortest path."""
    adj = [[] for _ in range(n)]
    for (i, j), w in zip(links, weights):
        adj[i].append((j, w))
        adj[j].append((i, w))
    D = np.full((n, n), np.inf)

    def dfs(src, u, dist, seen):
        if dist > D[src, u]:
            return
        D[src, u] = dist
        for v, w in adj[u]:
            if not seen >> v & 1:
                dfs(src, v, dist + w, seen | 1 << v)

    for s in range(n):
        dfs(s, s, 0.0, 1 << s)
    return D


def verify_shortest_paths(graphs: int = 20, rng_seed=0, n: int = 10) -> dict:
    rng = np.random.default_rng(rng_seed)
    problems = []
    for k in range(graphs):
        while True:
            g = graph_from_positions(rng.uniform(0, 2.2, size=(n, 2)))
            if g.is_connected():
                break
        # quarter-integer weights keep every path sum exact in floating point
        w = rng.integers(1, 160, g.num_links) / 4.0
        B = apsp_bias(g, w)
        D = brute_force_distances(n, g.links.tolist(), w.tolist())
        if not np.array_equal(B, D):
            problems.append((k, "APSP differs from path enumeration"))
        F, _ = neighbor_fixpoint(g, w)
        if not np.array_equal(F, B):
            problems.append((k, "neighbour fixpoint differs from APSP"))
    return {"passed": not problems, "problems": problems,
            "detail": f"{graphs} graphs of {n} nodes, {len(problems)} problems"}


CHECKS = {
    "appendix_inequality": verify_appendix_inequality,
    "reversal_boundary": verify_reversal_boundary,
    "gcnn_gradients": verify_gradients,
    "gcnn_local_forward": verify_local_forward,
    "scheduler_oracle": verify_scheduler,
    "shortest_paths": verify_shortest_paths,
}


def run_checks(names=None, rng_seed=0) -> dict[str, dict]:
    names = list(CHECKS) if names is None else names
    out = {}
    for name in names:
        fn = CHECKS[name]
        out[name] = fn(rng_seed=rng_seed) if "rng_seed" in fn.__code__.co_varnames else fn()
    return out


def conflict_degree_calibration(radius: float, graphs: int = 10, num_nodes: int = 100, rng_seed=0) -> float:
    """Mean conflict degree of unit-disk conflict graphs over random networks."""
    ss = np.random.SeedSequence(rng_seed)
    degs = []
    for child in ss.spawn(graphs):
        g = generate_network(num_nodes, rng_seed=child)
        degs.append(build_conflict_graph(g, "unit_disk", radius).mean_degree)
    return float(np.mean(degs))
