"""Edge weights and shortest-path bias matrices.

A bias matrix ``B`` is a ``|V| x |V|`` array with ``B[i, c]`` the weighted
shortest-path distance from node ``i`` to destination ``c``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .topology import ConnectivityGraph

FAMILIES = ("hop", "inv_duty", "inv_rate", "combined")
SCALINGS = ("none", "min_to_avg_rate")


@dataclass(frozen=True)
class EdgeWeightConfig:
    family: str = "hop"
    scaling: str = "none"
    multiplier: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown edge weight family {self.family!r}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"unknown scaling {self.scaling!r}")
        if self.multiplier <= 0:
            raise ValueError("multiplier must be positive")

    @property
    def needs_duty(self) -> bool:
        return self.family in ("inv_duty", "combined")


class DegenerateDutyCycleError(ValueError):
    pass


def edge_weights(x, r, rbar: float, cfg: EdgeWeightConfig) -> np.ndarray:
    """Per-link weights for one of the four families, optionally rescaled so
    that the smallest weight equals ``multiplier * rbar``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("link rates must be positive")
    if cfg.needs_duty:
        x = np.asarray(x, dtype=float)
        if x.shape != r.shape:
            raise ValueError("duty cycles and rates must have one entry per link")
        if np.any(x <= 0):
            raise DegenerateDutyCycleError("zero predicted duty cycle")
        if np.any(x > 1):
            raise ValueError("duty cycles must lie in (0, 1]")
    if cfg.family == "hop":
        delta = np.ones_like(r)
    elif cfg.family == "inv_duty":
        delta = 1.0 / x
    elif cfg.family == "inv_rate":
        delta = 1.0 / r
    else:
        delta = rbar / (x * r)
    if cfg.scaling == "min_to_avg_rate" and len(delta):
        delta = delta * (cfg.multiplier * rbar / delta.min())
    return delta


def _arcs(g: ConnectivityGraph, weights):
    w = np.asarray(weights, dtype=float)
    a, b = g.links[:, 0], g.links[:, 1]
    return np.concatenate([a, b]), np.concatenate([b, a]), np.concatenate([w, w])


def bellman_ford_rounds(g: ConnectivityGraph, weights, B0=None, max_rounds=None):
    """Synchronous Bellman-Ford for all destinations at once.

    Each round every node takes ``min(own, neighbour + weight)``.  Returns the
    distance matrix and the number of rounds that changed something.
    """
    n = g.num_nodes
    src, dst, w = _arcs(g, weights)
    if B0 is None:
        B = np.full((n, n), np.inf)
        np.fill_diagonal(B, 0.0)
    else:
        B = np.array(B0, dtype=float)
    limit = n if max_rounds is None else max_rounds
    rounds = 0
    for _ in range(limit):
        cand = B[dst] + w[:, None]
        new = B.copy()
        np.minimum.at(new, src, cand)
        if np.array_equal(new, B):
            break
        B = new
        rounds += 1
    return B, rounds


def apsp_bias(g: ConnectivityGraph, weights=None) -> np.ndarray:
    weights = g.link_weights if weights is None else weights
    if weights is None:
        raise ValueError("graph carries no link weights")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("link weights must be positive")
    B, rounds = bellman_ford_rounds(g, weights)
    if rounds > max(g.num_nodes - 1, 0):
        raise RuntimeError(f"Bellman-Ford took {rounds} rounds on {g.num_nodes} nodes")
    if not np.all(np.isfinite(B)):
        raise ValueError("graph is disconnected")
    return B


def neighbor_bias_update(i: int, c: int, neighbor_biases, neighbor_weights) -> float:
    """Recompute one node's bias towards ``c`` from its neighbours."""
    if i == c:
        return 0.0
    nb = np.asarray(neighbor_biases, dtype=float)
    nw = np.asarray(neighbor_weights, dtype=float)
    if nb.size == 0:
        raise ValueError("node has no neighbours")
    return float(np.min(nb + nw))


def neighbor_update_rows(B: np.ndarray, g: ConnectivityGraph, weights, nodes) -> np.ndarray:
    """Apply the neighbour rule synchronously to ``nodes`` (all columns)."""
    new = B.copy()
    w = np.asarray(weights, dtype=float)
    for i in nodes:
        inc = g.incident_links[i]
        if not inc:
            continue
        inc = np.asarray(inc)
        ends = g.links[inc]
        nbrs = np.where(ends[:, 0] == i, ends[:, 1], ends[:, 0])
        new[i] = np.min(B[nbrs] + w[inc][:, None], axis=0)
        new[i, i] = 0.0
    return new


def neighbor_fixpoint(g: ConnectivityGraph, weights, B0=None, max_rounds: int = 10_000):
    """Iterate the neighbour rule on every node until nothing changes."""
    n = g.num_nodes
    if B0 is None:
        B = np.full((n, n), np.inf)
        np.fill_diagonal(B, 0.0)
    else:
        B = np.array(B0, dtype=float)
    nodes = range(n)
    for k in range(max_rounds):
        new = neighbor_update_rows(B, g, weights, nodes)
        if np.array_equal(new, B):
            return B, k
        B = new
    raise RuntimeError("neighbour updates did not converge")


def next_hops(B: np.ndarray, g: ConnectivityGraph, weights) -> np.ndarray:
    """``H[i, c]``: neighbour minimising ``weight + B[j, c]`` (lowest id on ties)."""
    n = g.num_nodes
    w = np.asarray(weights, dtype=float)
    H = np.full((n, n), -1, dtype=np.int64)
    for i in range(n):
        nbrs = np.asarray(g.neighbors[i])
        if nbrs.size == 0:
            continue
        wi = np.array([w[g.link_index[(min(i, j), max(i, j))]] for j in nbrs])
        cost = B[nbrs] + wi[:, None]
        best = cost.min(axis=0)
        for c in range(n):
            if c == i:
                continue
            ties = nbrs[np.isclose(cost[:, c], best[c], rtol=1e-12, atol=0)]
            H[i, c] = ties.min()
    return H


def cflp_reversal_check(delta: float, rbar: float, q: float) -> bool:
    """True when, after the last ``q`` packets cross a link of weight
    ``delta``, the backpressure on that link points backwards."""
    if not 0 < q <= rbar:
        raise ValueError("q must satisfy 0 < q <= rbar")
    return (delta - q) < 0


def save_bias_csv(B: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"c{c}" for c in range(B.shape[1])])
        for i, row in enumerate(B):
            w.writerow([i] + [repr(float(v)) for v in row])


def load_bias_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(v) for v in r[1:]] for r in rows])
