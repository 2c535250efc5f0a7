"""Random wireless networks, conflict graphs and graph operators."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

DEFAULT_DENSITY = 8.0 / math.pi
LINK_RADIUS = 1.0
# Calibrated so that |V|=100 networks at density 8/pi have mean conflict
# degree ~34.6 over 400 draws (see scripts/calibrate_radius.py).
TEST_INTERFERENCE_RADIUS = 0.567
TRAINING_RADIUS_MAX = 0.8


class DisconnectedNetworkError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ConnectivityGraph:
    """Node positions plus the undirected links between them.

    ``links`` is an ``(m, 2)`` integer array with ``links[e, 0] < links[e, 1]``,
    sorted lexicographically.  Per-link arrays (rates, weights) are indexed
    by the same link id.
    """

    positions: np.ndarray
    links: np.ndarray
    long_term_rates: np.ndarray | None = None
    link_weights: np.ndarray | None = None

    def __post_init__(self):
        links = np.asarray(self.links, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        if np.any(links[:, 0] >= links[:, 1]):
            raise ValueError("links must be ordered pairs (i, j) with i < j")
        if self.long_term_rates is not None:
            r = np.asarray(self.long_term_rates, dtype=float)
            if r.shape != (len(links),) or np.any(r <= 0):
                raise ValueError("long_term_rates must be positive, one per link")
            object.__setattr__(self, "long_term_rates", r)
        if self.link_weights is not None:
            w = np.asarray(self.link_weights, dtype=float)
            if w.shape != (len(links),) or np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValueError("link_weights must be finite and positive, one per link")
            object.__setattr__(self, "link_weights", w)

    @property
    def num_nodes(self) -> int:
        return len(self.positions)

    @property
    def num_links(self) -> int:
        return len(self.links)

    def with_rates(self, rates) -> "ConnectivityGraph":
        return replace(self, long_term_rates=np.asarray(rates, dtype=float))

    def with_weights(self, weights) -> "ConnectivityGraph":
        return replace(self, link_weights=np.asarray(weights, dtype=float))

    @cached_property
    def link_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): e for e, (i, j) in enumerate(self.links)}

    @cached_property
    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for i, j in self.links:
            nbrs[i].append(int(j))
            nbrs[j].append(int(i))
        for lst in nbrs:
            lst.sort()
        return nbrs

    @cached_property
    def incident_links(self) -> list[list[int]]:
        inc: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for e, (i, j) in enumerate(self.links):
            inc[i].append(e)
            inc[j].append(e)
        return inc

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.links.ravel(), minlength=self.num_nodes)

    def hop_distances(self, source: int) -> np.ndarray:
        dist = np.full(self.num_nodes, -1, dtype=np.int64)
        dist[source] = 0
        frontier = deque([source])
        while frontier:
            u = frontier.popleft()
            for v in self.neighbors[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    frontier.append(v)
        return dist

    def is_connected(self) -> bool:
        if self.num_nodes == 0:
            return False
        return bool(np.all(self.hop_distances(0) >= 0))

    def diameter(self) -> int:
        """Unweighted hop diameter."""
        return int(max(self.hop_distances(s).max() for s in range(self.num_nodes)))

    def to_dict(self) -> dict:
        d = {
            "positions": self.positions.tolist(),
            "links": self.links.tolist(),
        }
        if self.long_term_rates is not None:
            d["long_term_rates"] = self.long_term_rates.tolist()
        if self.link_weights is not None:
            d["link_weights"] = self.link_weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConnectivityGraph":
        return cls(
            positions=np.asarray(d["positions"], dtype=float).reshape(-1, 2),
            links=np.asarray(d["links"], dtype=np.int64).reshape(-1, 2),
            long_term_rates=d.get("long_term_rates"),
            link_weights=d.get("link_weights"),
        )


@dataclass(frozen=True, eq=False)
class ConflictGraph:
    """Conflict relation between the links of a connectivity graph.

    Vertex ``e`` is link ``e`` of the parent graph.  ``conflicts`` holds
    unordered pairs ``(e1, e2)`` with ``e1 < e2``.
    """

    num_vertices: int
    conflicts: np.ndarray
    model: str = "interface"
    radius: float | None = None
    _csr: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.conflicts, dtype=np.int64).reshape(-1, 2)
        if np.any(c[:, 0] >= c[:, 1]):
            raise ValueError("conflict pairs must satisfy e1 < e2")
        object.__setattr__(self, "conflicts", c)
        n = self.num_vertices
        rows = np.concatenate([c[:, 0], c[:, 1]])
        cols = np.concatenate([c[:, 1], c[:, 0]])
        adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        adj.sum_duplicates()
        adj.sort_indices()
        object.__setattr__(self, "_csr", adj)

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._csr

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self._csr.indptr)

    def neighbors(self, e: int) -> np.ndarray:
        return self._csr.indices[self._csr.indptr[e]:self._csr.indptr[e + 1]]

    @property
    def mean_degree(self) -> float:
        return float(self.degrees.mean()) if self.num_vertices else 0.0

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return normalized_laplacian(self)

    def permuted(self, perm) -> "ConflictGraph":
        """Relabel vertex ``e`` as ``perm[e]``."""
        perm = np.asarray(perm)
        c = perm[self.conflicts]
        c.sort(axis=1)
        return ConflictGraph(self.num_vertices, c, self.model, self.radius)

    def to_dict(self) -> dict:
        return {
            "num_vertices": self.num_vertices,
            "conflicts": self.conflicts.tolist(),
            "model": self.model,
            "radius": self.radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConflictGraph":
        return cls(d["num_vertices"], np.asarray(d["conflicts"], dtype=np.int64).reshape(-1, 2),
                   d.get("model", "interface"), d.get("radius"))


def _links_within(positions: np.ndarray, radius: float) -> np.ndarray:
    pairs = cKDTree(positions).query_pairs(r=radius, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order].astype(np.int64)


def graph_from_positions(positions, link_radius: float = LINK_RADIUS) -> ConnectivityGraph:
    positions = np.asarray(positions, dtype=float)
    return ConnectivityGraph(positions, _links_within(positions, link_radius))


def generate_network(num_nodes: int, density: float = DEFAULT_DENSITY, rng_seed=None,
                     max_retries: int = 100, link_radius: float = LINK_RADIUS) -> ConnectivityGraph:
    """Draw uniform points in a square of area ``num_nodes / density`` until connected."""
    if num_nodes < 2:
        raise ValueError("num_nodes must be at least 2")
    if density <= 0:
        raise ValueError("density must be positive")
    rng = np.random.default_rng(rng_seed)
    side = math.sqrt(num_nodes / density)
    for _ in range(max_retries):
        pos = rng.uniform(0.0, side, size=(num_nodes, 2))
        g = graph_from_positions(pos, link_radius)
        if g.is_connected():
            return g
    raise DisconnectedNetworkError(
        f"no connected network of {num_nodes} nodes in {max_retries} draws")


def build_conflict_graph(g: ConnectivityGraph, model: str = "interface",
                         radius: float = TEST_INTERFERENCE_RADIUS) -> ConflictGraph:
    """Links conflict when they share a node or, for ``unit_disk``, when any
    endpoint of one lies within ``radius`` of any endpoint of the other."""
    m = g.num_links
    a, b = g.links[:, 0], g.links[:, 1]
    share = ((a[:, None] == a[None, :]) | (a[:, None] == b[None, :])
             | (b[:, None] == a[None, :]) | (b[:, None] == b[None, :]))
    if model == "interface":
        conf = share
        rad = None
    elif model == "unit_disk":
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        p = g.positions
        dmat = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
        close = ((dmat[np.ix_(a, a)] <= radius) | (dmat[np.ix_(a, b)] <= radius)
                 | (dmat[np.ix_(b, a)] <= radius) | (dmat[np.ix_(b, b)] <= radius))
        conf = share | close
        rad = float(radius)
    else:
        raise ValueError(f"unknown interference model {model!r}")
    iu = np.triu_indices(m, k=1)
    mask = conf[iu]
    pairs = np.stack([iu[0][mask], iu[1][mask]], axis=1)
    return ConflictGraph(m, pairs, model, rad)


def normalized_laplacian(cg: ConflictGraph) -> sp.csr_matrix:
    """``I - D^-1/2 A D^-1/2``; isolated vertices keep a unit diagonal."""
    deg = cg.degrees.astype(float)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    d = sp.diags(inv_sqrt)
    lap = sp.identity(cg.num_vertices, format="csr") - d @ cg.adjacency @ d
    return sp.csr_matrix(lap)


def line_graph_conflict_count(g: ConnectivityGraph) -> int:
    deg = g.degrees
    return int((deg * (deg - 1) // 2).sum())


def save_graphs(path, g: ConnectivityGraph, cg: ConflictGraph | None = None) -> None:
    doc = {"version": 1, "connectivity": g.to_dict()}
    if cg is not None:
        doc["conflict"] = cg.to_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_graphs(path) -> tuple[ConnectivityGraph, ConflictGraph | None]:
    with open(path) as fh:
        doc = json.load(fh)
    g = ConnectivityGraph.from_dict(doc["connectivity"])
    cg = ConflictGraph.from_dict(doc["conflict"]) if "conflict" in doc else None
    return g, cg
