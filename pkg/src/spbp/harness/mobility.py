"""Episodes under random node motion.

Every ``interval`` slots, ``movers`` random nodes take a Gaussian step
(clipped to the deployment square), resampled until the network stays
connected.  On a topology change the conflict graph is rebuilt, duty
cycles are re-inferred and edge weights recomputed.  Biases are then
refreshed either at once (``ideal``) or by the neighbour rule, one local
exchange per slot (``neighbor``), starting at nodes where links were
established or destroyed.
"""
from __future__ import annotations

import math

import numpy as np

from .. import bias as biasmod
from ..routing import EpisodeRecorder, Instance, NetworkState, Scheme, run_slot
from ..topology import (DEFAULT_DENSITY, ConnectivityGraph, build_conflict_graph,
                        graph_from_positions)
from ..traffic import LINK_RATE_RANGE, LINK_RATE_STD, draw_link_rates
from .config import MobilityConfig

MODES = ("ideal", "neighbor")


class LinkState:
    """Current links with their long-term rate, weight-rate and real-time rates."""

    def __init__(self, inst: Instance, rate_std: float = LINK_RATE_STD):
        self.inst = inst
        self.rate_std = rate_std
        self.static_index = {tuple(map(int, l)): e for e, l in enumerate(inst.g.links)}
        emp = inst.rates.empirical_rates
        self.long_term = {l: float(inst.rates.long_term[e]) for l, e in self.static_index.items()}
        self.weight_rate = {l: float(emp[e]) for l, e in self.static_index.items()}
        self.fresh = {}

    def adopt(self, g: ConnectivityGraph, t: int, rng) -> None:
        """Register links of ``g`` unseen so far and pre-draw their rates."""
        new = [tuple(map(int, l)) for l in g.links if tuple(map(int, l)) not in self.long_term]
        if not new:
            return
        r = rng.uniform(*LINK_RATE_RANGE, size=len(new))
        R = draw_link_rates(r, self.inst.T - t, rng, std=self.rate_std)
        for k, l in enumerate(new):
            self.long_term[l] = float(r[k])
            self.weight_rate[l] = float(r[k])
            self.fresh[l] = (t, R[k])

    def rates_at(self, g: ConnectivityGraph, t: int) -> np.ndarray:
        out = np.empty(g.num_links, dtype=np.int64)
        R = self.inst.rates.R
        for e, l in enumerate(map(tuple, g.links.tolist())):
            if l in self.fresh:
                t0, row = self.fresh[l]
                out[e] = row[t - t0]
            else:
                out[e] = R[self.static_index[l], t]
        return out

    def weight_rates(self, g: ConnectivityGraph) -> np.ndarray:
        return np.array([self.weight_rate[tuple(l)] for l in g.links.tolist()])


def move_nodes(positions: np.ndarray, side: float, cfg: MobilityConfig, rng):
    """Displaced positions keeping the network connected, or ``None`` when
    every proposal within the retry budget disconnects it."""
    n = len(positions)
    k = min(cfg.movers, n)
    for _ in range(cfg.max_retries):
        idx = rng.choice(n, size=k, replace=False)
        pos = positions.copy()
        pos[idx] += rng.normal(0.0, cfg.step_std, size=(k, 2))
        np.clip(pos, 0.0, side, out=pos)
        g = graph_from_positions(pos)
        if g.is_connected():
            return g
    return None


class BiasMaintainer:
    def __init__(self, scheme: Scheme, mode: str, model, links: LinkState, rbar: float):
        if mode not in MODES:
            raise ValueError(f"bias mode must be one of {MODES}")
        self.scheme, self.mode, self.model = scheme, mode, model
        self.links, self.rbar = links, rbar
        self.dirty: set[int] = set()
        self.delta = None
        self.B = None
        self.local_rounds = 0

    def weights(self, g, cg) -> np.ndarray:
        w = self.scheme.weights
        x = self.model.predict(cg) if w.needs_duty else None
        return biasmod.edge_weights(x, self.links.weight_rates(g), self.rbar, w)

    def start(self, g, cg) -> np.ndarray:
        self.delta = self.weights(g, cg)
        self.B = biasmod.apsp_bias(g, self.delta)
        return self.B

    def topology_changed(self, old_g, g, cg) -> None:
        new_delta = self.weights(g, cg)
        if self.mode == "ideal":
            self.delta = new_delta
            self.B = biasmod.apsp_bias(g, new_delta)
            return
        # the rule fires where links appeared or vanished; weight drift on
        # surviving links reaches a node only through propagation
        old = set(map(tuple, old_g.links.tolist()))
        cur = set(map(tuple, g.links.tolist()))
        touched = {v for l in old ^ cur for v in l}
        self.delta = new_delta
        self.dirty |= touched

    def tick(self, g) -> bool:
        """One synchronous neighbour exchange; True if any bias changed."""
        if self.mode != "neighbor" or not self.dirty:
            return False
        nodes = sorted(self.dirty)
        new = biasmod.neighbor_update_rows(self.B, g, self.delta, nodes)
        changed = [i for i in nodes if not np.array_equal(new[i], self.B[i])]
        self.B = new
        self.local_rounds += 1
        self.dirty = set()
        for i in changed:
            self.dirty.update(g.neighbors[i])
        return bool(changed)


def mobility_episode(inst: Instance, scheme: Scheme, mode: str = "ideal", model=None,
                     cfg: MobilityConfig = MobilityConfig(enabled=True), rng_seed=None,
                     density: float = DEFAULT_DENSITY, rate_std: float = LINK_RATE_STD,
                     check: bool = True):
    """Run ``inst`` while nodes move; returns the episode result and counters.

    ``r̄`` stays at its value from the initial rate trace; new links draw a
    fresh long-term rate and their own real-time trace from the mobility
    stream, so a zero step size reproduces the static run exactly.
    """
    if scheme.needs_model and model is None:
        raise ValueError(f"{scheme.name} needs a duty-cycle model")
    rng = np.random.default_rng(rng_seed)
    side = deployment_side(inst.g.num_nodes, density)
    radius, conflict_model = inst.cg.radius, inst.cg.model
    links = LinkState(inst, rate_std)
    g, cg = inst.g, inst.cg
    rbar = inst.rates.mean_rate
    bias = None
    if scheme.weights is not None:
        bias = BiasMaintainer(scheme, mode, model, links, rbar)
        B = bias.start(g, cg)
    else:
        B = None
    state = NetworkState(g, cg, inst.flows, B, scheme.backlog, check=check)
    rec = EpisodeRecorder(len(inst.flows), inst.T)
    A = inst.arrivals.counts
    changes = stuck = 0
    for t in range(inst.T):
        if cfg.enabled and t > 0 and t % cfg.interval == 0:
            new_g = move_nodes(g.positions, side, cfg, rng)
            if new_g is None:
                stuck += 1
            elif not np.array_equal(new_g.links, g.links) or not np.array_equal(new_g.positions, g.positions):
                new_cg = build_conflict_graph(new_g, conflict_model, radius)
                links.adopt(new_g, t, rng)
                if bias is not None:
                    bias.topology_changed(g, new_g, new_cg)
                g, cg = new_g, new_cg
                state.set_topology(g, cg, bias.B if bias is not None else None)
                changes += 1
        if bias is not None and bias.tick(g):
            state.set_bias(bias.B)
        rec.add(run_slot(state, A[:, t], links.rates_at(g, t)))
    res = rec.finish(state, A.sum(axis=1), [f.pattern for f in inst.flows], check)
    info = {"topology_changes": changes, "stuck_moves": stuck,
            "local_rounds": bias.local_rounds if bias is not None else 0}
    return res, info


def deployment_side(num_nodes: int, density: float) -> float:
    return math.sqrt(num_nodes / density)


def run_mobility(cfg, model=None, out_path=None, progress=None):
    """Every algorithm of ``cfg`` under each bias mode on the mobile corpus;
    the table's x axis is the bias update mode."""
    import json
    import time

    from .algorithms import canonical, resolve
    from .config import seed_for
    from .experiments import ResultTable, result_row
    from .instances import instance_keys, make_instance, make_network

    if any(resolve(a).needs_model for a in cfg.algorithms) and model is None:
        if cfg.model is None:
            raise ValueError("a duty-cycle model is required by the chosen algorithms")
        from ..gnn import GcnnModel
        model = GcnnModel.load(cfg.model)
    mob = cfg.mobility if cfg.mobility.enabled else MobilityConfig(**{**cfg.mobility.__dict__, "enabled": True})
    chash = cfg.result_hash()
    table = ResultTable([], "bias_update")
    sink = open(out_path, "a") if out_path else None
    units = [(size, key) for size in cfg.sizes for key in instance_keys(cfg, size)]
    try:
        for u, (size, key) in enumerate(units):
            inst = make_instance(cfg, key, network=make_network(cfg, size, key.topology))
            mseed = seed_for(cfg.seed, "mobility", key.size, key.topology, key.realization)
            for name in cfg.algorithms:
                scheme = resolve(name)
                modes = mob.modes if scheme.weights is not None else mob.modes[:1]
                for mode in modes:
                    t0 = time.perf_counter()
                    try:
                        res, info = mobility_episode(inst, scheme, mode, model, mob, mseed,
                                                     cfg.density, cfg.rate_std)
                        row = result_row(res, canonical(name), "bias_update", mode, key.label,
                                         cfg.seed, chash, time.perf_counter() - t0)
                        row.update(info)
                    except Exception as exc:
                        row = {"algorithm": canonical(name), "x_name": "bias_update", "x": mode,
                               "instance": key.label, "seed": cfg.seed, "config_hash": chash,
                               "error": repr(exc)}
                    table.add(row)
                    if sink:
                        sink.write(json.dumps(row) + "\n")
                        sink.flush()
            if progress:
                progress(u + 1, len(units))
    finally:
        if sink:
            sink.close()
    return table.sorted()
