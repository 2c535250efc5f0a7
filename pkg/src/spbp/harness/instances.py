"""Deterministic test and training instance corpora."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..routing import Instance
from ..topology import (TRAINING_RADIUS_MAX, build_conflict_graph, generate_network,
                        save_graphs)
from ..traffic import (BURSTY_RATE_HEAVY, BURSTY_RATE_LIGHT, ArrivalTrace, RateTrace,
                       sample_arrivals, sample_flows, sample_rates)
from .config import ExperimentConfig, seed_for


@dataclass(frozen=True)
class InstanceKey:
    size: int
    topology: int
    realization: int

    @property
    def label(self) -> str:
        return f"n{self.size}-g{self.topology}-r{self.realization}"


def instance_keys(cfg: ExperimentConfig, size: int) -> list[InstanceKey]:
    return [InstanceKey(size, k, j) for k in range(cfg.topologies) for j in range(cfg.realizations)]


def _mix(cfg: ExperimentConfig):
    if cfg.traffic == "streaming":
        return "streaming", BURSTY_RATE_HEAVY
    if cfg.traffic == "bursty":
        return "bursty", BURSTY_RATE_HEAVY
    if cfg.traffic == "bursty_light":
        return "bursty", BURSTY_RATE_LIGHT
    return cfg.mixed_p, BURSTY_RATE_HEAVY


def make_network(cfg: ExperimentConfig, size: int, topology: int):
    g = generate_network(size, cfg.density, rng_seed=seed_for(cfg.seed, "topology", size, topology))
    cg = build_conflict_graph(g, cfg.conflict_model, cfg.radius)
    return g, cg


def make_instance(cfg: ExperimentConfig, key: InstanceKey, constant_rate: float | None = None,
                  network=None) -> Instance:
    """Instance for ``key``.  Topology depends on (size, topology); flows,
    arrivals and rates additionally on the realization index.  The seeds do
    not depend on ``constant_rate``, so capacity sweeps reuse flow pairs."""
    g, cg = network if network is not None else make_network(cfg, key.size, key.topology)
    k = (key.size, key.topology, key.realization)
    mix, bursty_rate = _mix(cfg)
    flows = sample_flows(g, cfg.flow_range, mix, bursty_rate=bursty_rate,
                         rng_seed=seed_for(cfg.seed, "flows", *k), constant_rate=constant_rate)
    arrivals = sample_arrivals(flows, cfg.T, seed_for(cfg.seed, "arrivals", *k))
    rates = sample_rates(g, cfg.T, seed_for(cfg.seed, "rates", *k), std=cfg.rate_std)
    return Instance(g, cg, flows, arrivals, rates, {"key": key.label, "size": key.size})


@dataclass(frozen=True)
class TrainingSettings:
    sizes: tuple[int, ...] = (20, 30, 40)
    count: int = 500
    T: int = 200
    flow_range: tuple[float, float] = (0.15, 0.30)
    radius_max: float = TRAINING_RADIUS_MAX
    networks_per_size: int = 20
    seed: int = 0


class TrainingCorpus:
    """Re-iterable, lazily generated training instances.

    Instance ``k`` uses size ``sizes[k % len(sizes)]`` and one of
    ``networks_per_size`` fixed topologies of that size, with a fresh
    interference radius ``U(0, radius_max)`` and fresh traffic.
    """

    def __init__(self, settings: TrainingSettings = TrainingSettings(), density: float | None = None):
        self.s = settings
        self.density = density
        self._networks = {}

    def __len__(self):
        return self.s.count

    def _network(self, size: int, idx: int):
        if (size, idx) not in self._networks:
            kw = {} if self.density is None else {"density": self.density}
            self._networks[(size, idx)] = generate_network(
                size, rng_seed=seed_for(self.s.seed, "training", size, idx, 0), **kw)
        return self._networks[(size, idx)]

    def instance(self, k: int) -> Instance:
        s = self.s
        size = s.sizes[k % len(s.sizes)]
        net_rng = np.random.default_rng(seed_for(s.seed, "radius", k))
        idx = int(net_rng.integers(s.networks_per_size))
        radius = float(net_rng.uniform(0.0, s.radius_max))
        g = self._network(size, idx)
        cg = build_conflict_graph(g, "unit_disk", radius)
        flows = sample_flows(g, s.flow_range, "streaming", rng_seed=seed_for(s.seed, "flows", k, 1))
        arrivals = sample_arrivals(flows, s.T, seed_for(s.seed, "arrivals", k, 1))
        rates = sample_rates(g, s.T, seed_for(s.seed, "rates", k, 1))
        return Instance(g, cg, flows, arrivals, rates, {"key": f"train-{k}", "radius": radius})

    def __iter__(self):
        for k in range(self.s.count):
            yield self.instance(k)


def save_instance(inst: Instance, directory) -> None:
    """Write graphs (JSON) plus flows, arrivals and rates (npz)."""
    os.makedirs(directory, exist_ok=True)
    save_graphs(os.path.join(directory, "graphs.json"), inst.g, inst.cg)
    with open(os.path.join(directory, "flows.json"), "w") as fh:
        json.dump({"flows": [f.to_dict() for f in inst.flows], "meta": inst.meta}, fh)
    np.savez_compressed(os.path.join(directory, "traces.npz"), arrivals=inst.arrivals.counts,
                        R=inst.rates.R, long_term=inst.rates.long_term)


def load_instance(directory) -> Instance:
    from ..topology import load_graphs
    from ..traffic import Flow

    g, cg = load_graphs(os.path.join(directory, "graphs.json"))
    with open(os.path.join(directory, "flows.json")) as fh:
        doc = json.load(fh)
    flows = [Flow(**f) for f in doc["flows"]]
    data = np.load(os.path.join(directory, "traces.npz"))
    return Instance(g, cg, flows, ArrivalTrace(data["arrivals"]),
                    RateTrace(data["R"], data["long_term"]), doc.get("meta", {}))
