"""Flows, exogenous packet arrivals and stochastic link rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from .topology import ConflictGraph, ConnectivityGraph

STREAMING_RATE = (0.2, 1.0)
BURSTY_RATE_LIGHT = (2.0, 10.0)
BURSTY_RATE_HEAVY = (6.6, 33.0)
BURST_CUTOFF = 30
LINK_RATE_RANGE = (10.0, 42.0)
LINK_RATE_STD = 3.0
LINK_RATE_SPREAD = 9.0


@dataclass(frozen=True)
class Flow:
    source: int
    commodity: int
    rate: float
    pattern: str = "streaming"
    cutoff: int | None = None

    def __post_init__(self):
        if self.source == self.commodity:
            raise ValueError("flow source and destination must differ")
        if self.rate < 0:
            raise ValueError("flow rate must be nonnegative")
        if self.pattern not in ("streaming", "bursty"):
            raise ValueError(f"unknown flow pattern {self.pattern!r}")
        if self.pattern == "bursty" and self.cutoff is None:
            object.__setattr__(self, "cutoff", BURST_CUTOFF)

    def active_slots(self, T: int) -> int:
        if self.pattern == "bursty":
            return min(T, int(self.cutoff))
        return T

    def to_dict(self) -> dict:
        return {"source": self.source, "commodity": self.commodity, "rate": self.rate,
                "pattern": self.pattern, "cutoff": self.cutoff}


@dataclass(frozen=True, eq=False)
class ArrivalTrace:
    """``counts[f, t]`` packets of flow ``f`` injected at slot ``t``."""

    counts: np.ndarray

    @property
    def num_slots(self) -> int:
        return self.counts.shape[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class RateTrace:
    """Real-time rates ``R[e, t]`` and the long-term rate parameters ``r_e``."""

    R: np.ndarray
    long_term: np.ndarray

    @property
    def empirical_rates(self) -> np.ndarray:
        """Per-link time average of ``R``."""
        if self.R.shape[1] == 0:
            return self.long_term.copy()
        return self.R.mean(axis=1)

    @property
    def mean_rate(self) -> float:
        """Network-wide average over links and slots."""
        if self.R.size == 0:
            return float(self.long_term.mean())
        return float(self.R.mean())


def flow_count_bounds(num_nodes: int, count_range=(0.30, 0.50)) -> tuple[int, int]:
    lo, hi = count_range
    if lo > hi:
        raise ValueError("count_range must satisfy lo <= hi")
    return math.floor(lo * num_nodes), math.ceil(hi * num_nodes)


def sample_flows(g: ConnectivityGraph, count_range=(0.30, 0.50), mix="streaming",
                 streaming_rate=STREAMING_RATE, bursty_rate=BURSTY_RATE_HEAVY,
                 cutoff: int = BURST_CUTOFF, rng_seed=None,
                 constant_rate: float | None = None) -> list[Flow]:
    """Random flows between distinct ordered source/destination pairs.

    ``mix`` is ``"streaming"``, ``"bursty"`` or a float ``p`` giving the
    probability that each flow is streaming.  ``constant_rate`` fixes every
    streaming rate (capacity sweeps).
    """
    rng = np.random.default_rng(rng_seed)
    n = g.num_nodes
    lo, hi = flow_count_bounds(n, count_range)
    count = int(rng.integers(lo, hi + 1))
    max_pairs = n * (n - 1)
    if count > max_pairs:
        raise ValueError(f"{count} flows requested but only {max_pairs} distinct pairs exist")
    picks = rng.choice(max_pairs, size=count, replace=False)
    flows = []
    for k in picks:
        src, off = divmod(int(k), n - 1)
        dst = off if off < src else off + 1
        if mix == "streaming":
            streaming = True
        elif mix == "bursty":
            streaming = False
        else:
            streaming = bool(rng.random() < float(mix))
        if streaming:
            rate = constant_rate if constant_rate is not None else rng.uniform(*streaming_rate)
            flows.append(Flow(src, dst, float(rate), "streaming"))
        else:
            flows.append(Flow(src, dst, float(rng.uniform(*bursty_rate)), "bursty", cutoff))
    return flows


def sample_arrivals(flows: list[Flow], T: int, rng_seed=None) -> ArrivalTrace:
    if T < 0:
        raise ValueError("T must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    counts = np.zeros((len(flows), T), dtype=np.int64)
    for f, flow in enumerate(flows):
        active = flow.active_slots(T)
        counts[f, :active] = rng.poisson(flow.rate, size=active)
    return ArrivalTrace(counts)


def draw_link_rates(long_term: np.ndarray, T: int, rng, std: float = LINK_RATE_STD,
                    spread: float = LINK_RATE_SPREAD) -> np.ndarray:
    """Truncated-normal real-time rates rounded to integers inside ``r_e +- spread``."""
    long_term = np.asarray(long_term, dtype=float)
    m = len(long_term)
    if std == 0:
        R = np.repeat(np.round(long_term)[:, None], T, axis=1)
    else:
        lim = spread / std
        z = truncnorm.rvs(-lim, lim, size=(m, T), random_state=rng)
        R = np.round(long_term[:, None] + std * z)
    lo = np.maximum(np.ceil(long_term - spread), 0.0)
    hi = np.floor(long_term + spread)
    return np.clip(R, lo[:, None], hi[:, None]).astype(np.int64)


def sample_rates(g: ConnectivityGraph, T: int, rng_seed=None, rate_range=LINK_RATE_RANGE,
                 std: float = LINK_RATE_STD, spread: float = LINK_RATE_SPREAD) -> RateTrace:
    rng = np.random.default_rng(rng_seed)
    r = rng.uniform(*rate_range, size=g.num_links)
    return RateTrace(draw_link_rates(r, T, rng, std, spread), r)


def lightness_figures(mean_flow_rate: float, source_fraction: float, mean_link_rate: float,
                      mean_degree: float, mean_conflict_degree: float) -> dict:
    per_node_arrival = mean_flow_rate * source_fraction
    if mean_conflict_degree > 0:
        outflow = mean_link_rate * mean_degree * 0.5 / mean_conflict_degree
    else:
        outflow = math.inf
    return {"per_node_arrival": per_node_arrival, "per_node_outflow": outflow}


def traffic_lightness_report(flows: list[Flow], g: ConnectivityGraph, cg: ConflictGraph,
                             rates: RateTrace) -> dict:
    """Exogenous arrival rate per node against the maximum outflow per node."""
    n = g.num_nodes
    mean_flow = float(np.mean([f.rate for f in flows])) if flows else 0.0
    return lightness_figures(mean_flow, len(flows) / n, float(np.mean(rates.long_term)),
                             float(g.degrees.mean()), cg.mean_degree)
