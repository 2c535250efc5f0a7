"""Slot-level backpressure routing and full episodes."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import bias as biasmod
from .bias import EdgeWeightConfig
from .queueing import BacklogConfig, QueueBank, update_expq
from .scheduling import allocate_rates, is_independent, lgs_schedule, link_utilities
from .topology import ConflictGraph, ConnectivityGraph
from .traffic import ArrivalTrace, Flow, RateTrace


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class Scheme:
    """A routing variant: optional shortest-path edge weights plus a backlog metric."""

    name: str
    weights: EdgeWeightConfig | None = None
    metric: str = "Q"
    epsilon: float = 0.01

    @property
    def backlog(self) -> BacklogConfig:
        return BacklogConfig(self.metric, self.weights is not None, self.epsilon)

    @property
    def needs_model(self) -> bool:
        return self.weights is not None and self.weights.needs_duty


@dataclass(eq=False)
class Instance:
    g: ConnectivityGraph
    cg: ConflictGraph
    flows: list[Flow]
    arrivals: ArrivalTrace
    rates: RateTrace
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.arrivals.num_slots


def commodity_columns(flows) -> np.ndarray:
    return np.array(sorted({f.commodity for f in flows}), dtype=np.int64)


class NetworkState:
    """Queues, biases and clock of one running network."""

    def __init__(self, g: ConnectivityGraph, cg: ConflictGraph, flows, B=None,
                 cfg: BacklogConfig = BacklogConfig(), check: bool = True):
        self.flows = list(flows)
        self.commodities = commodity_columns(self.flows)
        self.col = {int(c): k for k, c in enumerate(self.commodities)}
        self.flow_src = np.array([f.source for f in self.flows], dtype=np.int64)
        self.flow_col = np.array([self.col[f.commodity] for f in self.flows], dtype=np.int64)
        self.bank = QueueBank(g.num_nodes, self.commodities)
        self.cfg = cfg
        self.check = check
        self.t = 0
        self.set_topology(g, cg, B)

    def set_topology(self, g: ConnectivityGraph, cg: ConflictGraph, B=None) -> None:
        if g.num_nodes != self.bank.num_nodes:
            raise ValueError("node set cannot change")
        self.g, self.cg = g, cg
        self.set_bias(B)

    def set_bias(self, B) -> None:
        n = self.g.num_nodes
        self.B = np.zeros((n, n)) if B is None else np.asarray(B, dtype=float)
        if self.cfg.bias_enabled:
            self.Bc = self.B[:, self.commodities]
        else:
            self.Bc = np.zeros((n, len(self.commodities)))

    def backlog(self) -> np.ndarray:
        return self.bank.g_matrix(self.cfg, self.t) + self.Bc

    def snapshot(self) -> dict:
        """Per-commodity queue totals at the current slot."""
        totals = self.bank.length.sum(axis=0)
        return {"t": self.t, "totals": {int(c): int(v) for c, v in zip(self.commodities, totals)}}


@dataclass
class SlotStats:
    t: int
    active: np.ndarray
    transfers: list
    delivered: list
    arrivals: int

    @property
    def delivered_count(self) -> int:
        return sum(run[3] for run in self.delivered)


def step(state: NetworkState, arrivals_t, rates_t) -> SlotStats:
    """Advance one slot: utilities, LGS schedule, rate allocation, then a
    simultaneous packet-conserving queue update."""
    bank = state.bank
    t = state.t
    rates_t = np.asarray(rates_t)
    if len(rates_t) != state.g.num_links:
        raise ValueError("need one real-time rate per link")
    U = state.backlog()
    util = link_utilities(U, bank.length, state.g.links, rates_t)
    sched = lgs_schedule(util, state.cg)
    if state.check and not is_independent(sched.active, state.cg):
        raise InvariantViolation(f"slot {t}: schedule is not independent")
    alloc = allocate_rates(sched, util, rates_t)

    length0 = bank.length.copy() if state.cfg.metric == "expQ" else None
    shape = bank.length.shape
    sent = np.zeros(shape, dtype=np.int64)
    recv = np.zeros(shape, dtype=np.int64)
    arr = np.zeros(shape, dtype=np.int64)

    moving = []
    for e, i, j, k, quota in zip(alloc.link.tolist(), alloc.transmitter.tolist(),
                                 alloc.receiver.tolist(), alloc.commodity.tolist(),
                                 alloc.quota.tolist()):
        n = min(quota, int(bank.length[i, k]))
        if n <= 0:
            continue
        moving.append((e, i, j, k, n, bank.pop(i, k, n)))
        sent[i, k] += n

    delivered = []
    transfers = []
    commodities = state.commodities
    for e, i, j, k, n, runs in moving:
        transfers.append((e, i, j, int(commodities[k]), n))
        if j == commodities[k]:
            for t0, flow, count in runs:
                delivered.append((flow, t0, t, count))
        else:
            bank.push_runs(j, k, runs)
            recv[j, k] += n

    total_arr = 0
    if arrivals_t is not None:
        arrivals_t = np.asarray(arrivals_t)
        for f in np.flatnonzero(arrivals_t):
            a = int(arrivals_t[f])
            i, k = int(state.flow_src[f]), int(state.flow_col[f])
            bank.push(i, k, t, a, int(f))
            arr[i, k] += a
            total_arr += a

    if state.cfg.metric == "expQ":
        bank.expq = update_expq(bank.expq, length0, sent, recv, arr, state.cfg.epsilon)
        if state.check and np.any(bank.expq < bank.length - 1e-9 * np.maximum(bank.length, 1)):
            raise InvariantViolation(f"slot {t}: expQ fell below the queue length")
    if state.check and np.any(bank.length < 0):
        raise InvariantViolation(f"slot {t}: negative queue length")
    state.t += 1
    return SlotStats(t, sched.active, transfers, delivered, total_arr)


@dataclass
class EpisodeResult:
    T: int
    injected: np.ndarray
    delivered: np.ndarray
    delay_sum: np.ndarray
    in_flight: int
    throughput: np.ndarray
    records: list = field(default_factory=list)
    undelivered: list = field(default_factory=list)
    schedules: np.ndarray | None = None
    flow_patterns: list = field(default_factory=list)

    @property
    def total_injected(self) -> int:
        return int(self.injected.sum())

    @property
    def total_delivered(self) -> int:
        return int(self.delivered.sum())

    @property
    def delivery_rate(self) -> float:
        inj = self.total_injected
        return 1.0 if inj == 0 else self.total_delivered / inj

    def flow_latency(self) -> np.ndarray:
        """Mean end-to-end delay per flow; undelivered packets count ``T``.
        NaN for flows that injected nothing."""
        lost = self.injected - self.delivered
        with np.errstate(invalid="ignore", divide="ignore"):
            lat = (self.delay_sum + lost * self.T) / self.injected
        return np.where(self.injected > 0, lat, np.nan)

    @property
    def latency(self) -> float:
        lat = self.flow_latency()
        lat = lat[~np.isnan(lat)]
        return float(lat.mean()) if len(lat) else 0.0

    @property
    def mean_packet_delay(self) -> float:
        inj = self.total_injected
        if inj == 0:
            return 0.0
        lost = inj - self.total_delivered
        return float((self.delay_sum.sum() + lost * self.T) / inj)

    @property
    def mean_throughput(self) -> float:
        return float(self.throughput.mean()) if self.T else 0.0

    def for_pattern(self, pattern: str) -> dict:
        """Delivery rate and latency restricted to streaming or bursty flows."""
        idx = np.array([p == pattern for p in self.flow_patterns], dtype=bool)
        if not idx.any():
            return {"delivery_rate": float("nan"), "latency": float("nan")}
        inj = self.injected[idx].sum()
        lat = self.flow_latency()[idx]
        lat = lat[~np.isnan(lat)]
        return {"delivery_rate": 1.0 if inj == 0 else float(self.delivered[idx].sum() / inj),
                "latency": float(lat.mean()) if len(lat) else 0.0}

    def summary(self) -> dict:
        return {
            "T": self.T,
            "injected": self.total_injected,
            "delivered": self.total_delivered,
            "in_flight": self.in_flight,
            "delivery_rate": self.delivery_rate,
            "latency": self.latency,
            "mean_packet_delay": self.mean_packet_delay,
            "throughput": self.mean_throughput,
        }

    def to_dict(self) -> dict:
        d = self.summary()
        d.update({
            "per_flow": {
                "injected": self.injected.tolist(),
                "delivered": self.delivered.tolist(),
                "delay_sum": self.delay_sum.tolist(),
                "latency": [None if np.isnan(v) else float(v) for v in self.flow_latency()],
                "pattern": list(self.flow_patterns),
            },
            "throughput_trace": self.throughput.tolist(),
            "delivered_runs": [list(map(int, r)) for r in self.records],
            "undelivered_runs": [list(map(int, r)) for r in self.undelivered],
        })
        return d

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def compute_bias(scheme: Scheme, g: ConnectivityGraph, cg: ConflictGraph, rates: RateTrace,
                 model=None, duty=None, rbar: float | None = None):
    """Edge weights and bias matrix for ``scheme``; ``(None, None)`` if unbiased."""
    if scheme.weights is None:
        return None, None
    x = None
    if scheme.weights.needs_duty:
        if duty is not None:
            x = np.asarray(duty, dtype=float)
        elif model is not None:
            x = model.predict(cg)
        else:
            raise ValueError(f"scheme {scheme.name} needs a duty-cycle model")
    rbar = rates.mean_rate if rbar is None else rbar
    delta = biasmod.edge_weights(x, rates.empirical_rates, rbar, scheme.weights)
    return delta, biasmod.apsp_bias(g, delta)


class EpisodeRecorder:
    """Accumulates per-flow delivery counts and delays slot by slot."""

    def __init__(self, num_flows: int, T: int, num_links: int | None = None):
        self.T = T
        self.delivered = np.zeros(num_flows, dtype=np.int64)
        self.delay_sum = np.zeros(num_flows, dtype=np.int64)
        self.throughput = np.zeros(T, dtype=np.int64)
        self.schedules = np.zeros((T, num_links), dtype=bool) if num_links is not None else None
        self.records = []

    def add(self, stats: SlotStats) -> None:
        for flow, t0, t1, count in stats.delivered:
            self.delivered[flow] += count
            self.delay_sum[flow] += (t1 - t0) * count
        self.throughput[stats.t] = stats.delivered_count
        self.records.extend(stats.delivered)
        if self.schedules is not None:
            self.schedules[stats.t] = stats.active

    def finish(self, state: NetworkState, injected, patterns, check: bool = True) -> EpisodeResult:
        injected = np.asarray(injected, dtype=np.int64)
        undelivered = [(flow, t0, count) for _, _, t0, flow, count in state.bank.undelivered_runs()]
        in_flight = state.bank.total()
        if check and injected.sum() != self.delivered.sum() + in_flight:
            raise InvariantViolation(
                f"packet conservation violated: injected {injected.sum()}, "
                f"delivered {self.delivered.sum()}, in flight {in_flight}")
        return EpisodeResult(self.T, injected, self.delivered, self.delay_sum, in_flight,
                             self.throughput, self.records, undelivered, self.schedules,
                             list(patterns))


def run_slot(state: NetworkState, arrivals_t, rates_t) -> SlotStats:
    """``step`` with the slot index attached to unexpected errors."""
    try:
        return step(state, arrivals_t, rates_t)
    except InvariantViolation:
        raise
    except Exception as exc:
        raise RuntimeError(f"slot {state.t}: {exc}") from exc


def run_episode(inst: Instance, scheme: Scheme, model=None, *, record_schedules: bool = False,
                B=None, check: bool = True, duty=None, trace=None) -> EpisodeResult:
    """Simulate ``inst.T`` slots from empty queues.

    ``trace`` may be a callable receiving ``(state, SlotStats)`` every slot.
    """
    if B is None and scheme.weights is not None:
        _, B = compute_bias(scheme, inst.g, inst.cg, inst.rates, model=model, duty=duty)
    state = NetworkState(inst.g, inst.cg, inst.flows, B, scheme.backlog, check=check)
    rec = EpisodeRecorder(len(inst.flows), inst.T,
                          inst.g.num_links if record_schedules else None)
    R = inst.rates.R
    A = inst.arrivals.counts
    for t in range(inst.T):
        stats = run_slot(state, A[:, t], R[:, t])
        rec.add(stats)
        if trace is not None:
            trace(state, stats)
    return rec.finish(state, A.sum(axis=1), [f.pattern for f in inst.flows], check)


class CsvSlotTrace:
    """Per-slot CSV trace: slot, scheduled links, transfers, delivered, arrivals, in-flight."""

    def __init__(self, path):
        self.fh = open(path, "w")
        self.fh.write("slot,scheduled,transfers,delivered,arrivals,in_flight\n")

    def __call__(self, state: NetworkState, stats: SlotStats) -> None:
        self.fh.write(f"{stats.t},{int(stats.active.sum())},{len(stats.transfers)},"
                      f"{stats.delivered_count},{stats.arrivals},{state.bank.total()}\n")

    def close(self) -> None:
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


TRAINING_SCHEME = Scheme("SP-1/x-train", EdgeWeightConfig("inv_duty"), "Q")


def duty_rollout(model, inst: Instance) -> np.ndarray:
    """Route ``inst`` with 1/x biases from ``model``; returns the schedule record."""
    res = run_episode(inst, TRAINING_SCHEME, model, record_schedules=True)
    return res.schedules
