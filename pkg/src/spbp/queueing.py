"""Per-(node, commodity) FIFO queues and backlog metrics.

Packets are stored run-length encoded as ``[t0, flow, count]`` runs in node
arrival order, with ``t0`` the slot the packet entered the network.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

METRICS = ("Q", "HOL", "SJB", "expQ")
DEFAULT_EPSILON = 0.01


@dataclass(frozen=True)
class BacklogConfig:
    metric: str = "Q"
    bias_enabled: bool = False
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown backlog metric {self.metric!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


class CommodityQueue:
    __slots__ = ("runs", "length", "tsum", "expq_value")

    def __init__(self, timestamps=(), flow: int = -1):
        self.runs: deque[list[int]] = deque()
        self.length = 0
        self.tsum = 0
        self.expq_value = 0.0
        for t0 in timestamps:
            self.push(int(t0), 1, flow)
        self.expq_value = float(self.length)

    def __len__(self):
        return self.length

    def __repr__(self):
        return f"CommodityQueue(len={self.length}, expq={self.expq_value:.3f})"

    def push(self, t0: int, count: int = 1, flow: int = -1) -> None:
        if count <= 0:
            return
        if self.runs and self.runs[-1][0] == t0 and self.runs[-1][1] == flow:
            self.runs[-1][2] += count
        else:
            self.runs.append([t0, flow, count])
        self.length += count
        self.tsum += t0 * count

    def extend(self, runs) -> None:
        for t0, flow, count in runs:
            self.push(t0, count, flow)

    def pop(self, k: int) -> list[tuple[int, int, int]]:
        """Remove up to ``k`` packets from the head; returns the removed runs."""
        out = []
        k = min(int(k), self.length)
        while k > 0:
            run = self.runs[0]
            take = min(k, run[2])
            out.append((run[0], run[1], take))
            run[2] -= take
            if run[2] == 0:
                self.runs.popleft()
            k -= take
            self.length -= take
            self.tsum -= run[0] * take
        return out

    def head_timestamp(self) -> int | None:
        return self.runs[0][0] if self.runs else None

    def timestamps(self) -> list[int]:
        return [t0 for t0, _, c in self.runs for _ in range(c)]

    def hol_age(self, now: int) -> int:
        return now - self.runs[0][0] if self.runs else 0

    def sojourn_sum(self, now: int) -> int:
        return self.length * now - self.tsum


def _as_runs(packets):
    runs = []
    for p in packets:
        if isinstance(p, (tuple, list)):
            runs.append(tuple(int(v) for v in p))
        else:
            runs.append((int(p), -1, 1))
    return runs


def evolve_queue(q: CommodityQueue, sent: int, received=(), arrivals=(), t: int | None = None
                 ) -> CommodityQueue:
    """Drop ``sent`` head packets (FIFO) then append received and new packets.

    Packets are timestamps or ``(t0, flow, count)`` runs and keep their own
    ``t0``.  The result has length ``max(len - sent, 0) + received + arrivals``.
    Mutates and returns ``q``.
    """
    if sent < 0:
        raise ValueError("sent must be nonnegative")
    q.pop(sent)
    q.extend(_as_runs(received))
    q.extend(_as_runs(arrivals))
    return q


def expq_scale(length, sent):
    """``max(1 - sent/length, 0)`` with the empty-queue case defined as 1."""
    length = np.asarray(length, dtype=float)
    sent = np.asarray(sent, dtype=float)
    safe = np.where(length > 0, length, 1.0)
    scale = np.where(length > 0, np.maximum(1.0 - sent / safe, 0.0), 1.0)
    return scale if scale.ndim else float(scale)


def update_expq(expq, length, sent, received, arrivals, epsilon: float = DEFAULT_EPSILON):
    """One step of the exponential backlog; works elementwise on arrays."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    new = (1.0 + epsilon) * np.asarray(expq, dtype=float) * expq_scale(length, sent)
    new = new + np.asarray(received, dtype=float) + np.asarray(arrivals, dtype=float)
    return new if np.ndim(new) else float(new)


def backlog_metric(q: CommodityQueue, cfg: BacklogConfig, bias: float = 0.0, now: int = 0) -> float:
    if bias < 0:
        raise ValueError("bias must be nonnegative")
    if not cfg.bias_enabled:
        bias = 0.0
    if cfg.metric == "Q":
        g = float(q.length)
    elif cfg.metric == "HOL":
        g = float(q.hol_age(now))
    elif cfg.metric == "SJB":
        g = float(q.sojourn_sum(now))
    else:
        g = float(q.expq_value)
    return g + bias


class QueueBank:
    """All queues of one network, indexed ``[node, commodity column]``.

    Maintains array mirrors (length, timestamp sum, head timestamp, expQ) so
    backlog metrics can be evaluated for every queue at once.
    """

    def __init__(self, num_nodes: int, commodities):
        self.commodities = np.asarray(commodities, dtype=np.int64)
        self.num_nodes = num_nodes
        C = len(self.commodities)
        self.queues = [[CommodityQueue() for _ in range(C)] for _ in range(num_nodes)]
        self.length = np.zeros((num_nodes, C), dtype=np.int64)
        self.tsum = np.zeros((num_nodes, C), dtype=np.int64)
        self.head = np.zeros((num_nodes, C), dtype=np.int64)
        self.expq = np.zeros((num_nodes, C), dtype=float)

    def _sync(self, i: int, k: int) -> None:
        q = self.queues[i][k]
        self.length[i, k] = q.length
        self.tsum[i, k] = q.tsum
        self.head[i, k] = q.runs[0][0] if q.runs else 0

    def pop(self, i: int, k: int, count: int):
        runs = self.queues[i][k].pop(count)
        self._sync(i, k)
        return runs

    def push_runs(self, i: int, k: int, runs) -> None:
        self.queues[i][k].extend(runs)
        self._sync(i, k)

    def push(self, i: int, k: int, t0: int, count: int, flow: int = -1) -> None:
        self.queues[i][k].push(t0, count, flow)
        self._sync(i, k)

    def g_matrix(self, cfg: BacklogConfig, now: int) -> np.ndarray:
        if cfg.metric == "Q":
            return self.length.astype(float)
        if cfg.metric == "HOL":
            return np.where(self.length > 0, now - self.head, 0).astype(float)
        if cfg.metric == "SJB":
            return (self.length * now - self.tsum).astype(float)
        return self.expq.copy()

    def undelivered_runs(self):
        """``(node, commodity column, t0, flow, count)`` for every stored run."""
        for i, row in enumerate(self.queues):
            for k, q in enumerate(row):
                for t0, flow, count in q.runs:
                    yield i, k, t0, flow, count

    def total(self) -> int:
        return int(self.length.sum())
