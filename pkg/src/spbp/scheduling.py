"""Link utilities, MaxWeight scheduling heuristics and rate allocation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import ConflictGraph

MWIS_MAX_LINKS = 25


@dataclass(frozen=True, eq=False)
class LinkUtilities:
    """Per-link routing decision for one slot.

    ``commodity`` holds commodity *columns*; ``weight`` is the clamped
    differential backlog after the nonempty-transmitter indicator;
    ``utility = rate * weight``.
    """

    transmitter: np.ndarray
    receiver: np.ndarray
    commodity: np.ndarray
    weight: np.ndarray
    utility: np.ndarray

    def __len__(self):
        return len(self.utility)

    def record(self, e: int) -> dict:
        return {
            "link": e,
            "direction": (int(self.transmitter[e]), int(self.receiver[e])),
            "commodity": int(self.commodity[e]),
            "weight": float(self.weight[e]),
            "utility": float(self.utility[e]),
        }


@dataclass(frozen=True, eq=False)
class Schedule:
    active: np.ndarray
    utilities: np.ndarray
    rounds: int = 0

    @property
    def links(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def value(self) -> float:
        return math.fsum(self.utilities[self.active].tolist())


@dataclass(frozen=True, eq=False)
class RateAllocation:
    """Nonzero transfer quotas: link, transmitter, receiver, commodity column, quota."""

    link: np.ndarray
    transmitter: np.ndarray
    receiver: np.ndarray
    commodity: np.ndarray
    quota: np.ndarray

    def as_dict(self, commodities=None) -> dict[tuple[int, int, int], int]:
        out = {}
        for i, j, k, q in zip(self.transmitter, self.receiver, self.commodity, self.quota):
            c = int(commodities[k]) if commodities is not None else int(k)
            out[(int(i), int(j), c)] = int(q)
        return out


def link_utilities(U: np.ndarray, queue_lengths: np.ndarray, links: np.ndarray,
                   rates_t: np.ndarray) -> LinkUtilities:
    """Commodity choice, max backpressure and utility for every undirected link.

    Ties: lowest commodity column wins within a direction; between directions
    the one whose transmitter holds packets of its commodity wins, then the
    lower node id.
    """
    m = len(links)
    a, b = links[:, 0], links[:, 1]
    if U.shape[1] == 0 or m == 0:
        zeros = np.zeros(m)
        return LinkUtilities(a.copy(), b.copy(), np.zeros(m, dtype=np.int64), zeros, zeros.copy())
    diff = U[a] - U[b]
    rows = np.arange(m)
    c_ab = np.argmax(diff, axis=1)
    c_ba = np.argmax(-diff, axis=1)
    w_ab = np.maximum(diff[rows, c_ab], 0.0)
    w_ba = np.maximum(-diff[rows, c_ba], 0.0)
    busy_ab = queue_lengths[a, c_ab] > 0
    busy_ba = queue_lengths[b, c_ba] > 0
    forward = (w_ab > w_ba) | ((w_ab == w_ba) & (busy_ab | ~busy_ba))
    tx = np.where(forward, a, b)
    rx = np.where(forward, b, a)
    com = np.where(forward, c_ab, c_ba)
    w = np.where(forward, w_ab, w_ba) * np.where(forward, busy_ab, busy_ba)
    return LinkUtilities(tx, rx, com, w, np.asarray(rates_t, dtype=float) * w)


def _utility_array(utilities) -> np.ndarray:
    if isinstance(utilities, LinkUtilities):
        return utilities.utility
    return np.asarray(utilities, dtype=float)


def lgs_schedule(utilities, cg: ConflictGraph) -> Schedule:
    """Local greedy scheduler in synchronous rounds.

    A link joins when its utility beats every undecided conflicting link
    (lower link id wins ties); winners knock out their neighbours.  Links
    with zero utility never join.
    """
    u = _utility_array(utilities)
    m = len(u)
    active = np.zeros(m, dtype=bool)
    cand = u > 0
    if not cand.any():
        return Schedule(active, u, 0)
    order = np.lexsort((np.arange(m), -u))
    rank = np.empty(m, dtype=np.int64)
    rank[order] = np.arange(m)
    big = np.int64(m + 1)
    indptr, indices = cg.indptr, cg.indices
    starts = indptr[:-1]
    has_nbr = np.diff(indptr) > 0
    adj = cg.adjacency
    rounds = 0
    while cand.any():
        rounds += 1
        if rounds > m:
            raise RuntimeError("local greedy scheduler failed to terminate")
        if len(indices):
            vals = np.where(cand[indices], rank[indices], big)
            nbr_min = np.full(m, big)
            nbr_min[has_nbr] = np.minimum.reduceat(vals, starts[has_nbr])
        else:
            nbr_min = np.full(m, big)
        winners = cand & (rank < nbr_min)
        active |= winners
        knocked = (adj @ winners.astype(float)) > 0
        cand &= ~(winners | knocked)
    return Schedule(active, u, rounds)


def greedy_sequential(utilities, cg: ConflictGraph) -> np.ndarray:
    """Plain sequential greedy MWIS by descending utility (lower id first on ties)."""
    u = _utility_array(utilities)
    m = len(u)
    blocked = np.zeros(m, dtype=bool)
    chosen = np.zeros(m, dtype=bool)
    for e in np.lexsort((np.arange(m), -u)):
        if u[e] <= 0 or blocked[e]:
            continue
        chosen[e] = True
        blocked[cg.neighbors(e)] = True
    return chosen


def mwis_bruteforce(utilities, cg: ConflictGraph, max_links: int = MWIS_MAX_LINKS) -> Schedule:
    """Exact maximum weight independent set by branch and bound.

    Among maximisers the lexicographically smallest activation vector is
    returned, so zero-utility links are never activated.
    """
    u = _utility_array(utilities)
    m = len(u)
    if m > max_links:
        raise ValueError(f"exact MWIS limited to {max_links} links, got {m}")
    if np.any(u < 0):
        raise ValueError("utilities must be nonnegative")
    cand = [e for e in range(m) if u[e] > 0]
    nbr_mask = [0] * m
    for e1, e2 in cg.conflicts:
        nbr_mask[e1] |= 1 << int(e2)
        nbr_mask[e2] |= 1 << int(e1)
    uu = u.tolist()
    best = {"value": -1.0, "vec": None}
    suffix = [0.0] * (len(cand) + 1)
    for k in range(len(cand) - 1, -1, -1):
        suffix[k] = suffix[k + 1] + uu[cand[k]]

    def better(chosen_list, value):
        if value > best["value"]:
            return True
        if value < best["value"]:
            return False
        vec = tuple(1 if e in chosen_list else 0 for e in range(m))
        return vec < best["vec"]

    def visit(k, chosen, banned, partial):
        if partial + suffix[k] < best["value"] - 1e-9 * max(1.0, abs(best["value"])):
            return
        if k == len(cand):
            value = math.fsum(uu[e] for e in sorted(chosen))
            if better(chosen, value):
                best["value"] = value
                best["vec"] = tuple(1 if e in chosen else 0 for e in range(m))
            return
        e = cand[k]
        if not banned >> e & 1:
            chosen.append(e)
            visit(k + 1, chosen, banned | nbr_mask[e], partial + uu[e])
            chosen.pop()
        visit(k + 1, chosen, banned, partial)

    visit(0, [], 0, 0.0)
    active = np.zeros(m, dtype=bool)
    if best["vec"] is not None:
        active[:] = np.asarray(best["vec"], dtype=bool)
    return Schedule(active, u, 0)


def is_independent(active: np.ndarray, cg: ConflictGraph) -> bool:
    c = cg.conflicts
    if len(c) == 0:
        return True
    return not bool(np.any(active[c[:, 0]] & active[c[:, 1]]))


def allocate_rates(schedule: Schedule, utilities: LinkUtilities, rates_t) -> RateAllocation:
    """Give each scheduled link with positive weight its whole real-time rate."""
    rates_t = np.asarray(rates_t)
    sel = np.flatnonzero(schedule.active & (utilities.weight > 0) & (rates_t > 0))
    return RateAllocation(sel, utilities.transmitter[sel], utilities.receiver[sel],
                          utilities.commodity[sel], rates_t[sel].astype(np.int64))
