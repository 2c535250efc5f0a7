"""Named routing schemes.

Identifiers are ASCII (``rbar`` for the network mean rate); the Unicode
spelling ``r̄`` is accepted as an alias.  ``EDR-delta`` is hop-count SP-BP
whose smallest edge weight is ``a * rbar``; its multiplier is supplied by
the bias-scaling sweep.
"""
from __future__ import annotations

from ..bias import EdgeWeightConfig
from ..routing import Scheme

_HOP_AVG = EdgeWeightConfig("hop", "min_to_avg_rate")
_INV_DUTY = EdgeWeightConfig("inv_duty")
_INV_RATE_MIN = EdgeWeightConfig("inv_rate", "min_to_avg_rate")
_COMBINED = EdgeWeightConfig("combined")
_COMBINED_MIN = EdgeWeightConfig("combined", "min_to_avg_rate")

# (identifier, edge weights, backlog metric) in table order
TABLE_ROWS = [
    ("BP", None, "Q"),
    ("BP-HOL", None, "HOL"),
    ("BP-SJB", None, "SJB"),
    ("EDR-rbar", _HOP_AVG, "Q"),
    ("EDR-rbar-expQ", _HOP_AVG, "expQ"),
    ("EDR-rbar-HOL", _HOP_AVG, "HOL"),
    ("EDR-rbar-SJB", _HOP_AVG, "SJB"),
    ("SP-1/x", _INV_DUTY, "Q"),
    ("SP-1/x-expQ", _INV_DUTY, "expQ"),
    ("SP-1/r-min", _INV_RATE_MIN, "Q"),
    ("SP-1/r-min-expQ", _INV_RATE_MIN, "expQ"),
    ("SP-rbar/(xr)", _COMBINED, "Q"),
    ("SP-rbar/(xr)-expQ", _COMBINED, "expQ"),
    ("SP-rbar/(xr)-min", _COMBINED_MIN, "Q"),
    ("SP-rbar/(xr)-min-expQ", _COMBINED_MIN, "expQ"),
]

ALGORITHMS = {name: Scheme(name, w, metric) for name, w, metric in TABLE_ROWS}
SWEEP_ALGORITHMS = ("EDR-delta",)


def canonical(name: str) -> str:
    return name.replace("r̄", "rbar").replace("δ", "delta").strip()


def resolve(name: str, multiplier: float | None = None) -> Scheme:
    key = canonical(name)
    if key in ALGORITHMS:
        return ALGORITHMS[key]
    if key == "EDR-delta":
        a = 1.0 if multiplier is None else float(multiplier)
        return Scheme(f"EDR-delta({a:g})", EdgeWeightConfig("hop", "min_to_avg_rate", a), "Q")
    raise ValueError(f"unknown algorithm {name!r}")


def needs_model(name: str) -> bool:
    return resolve(name).needs_model
