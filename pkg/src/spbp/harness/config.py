"""Experiment configuration and the seed split scheme.

Every random quantity is drawn from ``SeedSequence(root_seed,
spawn_key=(purpose, *key))`` where ``purpose`` is one of ``PURPOSES`` and
``key`` identifies the instance (size, topology index, realization index).
Streams therefore do not depend on worker count or execution order.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..topology import DEFAULT_DENSITY, TEST_INTERFERENCE_RADIUS

PURPOSES = {
    "topology": 1,
    "flows": 2,
    "arrivals": 3,
    "rates": 4,
    "mobility": 5,
    "model": 6,
    "training": 7,
    "radius": 8,
}

TRAFFIC = ("streaming", "bursty", "bursty_light", "mixed")
SWEEPS = ("none", "multiplier", "lambda")


def seed_for(root: int, purpose: str, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(root), spawn_key=(PURPOSES[purpose], *map(int, key)))


@dataclass(frozen=True)
class MobilityConfig:
    enabled: bool = False
    interval: int = 100
    movers: int = 10
    step_std: float = 0.1
    max_retries: int = 100
    modes: tuple[str, ...] = ("ideal", "neighbor")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    algorithms: tuple[str, ...] = ("BP", "EDR-rbar")
    sizes: tuple[int, ...] = (20, 40, 60)
    topologies: int = 4
    realizations: int = 4
    traffic: str = "streaming"
    mixed_p: float = 0.5
    flow_range: tuple[float, float] = (0.30, 0.50)
    T: int = 1000
    seed: int = 0
    density: float = DEFAULT_DENSITY
    conflict_model: str = "unit_disk"
    radius: float = TEST_INTERFERENCE_RADIUS
    rate_std: float = 3.0
    sweep: str = "none"
    sweep_values: tuple[float, ...] = ()
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    model: str | None = None
    out: str = "results"

    def __post_init__(self):
        if self.traffic not in TRAFFIC:
            raise ValueError(f"traffic must be one of {TRAFFIC}")
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}")
        if self.sweep != "none" and not self.sweep_values:
            raise ValueError("a sweep needs sweep_values")
        if self.topologies < 1 or self.realizations < 1 or self.T < 0:
            raise ValueError("instance counts must be positive and T nonnegative")
        if self.conflict_model not in ("interface", "unit_disk"):
            raise ValueError("conflict_model must be interface or unit_disk")
        from .algorithms import resolve
        for a in self.algorithms:
            resolve(a)

    @property
    def points(self) -> list[tuple[int, float | None]]:
        vals = list(self.sweep_values) if self.sweep != "none" else [None]
        return [(n, v) for n in self.sizes for v in vals]

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def result_hash(self) -> str:
        """Hash of every field that can change a simulated result."""
        d = self.to_dict()
        for k in ("name", "out", "algorithms"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


SCALES = {
    "desk": dict(sizes=(20, 40, 60), topologies=4, realizations=4, T=1000),
    "paper": dict(sizes=tuple(range(20, 111, 10)), topologies=10, realizations=10, T=1000),
}


def _coerce(d: dict) -> dict:
    out = {}
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for k, v in d.items():
        if k not in names:
            raise ValueError(f"unknown config key {k!r}")
        if k == "mobility":
            mob = dict(v)
            if "modes" in mob:
                mob["modes"] = tuple(mob["modes"])
            v = MobilityConfig(**mob)
        elif isinstance(v, list):
            v = tuple(v)
        out[k] = v
    return out


def load_config(path=None, section: str | None = None, scale: str | None = None,
                **overrides) -> ExperimentConfig:
    """Precedence: dataclass defaults < TOML file (optionally one ``[section]``
    merged over the top-level keys) < scale preset < explicit overrides.
    ``None`` overrides are ignored."""
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        if section is not None:
            base = {k: v for k, v in doc.items() if not isinstance(v, dict) or k == "mobility"}
            data = {**base, **doc.get(section, {})}
        else:
            data = doc
    if scale is not None:
        if scale not in SCALES:
            raise ValueError(f"unknown scale {scale!r}")
        data = {**data, **SCALES[scale]}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**_coerce(data))
