"""Comparison matrices, sweeps, result tables and plot data."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
import warnings
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..gnn import GcnnModel
from ..routing import Scheme, compute_bias, run_episode
from .algorithms import canonical, resolve
from .config import ExperimentConfig
from .instances import InstanceKey, instance_keys, make_instance, make_network

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
METRICS = ("latency", "delivery_rate", "throughput", "mean_packet_delay",
           "latency_streaming", "delivery_streaming", "latency_bursty", "delivery_bursty")


@dataclass(frozen=True)
class Aggregate:
    n: int
    mean: float
    ci: float

    @property
    def low(self) -> float:
        return self.mean - self.ci

    @property
    def high(self) -> float:
        return self.mean + self.ci


def mean_ci(values) -> Aggregate:
    """Mean and normal-approximation 95% half-width over instance values."""
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if len(v) == 0:
        return Aggregate(0, math.nan, math.nan)
    ci = Z95 * v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else 0.0
    return Aggregate(len(v), float(v.mean()), float(ci))


@dataclass
class ResultTable:
    """Instance-level rows; aggregates are always recomputed from them."""

    rows: list[dict] = field(default_factory=list)
    x_name: str = "size"

    def add(self, row: dict) -> None:
        self.rows.append(row)

    def ok_rows(self) -> list[dict]:
        return [r for r in self.rows if "error" not in r]

    @property
    def failures(self) -> Counter:
        return Counter(r["algorithm"] for r in self.rows if "error" in r)

    @property
    def algorithms(self) -> list[str]:
        return list(dict.fromkeys(r["algorithm"] for r in self.rows))

    def xs(self, algorithm: str | None = None) -> list:
        xs = {r["x"] for r in self.ok_rows() if algorithm is None or r["algorithm"] == algorithm}
        return sorted(xs, key=lambda v: (isinstance(v, str), v))

    def values(self, algorithm: str, x, metric: str) -> list[float]:
        return [r[metric] for r in self.ok_rows()
                if r["algorithm"] == algorithm and r["x"] == x and metric in r]

    def aggregate(self, algorithm: str, x, metric: str) -> Aggregate:
        return mean_ci(self.values(algorithm, x, metric))

    def series(self, algorithm: str, metric: str) -> list[tuple[object, Aggregate]]:
        return [(x, self.aggregate(algorithm, x, metric)) for x in self.xs(algorithm)]

    def summary(self, metrics=("latency", "delivery_rate", "throughput")) -> list[dict]:
        out = []
        for alg in self.algorithms:
            for x in self.xs(alg):
                d = {"algorithm": alg, self.x_name: x}
                for m in metrics:
                    a = self.aggregate(alg, x, m)
                    d.update({"n": a.n, f"{m}_mean": a.mean, f"{m}_ci": a.ci})
                out.append(d)
        return out

    def format(self, metrics=("latency", "delivery_rate", "throughput")) -> str:
        lines = []
        for d in self.summary(metrics):
            cells = [f"{d['algorithm']:<24}", f"{self.x_name}={d[self.x_name]!s:<6}", f"n={d['n']:<4}"]
            cells += [f"{m}={d[f'{m}_mean']:.4g}±{d[f'{m}_ci']:.3g}" for m in metrics]
            lines.append("  ".join(cells))
        fails = self.failures
        if fails:
            lines.append("failures: " + ", ".join(f"{a}={c}" for a, c in fails.items()))
        return "\n".join(lines)

    def sorted(self) -> "ResultTable":
        key = lambda r: (r["algorithm"], str(r["x"]), r["instance"])
        return ResultTable(sorted(self.rows, key=key), self.x_name)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.rows:
                fh.write(json.dumps(r) + "\n")

    @classmethod
    def load_jsonl(cls, path, x_name: str | None = None, config_hash: str | None = None):
        rows = []
        if os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    r = json.loads(line)
                    if config_hash is None or r.get("config_hash") == config_hash:
                        rows.append(r)
        if x_name is None:
            x_name = rows[0].get("x_name", "size") if rows else "size"
        return cls(rows, x_name)


def _scheme_at(name: str, x_name: str, x) -> Scheme:
    s = resolve(name)
    if x_name == "multiplier" and s.weights is not None and s.weights.scaling != "none":
        s = dataclasses.replace(s, weights=dataclasses.replace(s.weights, multiplier=float(x)))
    return s


def result_row(res, algorithm: str, x_name: str, x, instance: str, seed: int, config_hash: str,
               wall_time: float) -> dict:
    row = {"algorithm": algorithm, "x_name": x_name, "x": x, "instance": instance, "seed": seed,
           "config_hash": config_hash}
    row.update(res.summary())
    for pattern in ("streaming", "bursty"):
        p = res.for_pattern(pattern)
        row[f"latency_{pattern}"] = p["latency"]
        row[f"delivery_{pattern}"] = p["delivery_rate"]
    row["wall_time"] = wall_time
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}


def _x_name(cfg: ExperimentConfig) -> str:
    return "size" if cfg.sweep == "none" else cfg.sweep


def _run_unit(cfg: ExperimentConfig, size: int, value, key: InstanceKey, algorithms, model_doc):
    """Simulate one instance under every requested algorithm."""
    x_name = _x_name(cfg)
    x = size if value is None else value
    chash = cfg.result_hash()
    rows = []
    try:
        net = make_network(cfg, size, key.topology)
        inst = make_instance(cfg, key, constant_rate=value if cfg.sweep == "lambda" else None,
                             network=net)
    except Exception as exc:
        log.warning("instance %s failed to build: %s", key.label, exc)
        return [{"algorithm": canonical(a), "x_name": x_name, "x": x, "instance": key.label,
                 "seed": cfg.seed, "config_hash": chash, "error": repr(exc)} for a in algorithms]
    model = GcnnModel.from_dict(model_doc) if model_doc is not None else None
    duty = None
    for name in algorithms:
        scheme = _scheme_at(name, x_name, x)
        t0 = time.perf_counter()
        try:
            if scheme.needs_model and duty is None:
                if model is None:
                    raise ValueError(f"{name} needs a trained model")
                duty = model.predict(inst.cg)
            _, B = compute_bias(scheme, inst.g, inst.cg, inst.rates, duty=duty)
            res = run_episode(inst, scheme, B=B)
            rows.append(result_row(res, canonical(name), x_name, x, key.label, cfg.seed, chash,
                                   time.perf_counter() - t0))
        except Exception as exc:
            log.warning("%s on %s failed: %s", name, key.label, exc)
            rows.append({"algorithm": canonical(name), "x_name": x_name, "x": x,
                         "instance": key.label, "seed": cfg.seed, "config_hash": chash,
                         "error": repr(exc)})
    return rows


def _unpack(args):
    return _run_unit(*args)


def run_matrix(cfg: ExperimentConfig, model: GcnnModel | None = None, workers: int = 1,
               out_path=None, progress=None) -> ResultTable:
    """Every algorithm on every instance of every sweep point.

    Rows are appended to ``out_path`` (JSONL) as instances finish; rows
    already stored under the same config hash are reused, so an interrupted
    run resumes where it stopped.  Failed rows are kept with an ``error``
    field and are retried on resume.
    """
    if any(resolve(a).needs_model for a in cfg.algorithms) and model is None:
        if cfg.model is None:
            raise ValueError("a duty-cycle model is required by the chosen algorithms")
        model = GcnnModel.load(cfg.model)
    x_name = _x_name(cfg)
    chash = cfg.result_hash()
    table = ResultTable([], x_name)
    done = set()
    if out_path is not None:
        prior = ResultTable.load_jsonl(out_path, x_name, chash)
        for r in prior.ok_rows():
            k = (r["algorithm"], r["x"], r["instance"])
            if k not in done:
                done.add(k)
                table.add(r)
    units = []
    for size, value in cfg.points:
        x = size if value is None else value
        for key in instance_keys(cfg, size):
            todo = [a for a in cfg.algorithms if (canonical(a), x, key.label) not in done]
            if todo:
                units.append((cfg, size, value, key, tuple(todo),
                              model.to_dict() if model is not None else None))
    sink = open(out_path, "a") if out_path is not None else None
    try:
        if workers > 1 and len(units) > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = pool.map(_unpack, units)
                _collect(results, table, sink, progress, len(units))
        else:
            _collect(map(_unpack, units), table, sink, progress, len(units))
    finally:
        if sink:
            sink.close()
    failures = table.failures
    if failures:
        log.warning("failed runs excluded from aggregates: %s", dict(failures))
    return table.sorted()


def _collect(results, table, sink, progress, total):
    for k, rows in enumerate(results):
        for r in rows:
            table.add(r)
            if sink:
                sink.write(json.dumps(r) + "\n")
        if sink:
            sink.flush()
        if progress:
            progress(k + 1, total)


@dataclass
class CapacityResult:
    table: ResultTable
    peaks: dict[str, tuple[float, float]]

    def gain(self, algorithm: str, baseline: str = "BP") -> float:
        return self.peaks[algorithm][1] / self.peaks[baseline][1] - 1.0


def capacity_sweep(cfg: ExperimentConfig, lambdas, model=None, workers: int = 1,
                   out_path=None, progress=None) -> CapacityResult:
    """Throughput against constant streaming rate; the peak of the mean
    curve is reported as capacity ``(lambda, throughput)`` per algorithm."""
    cfg = cfg.replace(traffic="streaming", sweep="lambda", sweep_values=tuple(float(v) for v in lambdas))
    table = run_matrix(cfg, model, workers, out_path, progress)
    peaks = {}
    for alg in table.algorithms:
        series = [(x, a.mean) for x, a in table.series(alg, "throughput") if a.n]
        if series:
            peaks[alg] = max(series, key=lambda p: (p[1], -p[0]))
    return CapacityResult(table, peaks)


FIGURES = {
    "fig4": ("a", ("latency",)),
    "fig5": ("size", ("latency", "delivery_rate")),
    "fig6": ("size", ("latency", "delivery_rate")),
    "fig7": ("lambda", ("throughput",)),
    "table1": ("size", ("latency", "delivery_rate", "latency_streaming", "delivery_streaming",
                        "latency_bursty", "delivery_bursty")),
    "table3": ("bias_update", ("latency", "delivery_rate")),
}


def plot_columns(figure: str) -> list[str]:
    x_col, metrics = FIGURES[figure]
    cols = [x_col, "algorithm", "n"]
    for m in metrics:
        cols += [f"{m}_mean", f"{m}_ci", f"{m}_ci_low", f"{m}_ci_high"]
    return cols


def emit_plot_data(table: ResultTable, figure: str, out_dir) -> str:
    """Write ``<out_dir>/<figure>.csv``: one row per (algorithm, x) with mean
    and 95% interval columns for each metric of the figure; ``n`` counts the
    instances behind the first metric."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure id {figure!r}; choose from {sorted(FIGURES)}")
    if not table.ok_rows():
        raise ValueError("result table is empty")
    x_col, metrics = FIGURES[figure]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{figure}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(plot_columns(figure))
        for alg in table.algorithms:
            series = table.xs(alg)
            if not series:
                warnings.warn(f"{alg}: no successful rows, series omitted")
                continue
            for x in series:
                aggs = [table.aggregate(alg, x, m) for m in metrics]
                if all(a.n == 0 for a in aggs):
                    warnings.warn(f"{alg} at {x_col}={x}: empty series omitted")
                    continue
                cells = [x, alg, aggs[0].n]
                for a in aggs:
                    cells += [repr(a.mean), repr(a.ci), repr(a.low), repr(a.high)]
                w.writerow(cells)
    return path


def read_plot_data(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def group_rows(rows, *keys):
    out = defaultdict(list)
    for r in rows:
        out[tuple(r[k] for k in keys)].append(r)
    return out
