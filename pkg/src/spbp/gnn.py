"""Featureless graph convolutional network predicting link duty cycles.

Layer ``l`` computes ``act(X W0 + Lap X W1)`` on the conflict graph, with
leaky ReLU on hidden layers and a row-wise softmax on the two-column output.
The first output column is the predicted duty cycle of each link.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .topology import ConflictGraph

log = logging.getLogger(__name__)

DEFAULT_DIMS = (1, 32, 32, 32, 32, 2)
LEAKY_SLOPE = 0.01
FORMAT_NAME = "spbp-gcnn"
FORMAT_VERSION = 1


@dataclass
class GcnnModel:
    dims: tuple[int, ...]
    layers: list[tuple[np.ndarray, np.ndarray]]
    leaky_slope: float = LEAKY_SLOPE

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.layers) != len(self.dims) - 1:
            raise ValueError("need one parameter pair per layer")
        for l, (t0, t1) in enumerate(self.layers):
            shape = (self.dims[l], self.dims[l + 1])
            if t0.shape != shape or t1.shape != shape:
                raise ValueError(f"layer {l} parameters must have shape {shape}")
        if self.dims[0] != 1 or self.dims[-1] != 2:
            raise ValueError("input width must be 1 and output width 2")

    @classmethod
    def init(cls, dims=DEFAULT_DIMS, rng_seed=None, leaky_slope: float = LEAKY_SLOPE):
        """Uniform fan-in/fan-out initialisation."""
        rng = np.random.default_rng(rng_seed)
        layers = []
        for g_in, g_out in zip(dims[:-1], dims[1:]):
            lim = np.sqrt(6.0 / (g_in + g_out))
            layers.append((rng.uniform(-lim, lim, (g_in, g_out)),
                           rng.uniform(-lim, lim, (g_in, g_out))))
        return cls(tuple(dims), layers, leaky_slope)

    @classmethod
    def zeros(cls, dims=DEFAULT_DIMS):
        return cls(tuple(dims), [(np.zeros((a, b)), np.zeros((a, b)))
                                 for a, b in zip(dims[:-1], dims[1:])])

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def params(self) -> list[np.ndarray]:
        return [p for pair in self.layers for p in pair]

    def copy(self) -> "GcnnModel":
        return GcnnModel(self.dims, [(a.copy(), b.copy()) for a, b in self.layers], self.leaky_slope)

    def predict(self, cg: ConflictGraph) -> np.ndarray:
        return gcnn_forward(self, cg).x

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "dims": list(self.dims),
            "leaky_slope": self.leaky_slope,
            "layers": [
                {name: {"shape": list(p.shape), "data": p.ravel().tolist()}
                 for name, p in (("theta0", t0), ("theta1", t1))}
                for t0, t1 in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GcnnModel":
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not a GCNN model document")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        layers = []
        for layer in d["layers"]:
            pair = tuple(np.asarray(layer[k]["data"], dtype=float).reshape(layer[k]["shape"])
                         for k in ("theta0", "theta1"))
            layers.append(pair)
        return cls(tuple(d["dims"]), layers, float(d["leaky_slope"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "GcnnModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class DutyCyclePrediction:
    output: np.ndarray
    inputs: list[np.ndarray] = field(default_factory=list)
    aggregated: list[np.ndarray] = field(default_factory=list)
    preacts: list[np.ndarray] = field(default_factory=list)

    @property
    def x(self) -> np.ndarray:
        return self.output[:, 0]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def gcnn_forward(model: GcnnModel, cg: ConflictGraph) -> DutyCyclePrediction:
    lap = cg.laplacian
    X = np.ones((cg.num_vertices, 1))
    pred = DutyCyclePrediction(X)
    last = model.num_layers - 1
    for l, (t0, t1) in enumerate(model.layers):
        LX = lap @ X
        Z = X @ t0 + LX @ t1
        pred.inputs.append(X)
        pred.aggregated.append(LX)
        pred.preacts.append(Z)
        X = _softmax(Z) if l == last else _leaky(Z, model.leaky_slope)
    pred.output = X
    return pred


def gcnn_forward_local(model: GcnnModel, cg: ConflictGraph) -> DutyCyclePrediction:
    """Same network evaluated link by link from neighbour messages."""
    n = cg.num_vertices
    deg = cg.degrees
    nbrs = [cg.neighbors(e) for e in range(n)]
    X = np.ones((n, 1))
    last = model.num_layers - 1
    for l, (t0, t1) in enumerate(model.layers):
        out = np.empty((n, t0.shape[1]))
        for e in range(n):
            agg = X[e].copy()
            for u in nbrs[e]:
                agg -= X[u] / np.sqrt(deg[e] * deg[u])
            z = X[e] @ t0 + agg @ t1
            if l == last:
                z = np.exp(z - z.max())
                out[e] = z / z.sum()
            else:
                out[e] = np.where(z > 0, z, model.leaky_slope * z)
        X = out
    return DutyCyclePrediction(X)


def duty_cycle_target(schedules) -> np.ndarray:
    """Rows ``[mean s_e, 1 - mean s_e]`` from a ``(T, |E|)`` activation record."""
    s = np.asarray(schedules, dtype=float)
    if s.ndim != 2 or s.shape[0] == 0:
        raise ValueError("need at least one recorded schedule")
    duty = s.mean(axis=0)
    return np.stack([duty, 1.0 - duty], axis=1)


def gcnn_loss_and_grad(model: GcnnModel, cg: ConflictGraph, schedules=None, *,
                       target=None, weight_decay: float = 0.0):
    """Mean squared error against empirical duty cycles, plus
    ``weight_decay / 2 * ||params||^2``.  Returns ``(loss, grads, data_loss)``
    where ``grads`` mirrors ``model.layers``."""
    if target is None:
        target = duty_cycle_target(schedules)
    n = cg.num_vertices
    pred = gcnn_forward(model, cg)
    diff = pred.output - target
    data_loss = float(np.sum(diff ** 2) / n)
    reg = 0.5 * weight_decay * sum(float(np.sum(p ** 2)) for p in model.params())

    lap = cg.laplacian
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * model.num_layers
    dX = 2.0 * diff / n
    last = model.num_layers - 1
    for l in range(last, -1, -1):
        Z = pred.preacts[l]
        if l == last:
            S = pred.output
            dZ = S * (dX - np.sum(dX * S, axis=1, keepdims=True))
        else:
            dZ = dX * np.where(Z > 0, 1.0, model.leaky_slope)
        t0, t1 = model.layers[l]
        g0 = pred.inputs[l].T @ dZ + weight_decay * t0
        g1 = pred.aggregated[l].T @ dZ + weight_decay * t1
        grads[l] = (g0, g1)
        if l > 0:
            dX = dZ @ t0.T + lap.T @ (dZ @ t1.T)
    return data_loss + reg, grads, data_loss


class Adam:
    """Adam with L2 regularisation folded into the gradient."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, (p, g) in enumerate(zip(self.params, grads)):
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 1e-4
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def train(model: GcnnModel, instances, epochs: int = 1, optimizer: OptimizerConfig = OptimizerConfig(),
          rollout=None, log_path=None):
    """On-policy training: each instance is routed with biases from the current
    model, and the realised schedules become the regression target.

    ``instances`` is a sequence (re-iterated per epoch) of routing instances;
    ``rollout(model, instance)`` returns the ``(T, |E|)`` schedule record and
    defaults to SP-1/x routing.  Returns the model (updated in place) and a
    list of per-instance log rows.
    """
    if rollout is None:
        from .routing import duty_rollout as rollout
    params = model.params()
    opt = Adam(params, optimizer.lr, optimizer.beta1, optimizer.beta2, optimizer.eps)
    history = []
    sink = open(log_path, "w") if log_path else None
    if sink:
        sink.write("epoch,instance,loss,data_loss,wall_time\n")
    try:
        for epoch in range(epochs):
            for k, inst in enumerate(instances):
                t_start = time.perf_counter()
                try:
                    schedules = rollout(model, inst)
                    loss, grads, data_loss = gcnn_loss_and_grad(
                        model, inst.cg, schedules, weight_decay=optimizer.weight_decay)
                except Exception as exc:  # one bad instance must not end the epoch
                    log.warning("training instance %d failed: %s", k, exc)
                    history.append({"epoch": epoch, "instance": k, "error": repr(exc)})
                    continue
                opt.step([g for pair in grads for g in pair])
                row = {"epoch": epoch, "instance": k, "loss": loss, "data_loss": data_loss,
                       "wall_time": time.perf_counter() - t_start}
                history.append(row)
                if sink:
                    sink.write(f"{epoch},{k},{loss!r},{data_loss!r},{row['wall_time']:.4f}\n")
    finally:
        if sink:
            sink.close()
    return model, history
