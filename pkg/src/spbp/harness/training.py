"""GCNN training driver."""
from __future__ import annotations

import logging

import numpy as np

from ..gnn import DEFAULT_DIMS, GcnnModel, OptimizerConfig, train
from .config import seed_for
from .instances import TrainingCorpus, TrainingSettings

log = logging.getLogger(__name__)


def train_model(settings: TrainingSettings = TrainingSettings(), epochs: int = 1,
                optimizer: OptimizerConfig = OptimizerConfig(), dims=DEFAULT_DIMS,
                log_path=None, model: GcnnModel | None = None):
    """Fresh (or continued) on-policy training over a deterministic corpus."""
    if model is None:
        model = GcnnModel.init(dims, rng_seed=seed_for(settings.seed, "model"))
    corpus = TrainingCorpus(settings)
    model, history = train(model, corpus, epochs, optimizer, log_path=log_path)
    losses = [h["loss"] for h in history if "loss" in h]
    failed = sum(1 for h in history if "error" in h)
    if failed:
        log.warning("%d training instances failed and were skipped", failed)
    return model, history, losses


def loss_progress(losses, window: int = 50) -> tuple[float, float]:
    """Median loss over the first and the last ``window`` instances."""
    if len(losses) < 2 * window:
        raise ValueError(f"need at least {2 * window} losses")
    return float(np.median(losses[:window])), float(np.median(losses[-window:]))
