"""Full-sequence BPTT training loop: one series per gradient step."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..simgen import Dataset
from . import model as tn
from .optim import make_optimizer


class TrainingFailure(RuntimeError):
    """Training diverged; carries the epoch log collected so far."""

    def __init__(self, message: str, log: list[dict]):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class TrainOpts:
    optimizer: str = "adam"
    lr: float = 0.005
    epochs: int = 200
    seed: int = 0
    dropout: float | None = None  # None -> use spec.dropout


def train(spec: tn.RnnSpec, dataset: Dataset, opts: TrainOpts):
    """Train on a training dataset; returns ``(params, log)``.

    Deterministic in ``(spec, dataset, opts)``: the seed drives the weight
    init, the per-epoch shuffling and the dropout masks.  Divergence (NaN
    loss, or an epoch loss above 10x the first epoch for 3 epochs running)
    raises :class:`TrainingFailure`.
    """
    spec.validate()
    if dataset.role != "train":
        raise ValueError(f"training needs a train dataset, got role={dataset.role!r}")
    dropout = spec.dropout if opts.dropout is None else opts.dropout

    rng = np.random.default_rng(opts.seed)
    params = tn.init_params(spec, rng)
    optimizer = make_optimizer(opts.optimizer, opts.lr)

    prepared = []
    for s in dataset:
        inputs, _ = tn.series_to_inputs(s.y)
        prepared.append((inputs, np.asarray(s.labels, dtype=int)))

    log: list[dict] = []
    initial_loss = None
    if opts.epochs > 0:
        # divergence is judged against the loss of the untouched init
        initial_loss = float(np.mean([
            tn.sequence_loss(tn.forward(params, spec, inputs)[0], labels)
            for inputs, labels in prepared
        ]))
    bad_epochs = 0
    for epoch in range(opts.epochs):
        order = rng.permutation(len(prepared))
        total = 0.0
        for idx in order:
            inputs, labels = prepared[idx]
            probs, cache = tn.forward(params, spec, inputs,
                                      dropout=dropout, rng=rng)
            total += tn.sequence_loss(probs, labels)
            grads = tn.backward(params, spec, cache, labels)
            optimizer.step(params, grads)
        mean_loss = total / len(prepared)
        log.append({"epoch": epoch, "loss": mean_loss})
        if not np.isfinite(mean_loss):
            raise TrainingFailure(f"loss became non-finite at epoch {epoch}", log)
        bad_epochs = bad_epochs + 1 if mean_loss > 10.0 * initial_loss else 0
        if bad_epochs >= 3:
            raise TrainingFailure(
                f"loss exceeded 10x the initial level for 3 epochs (epoch {epoch})", log)
    return params, log


def training_scale(dataset: Dataset) -> float:
    """Median of the per-series input scales; logged with trained models."""
    scales = [tn.series_to_inputs(s.y)[1] for s in dataset]
    return float(np.median(scales))
