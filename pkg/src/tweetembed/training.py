"""Mini-batch Adam training with per-epoch train/validation loss logging."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import DatasetSplit
from .model import (
    PARAM_FIELDS,
    Gradients,
    ModelHyper,
    ModelParams,
    as_arrays,
    backward_arrays,
    evaluate,
    init_params,
    save_checkpoint,
)
from .rng import derive_seed, permutation


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 256
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 13
    deterministic: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class AdamState:
    """First/second moment accumulators (keyed by parameter name) and step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS},
            v={name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS},
        )


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    validation_loss: float
    wall_seconds: float


class NonFiniteGradientError(RuntimeError):
    """A gradient array contained NaN or infinity; names the matrix."""


class TrainingDiverged(RuntimeError):
    """Training loss exploded or went non-finite; the last good checkpoint is kept."""


def adam_step(params: ModelParams, grads: Gradients, state: AdamState,
              cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, applied to the parameters in place.

    m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), with m_hat = m / (1 - b1^t).
    """
    state.t += 1
    t = state.t
    for name in PARAM_FIELDS:
        g = getattr(grads, name)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {name} at step {t}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        m_hat = m / (1.0 - cfg.beta1 ** t)
        v_hat = v / (1.0 - cfg.beta2 ** t)
        getattr(params, name)[...] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def train(split: DatasetSplit, hyper: ModelHyper, cfg: TrainConfig,
          checkpoint_path: Path | str | None = None, vocab_hash: str = "",
          on_epoch: Callable[[EpochLog], None] | None = None,
          ) -> tuple[ModelParams, list[EpochLog]]:
    """Full training loop.

    Per epoch: reshuffle the train tuples with a seed derived from
    (cfg.seed, epoch), apply Adam over mini-batches, then evaluate mean
    cross entropy on the full train and validation sets and emit an
    EpochLog. A checkpoint is written after every successful epoch; on
    divergence (train loss non-finite or above 10x the fresh-init loss)
    training aborts and the last good checkpoint stays on disk. With
    cfg.deterministic, wall_seconds is recorded as 0.0 so logs are
    byte-reproducible.
    """
    if not split.train:
        raise ValueError("training split is empty")
    params = init_params(hyper, cfg.seed)
    state = AdamState.for_params(params)
    train_ctx, train_tgt = as_arrays(split.train)
    val_ctx, val_tgt = (as_arrays(split.validation) if split.validation else (None, None))

    initial_loss = evaluate(params, train_ctx, train_tgt)
    n = train_tgt.shape[0]
    logs: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = np.asarray(permutation(n, derive_seed(cfg.seed, epoch)), dtype=np.int64)
        for start in range(0, n, cfg.batch_size):
            sel = order[start : start + cfg.batch_size]
            grads, _ = backward_arrays(params, train_ctx[sel], train_tgt[sel])
            adam_step(params, grads, state, cfg)
        train_loss = evaluate(params, train_ctx, train_tgt)
        val_loss = (
            evaluate(params, val_ctx, val_tgt) if val_tgt is not None else math.nan
        )
        wall = 0.0 if cfg.deterministic else time.perf_counter() - started
        if not math.isfinite(train_loss) or train_loss > 10.0 * initial_loss:
            raise TrainingDiverged(
                f"train loss {train_loss:.4f} at epoch {epoch} "
                f"(initial {initial_loss:.4f}); keeping last good checkpoint"
            )
        entry = EpochLog(epoch, train_loss, val_loss, wall)
        logs.append(entry)
        if checkpoint_path is not None:
            save_checkpoint(params, checkpoint_path, cfg.seed, vocab_hash)
        if on_epoch is not None:
            on_epoch(entry)
    return params, logs


@dataclass
class TimingSummary:
    avg_seconds_per_epoch: float
    total_seconds: float


def timing_report(logs: Sequence[EpochLog]) -> TimingSummary:
    if not logs:
        raise ValueError("timing report needs at least one epoch log")
    total = sum(entry.wall_seconds for entry in logs)
    return TimingSummary(avg_seconds_per_epoch=total / len(logs), total_seconds=total)


def write_run_log(logs: Sequence[EpochLog], path: Path | str) -> None:
    """Line-delimited records `epoch<TAB>train_loss<TAB>val_loss<TAB>secs`."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for entry in logs:
            fh.write(
                f"{entry.epoch}\t{entry.train_loss:.6f}"
                f"\t{entry.validation_loss:.6f}\t{entry.wall_seconds:.3f}\n"
            )


def read_run_log(path: Path | str) -> list[EpochLog]:
    path = Path(path)
    logs: list[EpochLog] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            epoch, train_loss, val_loss, secs = line.rstrip("\n").split("\t")
            logs.append(EpochLog(int(epoch), float(train_loss), float(val_loss), float(secs)))
    return logs
