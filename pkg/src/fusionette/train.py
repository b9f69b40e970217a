"""Mini-batch SGD training with validation-loss early stopping.

Each epoch shuffles with a seeded generator, keeps the final short
batch, and runs one fresh tape per batch. Training stops once the
validation loss has failed to improve (strict decrease, no min-delta)
for `patience` consecutive epochs, and the weights from the best epoch
are restored before returning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tape, Tensor, backward, cross_entropy, sgd_step
from .data import DatasetSplit, split_arrays
from .errors import DataError, DimensionError, TrainingError
from .fusion import VariantSpec, forward_batch
from .metrics import MetricsReport, average_reports, confusion_matrix, report_from_confusion
from .model import Model, init_model

_EVAL_CHUNK = 1024


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    runs: int = 3

    def __post_init__(self):
        if self.lr < 0 or not math.isfinite(self.lr):
            raise ValueError(f"lr must be finite and >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "runs": self.runs,
        }


@dataclass
class TrainHistory:
    """Per-epoch curves; epochs are numbered from 1."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
        }


class EarlyStopper:
    """Tracks the best validation loss; stops after `patience` bad epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self._bad_streak = 0

    def update(self, epoch: int, val_loss: float) -> tuple[bool, bool]:
        """Returns (improved, stop_now)."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self._bad_streak = 0
            return True, False
        self._bad_streak += 1
        return False, self._bad_streak >= self.patience


def _check_split(split: DatasetSplit, spec: VariantSpec, role: str) -> None:
    if len(split) == 0:
        raise TrainingError(f"{role} split is empty")
    if split.d_i != spec.d_i or split.d_t != spec.d_t:
        raise DimensionError(
            f"{role} split dims ({split.d_i}, {split.d_t}) do not match "
            f"spec ({spec.d_i}, {spec.d_t})"
        )
    worst = max(r.label for r in split.records)
    if worst >= spec.num_classes:
        raise DataError(f"{role} split has label {worst} >= num_classes {spec.num_classes}")


def _forward_chunks(model: Model, f_i: np.ndarray, f_t: np.ndarray) -> np.ndarray:
    """Inference-mode logits over a whole array pair, chunked."""
    outs = []
    for start in range(0, len(f_i), _EVAL_CHUNK):
        stop = start + _EVAL_CHUNK
        logits = forward_batch(model, Tensor(f_i[start:stop]), Tensor(f_t[start:stop]))
        outs.append(logits.data)
    return np.concatenate(outs, axis=0)


def _val_metrics(model: Model, f_i, f_t, y) -> tuple[float, float]:
    logits = _forward_chunks(model, f_i, f_t)
    loss = cross_entropy(Tensor(logits), y).item()
    acc = float((logits.argmax(axis=1) == y).mean())
    return loss, acc


def train(
    spec: VariantSpec,
    cfg: TrainConfig,
    train_split: DatasetSplit,
    val_split: DatasetSplit,
) -> tuple[Model, TrainHistory]:
    """Train one model; returns it with the best-validation-epoch weights restored."""
    _check_split(train_split, spec, "train")
    _check_split(val_split, spec, "validation")
    fi, ft, y = split_arrays(train_split)
    fi_v, ft_v, y_v = split_arrays(val_split)

    model = init_model(spec, cfg.seed)
    params = model.param_list()
    rng = np.random.default_rng(cfg.seed)
    stopper = EarlyStopper(cfg.patience)
    history = TrainHistory()
    best_state = [p.data.copy() for p in params]

    n = len(train_split)
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        running = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            with Tape():
                logits = forward_batch(model, Tensor(fi[idx]), Tensor(ft[idx]))
                loss = cross_entropy(logits, y[idx])
                backward(loss)
            sgd_step(params, cfg.lr)
            running += loss.item() * len(idx)
        val_loss, val_acc = _val_metrics(model, fi_v, ft_v, y_v)
        history.train_loss.append(running / n)
        history.val_loss.append(val_loss)
        history.val_accuracy.append(val_acc)
        improved, stop = stopper.update(epoch, val_loss)
        if improved:
            best_state = [p.data.copy() for p in params]
        if stop:
            history.stopped_early = True
            break
    history.best_epoch = stopper.best_epoch
    for p, state in zip(params, best_state):
        p.data = state
        p.grad = None
    return model, history


def evaluate(model: Model, split: DatasetSplit) -> MetricsReport:
    """Confusion matrix and F1 metrics of the model's predictions over a split."""
    _check_split(split, model.spec, "evaluation")
    fi, ft, y = split_arrays(split)
    logits = _forward_chunks(model, fi, ft)
    preds = logits.argmax(axis=1)
    return report_from_confusion(confusion_matrix(y, preds, model.spec.num_classes))


@dataclass
class MultiRunResult:
    average: MetricsReport
    per_run: list[MetricsReport]
    models: list[Model]
    histories: list[TrainHistory]


def multi_run(
    spec: VariantSpec,
    cfg: TrainConfig,
    train_split: DatasetSplit,
    val_split: DatasetSplit,
    test_split: DatasetSplit,
) -> MultiRunResult:
    """Repeat training with seeds cfg.seed + i and average test metrics."""
    per_run, models, histories = [], [], []
    for i in range(cfg.runs):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        model, history = train(spec, run_cfg, train_split, val_split)
        per_run.append(evaluate(model, test_split))
        models.append(model)
        histories.append(history)
    return MultiRunResult(average_reports(per_run), per_run, models, histories)
