"""Full-batch SGD training with validation-based model selection, plus a
finite-difference gradient checker."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from ..metrics import balanced_accuracy
from .autodiff import NonFiniteError
from .model import (
    GraphInputs,
    ModelConfig,
    ModelState,
    class_weight_vector,
    forward,
    loss_and_grads,
)

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, trace: "TrainingTrace", reason: str):
        self.epoch = epoch
        self.trace = trace
        super().__init__(f"training diverged at epoch {epoch}: {reason}")


@dataclass
class TrainingTrace:
    epoch: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    train_bacc: list[float] = field(default_factory=list)
    val_bacc: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val: float = float("-inf")

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["epoch", "loss", "train_balanced_accuracy", "val_balanced_accuracy"])
        for row in zip(self.epoch, self.loss, self.train_bacc, self.val_bacc):
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
        return out.getvalue()


def _bacc(probs: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return float("nan")
    return balanced_accuracy(labels[mask], probs[mask].argmax(axis=1))


def train(config: ModelConfig, inputs: GraphInputs, labels: np.ndarray,
          train_mask: np.ndarray, val_mask: np.ndarray, num_classes: int | None = None,
          init: ModelState | None = None) -> tuple[ModelState, TrainingTrace]:
    """Train with plain SGD; return the state of the best validation epoch.

    Epoch 0 is the untrained model. Ties in validation balanced accuracy keep
    the earlier epoch. ``config.patience`` (if set) stops after that many
    epochs without improvement.
    """
    labels = np.asarray(labels, dtype=np.int64)
    train_mask = np.asarray(train_mask, dtype=bool)
    val_mask = np.asarray(val_mask, dtype=bool)
    if np.any(train_mask & val_mask):
        raise ValueError("train and validation masks overlap")
    if not train_mask.any():
        raise ValueError("empty training mask")
    num_classes = int(labels.max()) + 1 if num_classes is None else num_classes

    rng = np.random.default_rng(config.seed)
    state = init.copy() if init is not None else ModelState.initialise(
        config, inputs.n_first, num_classes, rng)
    cw = class_weight_vector(labels, train_mask, num_classes, config.class_weights)

    trace = TrainingTrace()
    try:
        probs = forward(state, inputs)
    except NonFiniteError as err:
        raise TrainingDiverged(0, trace, str(err)) from err
    trace.epoch.append(0)
    trace.loss.append(float("nan"))
    trace.train_bacc.append(_bacc(probs, labels, train_mask))
    trace.val_bacc.append(_bacc(probs, labels, val_mask))
    best = state.copy()
    trace.best_epoch, trace.best_val = 0, trace.val_bacc[-1]

    for epoch in range(1, config.max_epochs + 1):
        try:
            loss, grads = loss_and_grads(state, inputs, labels, train_mask, cw, rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, trace, f"loss {loss}")
            if config.lr:
                for k, g in grads.items():
                    state.weights[k] -= config.lr * g
            state.epoch = epoch
            probs = forward(state, inputs)
        except NonFiniteError as err:
            raise TrainingDiverged(epoch, trace, str(err)) from err
        tr, va = _bacc(probs, labels, train_mask), _bacc(probs, labels, val_mask)
        trace.epoch.append(epoch)
        trace.loss.append(loss)
        trace.train_bacc.append(tr)
        trace.val_bacc.append(va)
        if va > trace.best_val:
            trace.best_epoch, trace.best_val = epoch, va
            best = state.copy()
        elif config.patience is not None and epoch - trace.best_epoch >= config.patience:
            break
    best.rng_state = rng.bit_generator.state
    return best, trace


@dataclass
class GradientCheckReport:
    checked: int
    mismatches: list[tuple[str, tuple[int, int], float, float]]
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return not self.mismatches


def numeric_gradients(state: ModelState, inputs: GraphInputs, labels, mask, class_weights,
                      step: float = 1e-6) -> dict[str, np.ndarray]:
    """Central finite differences of the (dropout-free) loss for every weight entry."""
    probe = state.copy()
    out = {}
    for name, w in probe.weights.items():
        g = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            orig = w[idx]
            w[idx] = orig + step
            up, _ = loss_and_grads(probe, inputs, labels, mask, class_weights)
            w[idx] = orig - step
            down, _ = loss_and_grads(probe, inputs, labels, mask, class_weights)
            w[idx] = orig
            g[idx] = (up - down) / (2 * step)
        out[name] = g
    return out


def gradient_check(state: ModelState, inputs: GraphInputs, labels, mask,
                   class_weights=None, rtol: float = 1e-5, atol: float = 1e-8,
                   step: float = 1e-6, analytic=None) -> GradientCheckReport:
    """Compare analytic gradients to central differences entry by entry.

    An entry passes if ``|a - n| <= atol`` or ``|a - n| <= rtol * max(|a|, |n|)``.
    ``analytic`` overrides the gradients under test (used for negative controls).
    """
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if class_weights is None:
        class_weights = class_weight_vector(labels, mask, state.num_classes)
    if analytic is None:
        _, analytic = loss_and_grads(state, inputs, labels, mask, class_weights)
    numeric = numeric_gradients(state, inputs, labels, mask, class_weights, step)
    mismatches = []
    worst = 0.0
    checked = 0
    for name in state.weights:
        a, n = analytic[name], numeric[name]
        for idx in np.ndindex(*a.shape):
            checked += 1
            diff = abs(a[idx] - n[idx])
            scale_ = max(abs(a[idx]), abs(n[idx]))
            rel = diff / scale_ if scale_ > 0 else 0.0
            if diff > atol:
                worst = max(worst, rel)
            if diff > atol and diff > rtol * scale_:
                mismatches.append((name, idx, float(a[idx]), float(n[idx])))
    return GradientCheckReport(checked, mismatches, worst)
