"""Cross-entropy training with SGD, cyclical learning rate and momentum.

The learning rate follows a triangular wave between ``lr_min`` and
``lr_max``; momentum follows the opposite triangle inside [0.85, 0.95].
Bounds for the learning rate come from a range test that sweeps
log-uniformly over [0.001, 3].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import numcore as nc
from .corpus import Batch, Document, make_batches
from .errors import ContractError, NonFiniteError
from .model import ModelConfig, ModelParams, forward, init_params
from .numcore import SeededRng

log = logging.getLogger(__name__)

MOMENTUM_RANGE = (0.85, 0.95)
CYCLE_EPOCHS = 12
PATIENCE = 13
MAX_EPOCHS = 50
RANGE_TEST_SPAN = (0.001, 3.0)


def cross_entropy(probabilities, label: int) -> float:
    """``-ln p[label]`` with ``p`` clamped below at 1e-12."""
    p = np.asarray(probabilities, dtype=float).ravel()
    if not 0 <= label < p.size:
        raise ContractError(f"label {label} outside [0, {p.size})")
    return -math.log(max(p[label], nc.LOG_CLAMP))


@dataclass(frozen=True)
class CyclicalSchedule:
    lr_min: float
    lr_max: float
    half_cycle_iters: int
    momentum_min: float = MOMENTUM_RANGE[0]
    momentum_max: float = MOMENTUM_RANGE[1]

    def __post_init__(self):
        if not 0 <= self.lr_min < self.lr_max:
            raise ContractError(f"need 0 <= lr_min < lr_max, got {self.lr_min}, {self.lr_max}")
        if self.half_cycle_iters < 1:
            raise ContractError("half_cycle_iters must be positive")
        if not 0 <= self.momentum_min < self.momentum_max < 1:
            raise ContractError("need 0 <= momentum_min < momentum_max < 1")

    @classmethod
    def from_epochs(cls, lr_min, lr_max, iters_per_epoch, cycle_epochs=CYCLE_EPOCHS, **kw):
        return cls(lr_min, lr_max, max(1, (cycle_epochs * iters_per_epoch) // 2), **kw)

    def at(self, iteration: int) -> tuple[float, float]:
        return schedule_at(self, iteration)


def schedule_at(s: CyclicalSchedule, iteration: int) -> tuple[float, float]:
    """Learning rate and momentum at ``iteration`` (0-based)."""
    if iteration < 0:
        raise ContractError("iteration must be nonnegative")
    h = s.half_cycle_iters
    pos = iteration % (2 * h)
    rise = pos if pos <= h else 2 * h - pos
    frac = rise / h
    lr = s.lr_min * (1.0 - frac) + s.lr_max * frac
    # derived from lr itself so the two stay exactly mirrored
    momentum = s.momentum_max - (s.momentum_max - s.momentum_min) * (lr - s.lr_min) / (s.lr_max - s.lr_min)
    return lr, momentum


@dataclass(frozen=True)
class ConstantSchedule:
    """Fixed learning rate and momentum (used for ablations and tests)."""

    lr: float
    momentum: float = 0.9

    def at(self, iteration: int) -> tuple[float, float]:
        return self.lr, self.momentum


def sgd_momentum_step(params: dict, velocity: dict, grads: dict, lr: float, momentum: float, frozen=()):
    """Heavy-ball update in place: ``v = m v - lr g``; ``theta += v``."""
    for name, g in grads.items():
        if name in frozen:
            continue
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name!r}", name=name)
        v = velocity[name]
        v *= momentum
        v -= lr * g
        params[name] += v


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainState:
    params: ModelParams
    velocity: dict[str, np.ndarray]
    iteration: int = 0
    epoch: int = 0
    best_val_loss: float = math.inf
    best_epoch: int = 0
    best_params: ModelParams | None = None
    history: list[EpochRecord] = field(default_factory=list)

    def history_tsv(self) -> str:
        lines = ["epoch\ttrain_loss\tval_loss\tval_acc\tlr"]
        for h in self.history:
            lines.append(f"{h.epoch}\t{h.train_loss!r}\t{h.val_loss!r}\t{h.val_acc!r}\t{h.lr!r}")
        return "\n".join(lines) + "\n"


def batch_loss_and_grads(params: ModelParams, batch: Batch, rng: SeededRng | None, training: bool = True):
    """Mean cross-entropy over the batch and its gradient for every tensor."""
    tape = nc.Tape()
    tensors = params.tensors(tape)
    out = forward(tensors, params.config, batch, training=training, rng=rng)
    loss = nc.cross_entropy(out.probabilities, batch.labels)
    grads = nc.backward(tape, loss)
    return loss.item(), grads


def evaluate(params: ModelParams, docs: Sequence[Document], batch_size: int = 128) -> tuple[float, float]:
    """Mean cross-entropy and accuracy in evaluation mode."""
    if not docs:
        raise ContractError("cannot evaluate on an empty split")
    tensors = params.tensors()
    total, correct = 0.0, 0
    for batch in make_batches(docs, batch_size):
        probs = forward(tensors, params.config, batch).probabilities.value
        rows = np.arange(batch.size)
        total += float(-np.log(np.maximum(probs[rows, batch.labels], nc.LOG_CLAMP)).sum())
        correct += int((probs.argmax(axis=1) == batch.labels).sum())
    return total / len(docs), correct / len(docs)


def train(
    config: ModelConfig,
    train_docs: Sequence[Document],
    val_docs: Sequence[Document],
    seed: int = 0,
    schedule=None,
    lr_min: float | None = None,
    lr_max: float | None = None,
    batch_size: int = 64,
    cycle_epochs: int = CYCLE_EPOCHS,
    max_epochs: int = MAX_EPOCHS,
    patience: int = PATIENCE,
    params: ModelParams | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainState:
    """Train with bucketed mini-batches and early stopping on ``val_docs``.

    Either pass a ``schedule`` (anything with ``at(iteration)``) or
    ``lr_min``/``lr_max`` for a triangular schedule with ``cycle_epochs``-long
    cycles.  Stops after ``max_epochs`` or once the monitored loss has not
    improved for ``patience`` epochs; ``best_params`` holds the best epoch.
    """
    if not train_docs or not val_docs:
        raise ContractError("training needs non-empty train and validation splits")
    iters_per_epoch = math.ceil(len(train_docs) / batch_size)
    if schedule is None:
        if lr_min is None or lr_max is None:
            raise ContractError("give a schedule or both lr_min and lr_max")
        schedule = CyclicalSchedule.from_epochs(lr_min, lr_max, iters_per_epoch, cycle_epochs)
    root = SeededRng(seed)
    params = params.copy() if params is not None else init_params(config, seed)
    state = TrainState(params=params, velocity={k: np.zeros_like(v) for k, v in params.arrays.items()})
    batch_rng, drop_rng = root.substream("batches"), root.substream("dropout")
    frozen = () if config.trainable_embeddings else ("embeddings",)

    for epoch in range(1, max_epochs + 1):
        running, seen = 0.0, 0
        lr = schedule.at(state.iteration)[0]
        for batch in make_batches(train_docs, batch_size, batch_rng):
            lr, momentum = schedule.at(state.iteration)
            loss, grads = batch_loss_and_grads(state.params, batch, drop_rng)
            sgd_momentum_step(state.params.arrays, state.velocity, grads, lr, momentum, frozen)
            running += loss * batch.size
            seen += batch.size
            state.iteration += 1
        val_loss, val_acc = evaluate(state.params, val_docs)
        rec = EpochRecord(epoch, running / seen, val_loss, val_acc, lr)
        state.history.append(rec)
        state.epoch = epoch
        log.info("epoch %d train %.4f val %.4f acc %.4f lr %.4g", epoch, rec.train_loss, val_loss, val_acc, lr)
        if on_epoch is not None:
            on_epoch(rec)
        if val_loss < state.best_val_loss:
            state.best_val_loss, state.best_epoch = val_loss, epoch
            state.best_params = state.params.copy()
        elif epoch - state.best_epoch >= patience:
            break
    return state


# ---------------------------------------------------------------------------
# learning-rate range test


@dataclass
class RangeTestResult:
    lrs: list[float]
    losses: list[float]
    smoothed: list[float]
    lr_min: float
    lr_max: float
    diverged_at: int | None = None

    def to_tsv(self) -> str:
        lines = ["iter\tlr\tsmoothed_loss"]
        lines += [f"{k}\t{lr!r}\t{s!r}" for k, (lr, s) in enumerate(zip(self.lrs, self.smoothed))]
        return "\n".join(lines) + "\n"


class RangeTestDiverged(NonFiniteError):
    def __init__(self, message, curve):
        super().__init__(message)
        self.curve = curve


def range_test_lrs(iters: int, span=RANGE_TEST_SPAN) -> np.ndarray:
    lo, hi = span
    lrs = np.geomspace(lo, hi, iters)
    lrs[0], lrs[-1] = lo, hi
    return lrs


def run_range_test(step: Callable[[float], float], iters: int, span=RANGE_TEST_SPAN, smoothing: float = 0.98):
    """Drive ``step(lr) -> loss`` over a log-uniform learning-rate sweep.

    Losses are smoothed with a bias-corrected exponential moving average.
    The suggested ``lr_max`` is the rate at the lowest smoothed loss divided
    by 3 (ties go to the larger rate) and ``lr_min = lr_max / 10``.
    """
    if iters < 10:
        raise ContractError("a range test needs at least 10 iterations")
    lrs = range_test_lrs(iters, span)
    losses, smoothed = [], []
    avg = 0.0
    diverged = None
    for k, lr in enumerate(lrs):
        loss = float(step(float(lr)))
        if not math.isfinite(loss):
            if k == 0:
                raise RangeTestDiverged(f"loss is not finite at the first rate {lr}", list(zip(lrs[:1], [loss])))
            diverged = k
            break
        losses.append(loss)
        avg = smoothing * avg + (1 - smoothing) * loss
        smoothed.append(avg / (1 - smoothing ** (k + 1)))
    tried = [float(x) for x in lrs[: len(smoothed)]]
    best = min(smoothed)
    tol = 1e-12 * max(1.0, abs(best))
    pick = max(k for k, s in enumerate(smoothed) if s <= best + tol)
    lr_max = tried[pick] / 3.0
    return RangeTestResult(tried, losses, smoothed, lr_max / 10.0, lr_max, diverged)


def lr_range_test(
    config: ModelConfig,
    train_docs: Sequence[Document],
    val_docs: Sequence[Document],
    iters: int = 100,
    seed: int = 0,
    batch_size: int = 64,
    span=RANGE_TEST_SPAN,
    momentum: float = MOMENTUM_RANGE[1],
    params: ModelParams | None = None,
) -> RangeTestResult:
    """Range test: one SGD step per rate on a training batch, loss on a validation batch."""
    root = SeededRng(seed)
    params = params.copy() if params is not None else init_params(config, seed)
    velocity = {k: np.zeros_like(v) for k, v in params.arrays.items()}
    batch_rng, drop_rng = root.substream("range-batches"), root.substream("range-dropout")
    frozen = () if config.trainable_embeddings else ("embeddings",)
    val_batches = make_batches(val_docs, batch_size, root.substream("range-val"))
    tensors = params.tensors()
    train_batches: list[Batch] = []
    counter = {"k": 0}

    def step(lr):
        if not train_batches:
            train_batches.extend(make_batches(train_docs, batch_size, batch_rng))
        batch = train_batches.pop()
        _, grads = batch_loss_and_grads(params, batch, drop_rng)
        try:
            sgd_momentum_step(params.arrays, velocity, grads, lr, momentum, frozen)
        except NonFiniteError:
            return math.nan
        vb = val_batches[counter["k"] % len(val_batches)]
        counter["k"] += 1
        probs = forward(tensors, config, vb).probabilities.value
        picked = probs[np.arange(vb.size), vb.labels]
        return float(-np.log(np.maximum(picked, nc.LOG_CLAMP)).mean())

    return run_range_test(step, iters, span)


def write_tsv(path, text: str):
    Path(path).write_text(text, encoding="utf-8")
