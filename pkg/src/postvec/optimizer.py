"""Mini-batch gradient descent with Nesterov momentum and the
validation-driven learning-rate halving schedule.

The Nesterov update uses the lookahead-gradient form: gradients are
evaluated at theta + mu * v, then

    v     <-  mu * v - eta * grad(theta + mu * v)
    theta <-  theta + v

After every epoch the validation precision@1 is compared with the
previous epoch's; if it improved by less than the halving threshold
(0.01 percentage points by default, negative improvements included) the
learning rate is halved. Training stops after ``patience`` epochs
without a new best validation precision@1, or at ``max_epochs``.

Single-threaded runs with the same seed, config, and kernel backend are
bit-deterministic; thread-parallel BLAS may break that, so determinism
is only promised for single-threaded execution.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import data as data_mod
from . import evaluation, model as model_mod
from .errors import ConfigError, DivergenceError
from .model import Model
from .tensor import SeededRng


@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    l2: float = 0.001
    init_sigma: float = 0.1
    halving_threshold: float = 0.01     # percentage points of precision@1
    patience: int = 5
    max_epochs: int = 30
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1 or self.learning_rate <= 0 or self.init_sigma <= 0 \
                or self.patience < 1 or self.max_epochs < 1:
            raise ConfigError(f"invalid training configuration: {self}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.l2 < 0 or self.halving_threshold < 0:
            raise ConfigError(f"invalid training configuration: {self}")


@dataclass
class OptimizerState:
    velocity: dict[str, np.ndarray]
    learning_rate: float
    momentum: float
    halving_threshold: float
    epoch: int = 0
    best_val_p1: float = -math.inf
    prev_val_p1: float = -math.inf
    n_halvings: int = 0


def init_optimizer_state(model: Model, config: TrainConfig) -> OptimizerState:
    velocity = {name: np.zeros_like(arr) for name, arr in model_mod.named_tensors(model)}
    return OptimizerState(velocity=velocity, learning_rate=config.learning_rate,
                          momentum=config.momentum,
                          halving_threshold=config.halving_threshold)


def lookahead(model: Model, state: OptimizerState) -> Model:
    """Copy of the model shifted to theta + mu * v, where gradients are taken."""
    shifted = model_mod.copy_params(model)
    for name, arr in model_mod.named_tensors(shifted):
        arr += state.momentum * state.velocity[name]
    return shifted


def nesterov_step(model: Model, grads: dict[str, np.ndarray],
                  state: OptimizerState) -> None:
    """In-place velocity and parameter update; grads must come from the
    lookahead point."""
    for name, arr in model_mod.named_tensors(model):
        g = grads[name]
        if g.shape != arr.shape:
            raise ConfigError(
                f"gradient shape {g.shape} != parameter shape {arr.shape} for {name}")
        v = state.velocity[name]
        v *= state.momentum
        v -= state.learning_rate * g
        arr += v


def lr_schedule(state: OptimizerState, current_val_p1: float) -> OptimizerState:
    """Halve the rate unless precision@1 improved by at least the threshold."""
    improvement_pp = (current_val_p1 - state.prev_val_p1) * 100.0
    if improvement_pp < state.halving_threshold:
        state.learning_rate /= 2.0
        state.n_halvings += 1
    state.prev_val_p1 = current_val_p1
    return state


@dataclass
class EpochRecord:
    epoch: int
    mean_train_loss: float
    val_precision_at_1: float
    learning_rate: float    # rate used during this epoch
    clamped: int
    seconds: float

    def as_record(self) -> dict:
        return {
            "epoch": self.epoch,
            "mean_train_loss": self.mean_train_loss,
            "val_precision_at_1": self.val_precision_at_1,
            "learning_rate": self.learning_rate,
            "clamped": self.clamped,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class TrainResult:
    best_model: Model
    final_model: Model
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    state: OptimizerState | None = None


def train(model: Model, train_examples: Sequence[data_mod.LabeledExample],
          val_examples: Sequence[data_mod.LabeledExample], config: TrainConfig,
          rng: SeededRng | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None,
          on_improve: Callable[[Model, int], None] | None = None) -> TrainResult:
    """Run the full training loop; returns the best checkpoint by
    validation precision@1 along with the final model and the epoch log."""
    config.validate()
    if not train_examples or not val_examples:
        raise ConfigError("training and validation sets must be nonempty")
    if rng is None:
        rng = SeededRng(config.seed)

    state = init_optimizer_state(model, config)
    best = model_mod.copy_params(model)
    best_epoch = 0
    epochs_since_improvement = 0
    log: list[EpochRecord] = []

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        state.epoch = epoch
        rate_this_epoch = state.learning_rate
        batches = data_mod.make_batches(train_examples, model.table,
                                        model.n_labels, config.batch_size, rng)
        losses = []
        clamped = 0
        for bi, batch in enumerate(batches):
            shifted = lookahead(model, state)
            fw = model_mod.forward_batch(shifted, batch.sequences, batch.targets,
                                         config.l2)
            if not math.isfinite(fw.value):
                raise DivergenceError(epoch, bi, state.learning_rate)
            grads = model_mod.gradients(shifted, fw, batch.targets, config.l2)
            nesterov_step(model, grads, state)
            losses.append(fw.value)
            clamped += fw.clamped

        report = evaluation.evaluate(model, val_examples,
                                     batch_size=max(config.batch_size, 256))
        val_p1 = report.precision_at_1
        if val_p1 > state.best_val_p1:
            state.best_val_p1 = val_p1
            best = model_mod.copy_params(model)
            best_epoch = epoch
            epochs_since_improvement = 0
            if on_improve is not None:
                on_improve(best, epoch)
        else:
            epochs_since_improvement += 1
        lr_schedule(state, val_p1)

        record = EpochRecord(epoch=epoch, mean_train_loss=float(np.mean(losses)),
                             val_precision_at_1=val_p1,
                             learning_rate=rate_this_epoch, clamped=clamped,
                             seconds=time.perf_counter() - started)
        log.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if epochs_since_improvement >= config.patience:
            break

    return TrainResult(best_model=best, final_model=model, log=log,
                       best_epoch=best_epoch, state=state)
