"""Pretext-task training loop."""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dupless.exceptions import ConfigError

from .exceptions import DivergenceDetected, EmptyDataset, ShapeMismatch
from .network import NetworkParams, NetworkSpec, forward, loss_grad_and_logits, pixels_to_batch
from .optim import OPTIMIZERS, make_optimizer

logger = logging.getLogger(__name__)

LOG_FIELDS = ['epoch', 'loss', 'accuracy', 'holdout_accuracy']


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 0.0001
    epochs: int = 60
    optimizer: str = 'adam'
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer.lower() not in OPTIMIZERS:
            raise ConfigError(f"Unknown optimizer '{self.optimizer}', expected one of {sorted(OPTIMIZERS)}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    holdout_accuracy: float = float('nan')


@dataclass
class TrainingResult:
    params: NetworkParams
    log: list = field(default_factory=list)

    @property
    def final_holdout_accuracy(self) -> float:
        return self.log[-1].holdout_accuracy if self.log else float('nan')

    def write_log(self, path) -> Path:
        path = Path(path)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(LOG_FIELDS)
            for record in self.log:
                writer.writerow([record.epoch, f"{record.loss:.6f}", f"{record.accuracy:.6f}",
                                 '' if math.isnan(record.holdout_accuracy) else f"{record.holdout_accuracy:.6f}"])
        return path


def _stack_examples(examples, spec):
    if not examples:
        return np.zeros((0, spec.input_side, spec.input_side, 3), np.uint8), np.zeros(0, np.int64)
    pixels = np.stack([np.asarray(example.patch.pixels) for example in examples])
    if pixels.shape[1:] != (spec.input_side, spec.input_side, spec.input_channels):
        raise ShapeMismatch(f"Pretext patches have shape {pixels.shape[1:]}, network expects side {spec.input_side}")
    labels = np.array([int(example.label) for example in examples], dtype=np.int64)
    return pixels, labels


def evaluate_accuracy(params, pixels, labels, batch_size=64) -> float:
    """Fraction of examples whose argmax logit matches the label"""
    if len(labels) == 0:
        return float('nan')
    correct = 0
    for start in range(0, len(labels), batch_size):
        logits, _ = forward(params, pixels_to_batch(pixels[start:start + batch_size]))
        correct += int((logits.argmax(axis=1) == labels[start:start + batch_size]).sum())
    return correct / len(labels)


def train_pretext(spec: NetworkSpec, config: TrainConfig, examples, holdout=()) -> TrainingResult:
    """Train from seeded random weights on pretext examples.

    Runs ``epochs x ceil(N / batch_size)`` optimizer steps over minibatches
    reshuffled each epoch from ``config.seed``. ``holdout`` examples, when
    given, are scored after every epoch and never trained on.
    """
    pixels, labels = _stack_examples(list(examples), spec)
    if len(labels) == 0:
        raise EmptyDataset("No pretext examples to train on")
    holdout_pixels, holdout_labels = _stack_examples(list(holdout), spec)

    params = NetworkParams.initialize(spec, config.seed)
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    rng = np.random.default_rng(config.seed + 1)
    steps_per_epoch = math.ceil(len(labels) / config.batch_size)
    logger.info(
        f"Training on {len(labels)} pretext examples ({len(holdout_labels)} held out): "
        f"{config.epochs} epochs x {steps_per_epoch} steps, {config.optimizer}, lr {config.learning_rate}"
    )

    result = TrainingResult(params=params)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(labels))
        total_loss, correct = 0.0, 0
        for step in range(steps_per_epoch):
            index = order[step * config.batch_size:(step + 1) * config.batch_size]
            batch = pixels_to_batch(pixels[index])
            loss, grads, logits = loss_grad_and_logits(params, batch, labels[index])
            if not np.isfinite(loss):
                raise DivergenceDetected(f"Loss became {loss} at epoch {epoch}, step {step + 1}")
            correct += int((logits.argmax(axis=1) == labels[index]).sum())
            total_loss += loss * len(index)
            optimizer.step(params, grads)

        record = EpochRecord(
            epoch=epoch,
            loss=total_loss / len(labels),
            accuracy=correct / len(labels),
            holdout_accuracy=evaluate_accuracy(params, holdout_pixels, holdout_labels),
        )
        result.log.append(record)
        logger.info(
            f"Epoch {epoch}/{config.epochs}: loss {record.loss:.4f}, "
            f"accuracy {record.accuracy:.3f}, held-out {record.holdout_accuracy:.3f}"
        )
    return result
