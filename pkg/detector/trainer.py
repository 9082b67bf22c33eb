import csv
import logging
from dataclasses import dataclass, field
from logging import info as loginf
from pathlib import Path
from time import time
from typing import FrozenSet, Optional

import gin
import numpy as np
import torch

from .audio import CLIP_LEN
from .data_utility import atomic_write, seedall
from .exceptions import LeakedAttack, UsageError
from .layers import EVAL, TRAIN
from .losses import bce_loss
from .metrics import evaluate_scores
from .model import MIN_FRAMES, build
from .optim import Adam
from .weights import load_optimizer, load_weights, save_optimizer, save_weights

"""
Training structure, used in "core.py"

USAGE:
- training hyperparameters are in "hyperparameters.gin"
- use Trainer(cfg) to get a fresh model (or Trainer(cfg, resume=path))
- use Trainer.train(train_loader, test_loader) to train and checkpoint
"""

LOG_HEADER = ["epoch", "train_loss", "test_eer", "test_auc", "checkpoint_path"]
LOG_NAME = "train_log.csv"


@gin.configurable
@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 128
    epochs: int = 10
    weight_decay: float = 1e-4
    seed: int = 0
    checkpoint_dir: str = "checkpoints"
    clip_len: int = CLIP_LEN
    train_fraction: float = 1.0
    excluded_attacks: FrozenSet[str] = field(default_factory=frozenset)
    workers: int = 0

    def __post_init__(self):
        object.__setattr__(self, "excluded_attacks", frozenset(self.excluded_attacks))
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise UsageError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 < self.train_fraction <= 1:
            raise UsageError(f"train_fraction must be in (0, 1], got {self.train_fraction}")

    def to_dict(self):
        return {
            "lr": self.lr,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "checkpoint_dir": str(self.checkpoint_dir),
            "clip_len": self.clip_len,
            "train_fraction": self.train_fraction,
            "excluded_attacks": sorted(self.excluded_attacks),
            "workers": self.workers,
        }


def check_containment(attacks, excluded):
    """raises LeakedAttack when a batch holds an excluded attack tag"""
    leaked = excluded.intersection(attacks)
    if leaked:
        raise LeakedAttack(f"excluded attacks {sorted(leaked)} reached the model")


def score_loader(model, loader, excluded=frozenset()):
    """eval-mode scores of every batch of a loader

    Returns:
        (float array): scores
        (int array): labels
        (str list): attack tags
    """
    scores, labels, attacks = [], [], []
    with torch.no_grad():
        for features, batch_labels, batch_attacks in loader:
            check_containment(batch_attacks, excluded)
            scores.append(model.forward(features, EVAL).double().numpy())
            labels.append(batch_labels.numpy().astype(np.int64))
            attacks += batch_attacks
    return np.concatenate(scores), np.concatenate(labels), attacks


@gin.configurable
class Trainer:
    """Model, optimizer and per-epoch history of one training run"""

    def __init__(self, cfg, resume=None, verb=1):
        """
        cfg (TrainConfig): run configuration
        resume (str): checkpoint to continue from (its ".adam" sibling too)
        verb (int): verbosity level
        """
        self.cfg = cfg
        self.verb = verb
        seedall(cfg.seed)
        self.optimizer = Adam(lr=cfg.lr, weight_decay=cfg.weight_decay)
        if resume is None:
            self.model = build(seed=cfg.seed)
        else:
            self.model = load_weights(resume)
            load_optimizer(self.optimizer, resume)
            self._show(f"Resuming from {resume} (step {self.optimizer.step_count})", 1)
        self.checkpoint_dir = Path(cfg.checkpoint_dir)
        self.history = {
            "train_loss": [],
            "test_eer": [],
            "test_auc": [],
            "checkpoint": [],
        }

    def _show(self, msg, level):
        """Utility for handling logging messages

        msg (str): info message
        level (float): minimum level of verbosity to show -msg
        """
        if self.verb >= level:
            loginf(msg)

    def train_step(self, features, labels):
        """One BCE + Adam update, returns the batch loss"""
        self.model.zero_grad()
        scores = self.model.forward(features, TRAIN)
        loss, grad = bce_loss(scores, labels)
        self.model.backward(grad)
        self.optimizer.step(self.model.trainable_parameters())
        return loss

    def train_epoch(self, loader):
        """Returns: (float) mean training loss over the epoch's samples"""
        total, count = 0.0, 0
        with torch.no_grad():
            for features, labels, attacks in loader:
                check_containment(attacks, self.cfg.excluded_attacks)
                if len(labels) * (features.shape[-1] // MIN_FRAMES) < 2:
                    # one value per channel before the GRUs: no batch statistics
                    logging.warning(f"Skipping a training batch of {len(labels)} sample")
                    continue
                total += self.train_step(features, labels) * len(labels)
                count += len(labels)
        return total / max(count, 1)

    def validate(self, loader):
        """EvalReport of the current model on a loader"""
        scores, labels, _ = score_loader(self.model, loader, self.cfg.excluded_attacks)
        return evaluate_scores(scores, labels)

    def checkpoint(self, epoch):
        path = self.checkpoint_dir / f"epoch_{epoch:03d}.srnw"
        save_weights(self.model, path)
        save_optimizer(self.optimizer, path)
        return str(path)

    def train(self, train_loader, test_loader, first_epoch=1):
        """Trains for cfg.epochs epochs, validating and checkpointing each

        Returns:
            (str): path of the checkpoint with the lowest test EER
                    (earliest epoch on ties)
            (int): its epoch
        """
        for epoch in range(first_epoch, first_epoch + self.cfg.epochs):
            start = time()
            loss = self.train_epoch(train_loader)
            report = self.validate(test_loader)
            path = self.checkpoint(epoch)
            self.history["train_loss"].append(loss)
            self.history["test_eer"].append(report.eer_percent)
            self.history["test_auc"].append(report.auc_percent)
            self.history["checkpoint"].append(path)
            self._show(
                f"epoch {epoch}: loss {loss:.4f}, test EER {report.eer_percent:.2f}%, "
                f"AUC {report.auc_percent:.2f}% ({time() - start:.1f}s)",
                1,
            )
        best = int(np.argmin(self.history["test_eer"]))  # first minimum
        self._show(f"Best checkpoint: {self.history['checkpoint'][best]}", 1)
        return self.history["checkpoint"][best], first_epoch + best

    def log_rows(self, first_epoch=1):
        return [
            {
                "epoch": first_epoch + idx,
                "train_loss": self.history["train_loss"][idx],
                "test_eer": self.history["test_eer"][idx],
                "test_auc": self.history["test_auc"][idx],
                "checkpoint_path": self.history["checkpoint"][idx],
            }
            for idx in range(len(self.history["train_loss"]))
        ]

    def write_log(self, rows, path: Optional[Path] = None):
        """Writes the per-epoch CSV log, returns its path"""
        path = Path(path or self.checkpoint_dir / LOG_NAME)
        with atomic_write(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=LOG_HEADER)
            writer.writeheader()
            writer.writerows(rows)
        logging.info(f"Training log written to {path}")
        return str(path)
