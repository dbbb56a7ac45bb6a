"""Training-loop plumbing shared by the neural classifiers."""

from dataclasses import dataclass

import numpy as np

from ..metrics import confusion, macro_f1


class NonFiniteLoss(FloatingPointError):
    pass


class MissingLabel(ValueError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 200
    epochs: int = 100
    lr: float = 0.001
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")


def train_val_split(n_rows: int, fraction: float, seed: int):
    """Seeded permutation split; returns (train_idx, val_idx)."""
    order = np.random.default_rng([seed, 9]).permutation(n_rows)
    n_val = int(n_rows * fraction)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def minibatches(n_rows: int, batch_size: int, rng):
    """Shuffled index batches; a trailing singleton is dropped because
    train-mode batch normalization needs >= 2 rows."""
    order = rng.permutation(n_rows)
    for start in range(0, n_rows, batch_size):
        batch = order[start:start + batch_size]
        if batch.size >= 2:
            yield batch


def task_macro_f1(y_true, y_pred, n_classes: int) -> float:
    vocab = list(range(n_classes))
    return macro_f1(confusion(y_true.tolist(), y_pred.tolist(), vocab))
