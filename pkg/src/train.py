"""
Toy training loop for the Haar-domain layer on synthetic stripe patches.
"""
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
from sklearn.metrics import accuracy_score, log_loss
from torch.utils.data import DataLoader
from tqdm import tqdm

from config.hwt_config import (TRAIN_BATCH_SIZE, TRAIN_CHANNELS, TRAIN_EPOCHS, TRAIN_LR,
                               TRAIN_PATHS)
from models.stripes_classifier import HwtStripesClassifier
from src.errors import EmptyDatasetError, ParameterError
from src.project_logger import get_logger

logger = get_logger(__name__)

TRACE_COLUMNS = ['epoch', 'loss', 'accuracy']


@dataclass
class TrainResult:
    """
    Attributes:
        initial_loss (float): Training-set loss before the first update.
        initial_accuracy (float): Training-set accuracy before the first update.
        trace (pd.DataFrame): One row per epoch: epoch, loss, accuracy.
        model (HwtStripesClassifier): The trained model.
    """
    initial_loss: float
    initial_accuracy: float
    trace: pd.DataFrame
    model: HwtStripesClassifier

    @property
    def final_loss(self) -> float:
        return float(self.trace['loss'].iloc[-1]) if len(self.trace) else self.initial_loss

    @property
    def final_accuracy(self) -> float:
        return float(self.trace['accuracy'].iloc[-1]) if len(self.trace) else self.initial_accuracy


def _stack(dataset):
    x = np.stack([np.asarray(dataset[i][0], dtype=np.float64) for i in range(len(dataset))])
    y = np.asarray([int(dataset[i][1]) for i in range(len(dataset))], dtype=np.int64)
    return x, y


def _evaluate(model: HwtStripesClassifier, x: np.ndarray, y: np.ndarray, labels) -> tuple:
    proba = model.predict_proba(x)
    loss = log_loss(y, proba, labels=labels)
    accuracy = accuracy_score(y, np.argmax(proba, axis=1))
    return float(loss), float(accuracy)


def train_toy(dataset, epochs: int = TRAIN_EPOCHS, lr: float = TRAIN_LR, seed: int = 0,
              batch_size: int = TRAIN_BATCH_SIZE, channels: int = TRAIN_CHANNELS,
              paths: int = TRAIN_PATHS, transform: str = 'haar',
              progress: bool = False) -> TrainResult:
    """
    Mini-batch SGD on layer -> ReLU -> GAP -> linear -> cross-entropy.

    The loss and accuracy recorded for each epoch are measured on the whole
    training set after that epoch's updates, so lr = 0 gives a constant trace.

    Args:
        dataset (torch.utils.data.Dataset): Items are ((1, n, n) tensor, class id).
        epochs (int): Number of passes; 0 returns an empty trace.
        lr (float): Learning rate, >= 0.
        seed (int): Seeds parameter init and batch shuffling.
        batch_size (int): Mini-batch size.
        channels (int): Output channels of the layer.
        paths (int): Number of layer paths.
        transform (str): 'haar' or 'hadamard' layer transform.
        progress (bool): Show a tqdm progress bar.

    Returns:
        TrainResult: initial metrics, per-epoch trace and trained model.

    Raises:
        EmptyDatasetError: if the dataset has no samples.
        ParameterError: for negative epochs / lr or a non-positive batch size.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if int(epochs) != epochs or epochs < 0:
        raise ParameterError(f"epochs must be a non-negative integer, got {epochs}")
    if not np.isfinite(lr) or lr < 0:
        raise ParameterError(f"learning rate must be finite and >= 0, got {lr}")
    if int(batch_size) != batch_size or batch_size < 1:
        raise ParameterError(f"batch_size must be a positive integer, got {batch_size}")

    x_all, y_all = _stack(dataset)
    if len(set(y_all.tolist())) < 2:
        logger.warning("training set contains a single class (%s)", int(y_all[0]))
    n_classes = max(2, int(y_all.max()) + 1)
    labels = list(range(n_classes))
    size = x_all.shape[-1]
    model = HwtStripesClassifier(size=size, c_in=x_all.shape[1], c_out=channels, paths=paths,
                                 n_classes=n_classes, seed=seed, transform=transform)

    generator = torch.Generator().manual_seed(seed)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=True, generator=generator)

    initial_loss, initial_accuracy = _evaluate(model, x_all, y_all, labels)
    logger.info("training %d-path %s layer on %d samples for %d epochs (lr=%s, seed=%s), initial loss %.6f",
                paths, transform, len(y_all), epochs, lr, seed, initial_loss)

    rows = []
    for epoch in tqdm(range(1, epochs + 1), disable=not progress, desc='train'):
        for x_batch, y_batch in loader:
            _, grads = model.loss_and_grads(x_batch.numpy().astype(np.float64), y_batch.numpy())
            model.sgd_step(grads, lr)
        loss, accuracy = _evaluate(model, x_all, y_all, labels)
        rows.append({'epoch': epoch, 'loss': loss, 'accuracy': accuracy})
        logger.debug("epoch %d loss %.6f accuracy %.4f", epoch, loss, accuracy)

    trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    result = TrainResult(initial_loss=initial_loss, initial_accuracy=initial_accuracy,
                         trace=trace, model=model)
    logger.info("training finished: loss %.6f -> %.6f, accuracy %.4f",
                initial_loss, result.final_loss, result.final_accuracy)
    return result


if __name__ == "__main__":
    from PatchUtils import StripesDS

    RESULT = train_toy(StripesDS(200, size=8, seed=0), progress=True)
    print(f"final loss: {RESULT.final_loss:.6f} accuracy: {RESULT.final_accuracy:.4f}")
