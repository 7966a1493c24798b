"""
Small classifier used to show that the Haar-domain layer trains:

    Haar layer -> ReLU -> global average pool -> linear -> softmax cross-entropy

The ReLU matters: the global average of an inverse-Haar output only depends on
the DC coefficient, so pooling the raw layer output cannot tell two patterns with
equal means apart.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import log_softmax, softmax

from src.haar.wt_layer import LayerGrads, apply_grads, backward, forward, init_params


@dataclass
class ClassifierGrads:
    layer: LayerGrads
    W: np.ndarray
    b: np.ndarray


class HwtStripesClassifier:
    """
    Haar-layer classifier with a linear head.

    Attributes:
        layer (LayerParams): Parameters of the transform-domain layer.
        W (np.ndarray): (n_classes, C_out) head weights.
        b (np.ndarray): (n_classes,) head bias.
    """
    def __init__(self, size=8, c_in=1, c_out=4, paths=2, n_classes=2, seed=0, transform='haar'):
        self.layer = init_params(paths, c_in, c_out, size, size, seed=seed, transform=transform)
        rng = np.random.default_rng(seed + 1)
        bound = np.sqrt(1.0 / c_out)
        self.W = rng.uniform(-bound, bound, size=(n_classes, c_out))
        self.b = np.zeros(n_classes)

    def _features(self, x):
        y, cache = forward(x, self.layer)
        active = y > 0
        pooled = np.mean(np.where(active, y, 0.0), axis=(2, 3))
        return pooled, (cache, active, y.shape)

    def logits(self, x):
        pooled, _ = self._features(x)
        return pooled @ self.W.T + self.b

    def predict_proba(self, x):
        return softmax(self.logits(x), axis=1)

    def loss(self, x, labels):
        """Mean cross-entropy."""
        logp = log_softmax(self.logits(x), axis=1)
        return float(-np.mean(logp[np.arange(len(labels)), labels]))

    def loss_and_grads(self, x, labels):
        """
        Mean cross-entropy and its gradients for a batch.

        Args:
            x (np.ndarray): (B, C_in, H, W) batch.
            labels (np.ndarray): (B,) integer class ids.

        Returns:
            tuple: (loss, ClassifierGrads).
        """
        labels = np.asarray(labels, dtype=np.int64)
        batch = len(labels)
        pooled, (cache, active, out_shape) = self._features(x)
        logits = pooled @ self.W.T + self.b
        logp = log_softmax(logits, axis=1)
        loss = float(-np.mean(logp[np.arange(batch), labels]))

        grad_logits = np.exp(logp)
        grad_logits[np.arange(batch), labels] -= 1.0
        grad_logits /= batch
        grad_w = grad_logits.T @ pooled
        grad_b = grad_logits.sum(axis=0)
        grad_pooled = grad_logits @ self.W
        spatial = out_shape[2] * out_shape[3]
        grad_y = active * (grad_pooled[:, :, None, None] / spatial)
        layer_grads = backward(grad_y, cache)
        return loss, ClassifierGrads(layer=layer_grads, W=grad_w, b=grad_b)

    def sgd_step(self, grads: ClassifierGrads, lr: float) -> None:
        self.layer = apply_grads(self.layer, grads.layer, lr)
        self.W = self.W - lr * grads.W
        self.b = self.b - lr * grads.b

    def copy(self) -> 'HwtStripesClassifier':
        clone = object.__new__(HwtStripesClassifier)
        clone.layer = replace(self.layer, A=self.layer.A.copy(), V=self.layer.V.copy(),
                              T_raw=self.layer.T_raw.copy())
        clone.W = self.W.copy()
        clone.b = self.b.copy()
        return clone
