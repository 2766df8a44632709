"""Loss functions with values and exact gradients: type cross-entropy,
physical-property triplet hinge, frame-order cross-entropy, fullness MSE,
their weighted combination, and the Gaussian behavior-cloning NLL.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LabelError, ShapeError

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass
class TripletBatch:
    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    margin: float = 0.2

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=np.float64)
        self.positive = np.asarray(self.positive, dtype=np.float64)
        self.negative = np.asarray(self.negative, dtype=np.float64)
        if not (self.anchor.shape == self.positive.shape == self.negative.shape):
            raise ShapeError("anchor/positive/negative dims differ")
        if self.margin < 0:
            raise ConfigError(f"margin must be >= 0, got {self.margin}")


@dataclass
class LossWeights:
    ce: float = 1.0
    tri: float = 1.0
    temp: float = 1.0
    full: float = 1.0

    def __post_init__(self):
        for name in ("ce", "tri", "temp", "full"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss weight {name} must be >= 0")


@dataclass
class GaussianActionHead:
    """Diagonal Gaussian over actions: state-dependent mean, learnable
    state-independent log-std clamped to [-5, 2]."""

    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_std = np.clip(
            np.asarray(self.log_std, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX
        )
        if self.mean.shape != self.log_std.shape:
            raise ShapeError("mean and log_std dims differ")


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits, label):
    """-log softmax(logits)[label]; grad is softmax minus one-hot."""
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.shape[0]
    if not (0 <= label < n):
        raise LabelError(f"label {label} out of range for {n} classes")
    z = logits - logits.max()
    logsumexp = np.log(np.exp(z).sum())
    loss = logsumexp - z[label]
    grad = softmax(logits)
    grad[label] -= 1.0
    return float(loss), grad


def softmax_cross_entropy_batch(logits, labels):
    """Batched variant: logits (B, C), labels (B,). Returns mean loss and
    the gradient of the mean."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise LabelError("label out of range")
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    loss = (logsumexp - z[np.arange(n), labels]).mean()
    grad = softmax(logits, axis=1)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def l2_distance(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"dims differ: {u.shape} vs {v.shape}")
    return float(np.linalg.norm(u - v))


def triplet_loss(batch):
    """Hinge max(0, d(A,P) - d(A,N) + margin) with gradients for A, P, N."""
    a, p, n = batch.anchor, batch.positive, batch.negative
    d_ap = l2_distance(a, p)
    d_an = l2_distance(a, n)
    val = d_ap - d_an + batch.margin
    if val <= 0.0:
        z = np.zeros_like(a)
        return 0.0, (z, z.copy(), z.copy())
    # d||x||/dx = x/||x||; guard the degenerate zero-distance direction
    def unit(diff, dist):
        return diff / dist if dist > 0 else np.zeros_like(diff)

    u_ap = unit(a - p, d_ap)
    u_an = unit(a - n, d_an)
    g_a = u_ap - u_an
    g_p = -u_ap
    g_n = u_an
    return float(val), (g_a, g_p, g_n)


def temporal_order_loss(order_logits, true_positions):
    """Sum over frames of softmax cross-entropy between row j of the logit
    grid and frame j's original position."""
    order_logits = np.asarray(order_logits, dtype=np.float64)
    n = order_logits.shape[0]
    if order_logits.shape != (n, n):
        raise ShapeError(f"logits must be square, got {order_logits.shape}")
    perm = np.asarray(true_positions)
    if sorted(perm.tolist()) != list(range(n)):
        raise LabelError(f"true_positions is not a permutation of 0..{n - 1}")
    total = 0.0
    grads = np.zeros_like(order_logits)
    for j in range(n):
        loss_j, g_j = softmax_cross_entropy(order_logits[j], int(perm[j]))
        total += loss_j
        grads[j] = g_j
    return float(total), grads


def fullness_mse(pred, target):
    """(pred - target)^2 against a fullness label in [0, 1]."""
    if not (0.0 <= target <= 1.0):
        raise LabelError(f"fullness target {target} outside [0, 1]")
    diff = pred - target
    return float(diff * diff), float(2.0 * diff)


def combined_repr_loss(l_ce, l_tri, l_temp, l_full, weights):
    if not isinstance(weights, LossWeights):
        weights = LossWeights(*weights)
    return float(
        weights.ce * l_ce
        + weights.tri * l_tri
        + weights.temp * l_temp
        + weights.full * l_full
    )


def bc_nll(head, expert_action):
    """Negative log-likelihood of a diagonal Gaussian action distribution.

    Returns (loss, (d_mean, d_log_std)).
    """
    a = np.asarray(expert_action, dtype=np.float64)
    if a.shape != head.mean.shape:
        raise ShapeError("action dim does not match head")
    std = np.exp(head.log_std)
    zscore = (a - head.mean) / std
    loss = float(np.sum(0.5 * zscore ** 2 + head.log_std + 0.5 * LOG_2PI))
    d_mean = -zscore / std
    d_log_std = 1.0 - zscore ** 2
    return loss, (d_mean, d_log_std)


def bc_nll_batch(means, log_std, actions):
    """Mean Gaussian NLL over a batch: means (B, D), shared log_std (D,),
    actions (B, D). Returns (loss, (d_means, d_log_std))."""
    means = np.asarray(means, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if means.shape != actions.shape:
        raise ShapeError("means and actions differ in shape")
    log_std = np.clip(np.asarray(log_std, dtype=np.float64),
                      LOG_STD_MIN, LOG_STD_MAX)
    b = means.shape[0]
    std = np.exp(log_std)
    zscore = (actions - means) / std
    loss = float(np.mean(
        np.sum(0.5 * zscore ** 2 + log_std + 0.5 * LOG_2PI, axis=1)
    ))
    d_means = -(zscore / std) / b
    d_log_std = np.sum(1.0 - zscore ** 2, axis=0) / b
    return loss, (d_means, d_log_std)
