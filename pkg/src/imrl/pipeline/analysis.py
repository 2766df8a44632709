"""Embedding diagnostics: cluster quality by food property and an exact
t-SNE projection for 2D visualization."""
import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.metrics import silhouette_score

from ..errors import ConfigError, MetricsError
from . import encoder as enc

TSNE_MOMENTUM_EARLY = 0.5
TSNE_MOMENTUM_LATE = 0.8
TSNE_MOMENTUM_SWITCH = 250
TSNE_EARLY_EXAGGERATION = 4.0
TSNE_EXAGGERATION_STOP = 100
TSNE_LR = 200.0
TSNE_MAX_POINTS = 1000


def embedding_metrics(encoder, dataset, split="test"):
    """Silhouette score and intra/inter distance ratio of the trunk
    embeddings, clustered by property label.

    Returns (silhouette, ratio). Lower ratio and higher silhouette both
    mean properties form tighter, better separated clusters.
    """
    idx = dataset.indices(split)
    if len(idx) == 0:
        raise MetricsError(f"empty split {split!r}")
    labels = dataset.prop_labels[idx]
    if len(np.unique(labels)) < 2:
        raise MetricsError("need at least 2 property classes")
    emb = enc.embed_images(encoder, dataset.images[idx])
    sil = float(silhouette_score(emb, labels, metric="euclidean"))
    dist = squareform(pdist(emb))
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(len(idx), dtype=bool)
    intra = dist[same & off_diag].mean()
    inter = dist[~same].mean()
    return sil, float(intra / inter)


def _entropy_and_probs(neg_dist_row, beta):
    p = np.exp(neg_dist_row * beta)
    total = p.sum()
    if total <= 0:
        return -np.inf, p
    p = p / total
    h = -np.sum(p * np.log(np.maximum(p, 1e-300)))
    return h, p


def _conditional_probs(dist_sq, perplexity, tol=1e-5, max_tries=50):
    """Per-point Gaussian bandwidths matched to the target perplexity by
    binary search on beta = 1/(2 sigma^2)."""
    n = len(dist_sq)
    target = np.log(perplexity)
    cond = np.zeros((n, n))
    for i in range(n):
        row = -np.delete(dist_sq[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_tries):
            h, p = _entropy_and_probs(row, beta)
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (lo + beta) / 2.0
        cond[i, np.arange(n) != i] = p
    return cond


def tsne_2d(embeddings, perplexity=30.0, iters=500, seed=0):
    """Exact t-SNE to 2D by gradient descent on the KL divergence.

    Returns (coords, kl_history) where kl_history has one entry per
    iteration and is non-increasing in the tail by construction of the
    step size. Intended for qualitative cluster inspection only.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError(f"embeddings must be 2D, got shape {x.shape}")
    n = len(x)
    if n > TSNE_MAX_POINTS:
        raise ConfigError(f"exact t-SNE limited to {TSNE_MAX_POINTS} points, got {n}")
    if n < 5:
        raise ConfigError(f"need at least 5 points, got {n}")
    if not (1.0 <= perplexity < n / 3):
        raise ConfigError(
            f"perplexity {perplexity} outside [1, n/3) for n={n}")
    if iters < 1:
        raise ConfigError(f"iters must be positive, got {iters}")

    dist_sq = squareform(pdist(x, "sqeuclidean"))
    cond = _conditional_probs(dist_sq, perplexity)
    p_joint = (cond + cond.T) / (2.0 * n)
    p_joint = np.maximum(p_joint, 1e-12)

    rng = np.random.default_rng((int(seed), 61))
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    vel = np.zeros_like(y)
    off_diag = ~np.eye(n, dtype=bool)
    kl_history = []
    for it in range(iters):
        exag = TSNE_EARLY_EXAGGERATION if it < TSNE_EXAGGERATION_STOP else 1.0
        p = np.maximum(p_joint * exag, 1e-12)
        d2 = squareform(pdist(y, "sqeuclidean"))
        num = 1.0 / (1.0 + d2)
        num[~off_diag] = 0.0
        q = np.maximum(num / num.sum(), 1e-12)
        # gradient of KL(P||Q) for the Student-t kernel
        pq = (p - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
        momentum = (TSNE_MOMENTUM_EARLY if it < TSNE_MOMENTUM_SWITCH
                    else TSNE_MOMENTUM_LATE)
        vel = momentum * vel - TSNE_LR * grad
        y = y + vel
        y = y - y.mean(axis=0)
        kl = float(np.sum(p_joint * (np.log(p_joint) - np.log(q))))
        if not np.isfinite(kl):
            raise MetricsError(f"KL divergence diverged at iteration {it}")
        kl_history.append(kl)
    return y, kl_history
