"""Small dense MLP with hand-rolled reverse-mode gradients, a finite-difference
oracle, and an Adam optimizer.

Everything is float64 and seed-deterministic. Inputs may be single vectors
(d,) or batches (B, d); gradients are summed over the batch.
"""
from dataclasses import dataclass, field
import struct

import numpy as np

from .errors import InvalidArchitecture, IoError, ShapeError

CHECKPOINT_MAGIC = b"IMRLPAR1"


@dataclass
class MlpParams:
    """Fully-connected net: ReLU on hidden layers, identity on the output."""

    layer_dims: list
    weights: list  # weights[i]: (layer_dims[i], layer_dims[i+1])
    biases: list   # biases[i]: (layer_dims[i+1],)

    def param_list(self):
        """Flat list of parameter arrays, weights and biases interleaved."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def replace_arrays(self, arrays):
        """Rebuild params from a list in param_list() order."""
        n = len(self.weights)
        return MlpParams(
            layer_dims=list(self.layer_dims),
            weights=[arrays[2 * i] for i in range(n)],
            biases=[arrays[2 * i + 1] for i in range(n)],
        )

    def count(self):
        return sum(a.size for a in self.param_list())


def init_params(layer_dims, seed):
    """He-style fan-in scaled uniform init, zero biases, deterministic."""
    if len(layer_dims) < 2:
        raise InvalidArchitecture(f"need at least 2 layer dims, got {layer_dims}")
    if any(d < 1 for d in layer_dims):
        raise InvalidArchitecture(f"layer dims must be >= 1, got {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for din, dout in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / din)
        weights.append(rng.uniform(-limit, limit, size=(din, dout)))
        biases.append(np.zeros(dout))
    return MlpParams(layer_dims=list(layer_dims), weights=weights, biases=biases)


def _check_finite(name, *arrays):
    if __debug__:
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise FloatingPointError(f"non-finite values after {name}")


def mlp_forward(params, x):
    """Forward pass. Returns (y, cache); cache feeds mlp_backward."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.layer_dims[0]:
        raise ShapeError(
            f"input dim {x.shape[-1]} != first layer dim {params.layer_dims[0]}"
        )
    n_layers = len(params.weights)
    acts = [x]  # post-activation inputs to each layer
    pre = []
    h = x
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == n_layers - 1 else np.maximum(z, 0.0)
        acts.append(h)
    _check_finite("mlp_forward", h)
    return h, (acts, pre)


def mlp_backward(params, cache, d_y):
    """Exact reverse-mode gradients.

    Returns (param_grads, d_x) with param_grads in param_list() order.
    """
    acts, pre = cache
    d_y = np.asarray(d_y, dtype=np.float64)
    if d_y.shape != acts[-1].shape:
        raise ShapeError(f"upstream grad shape {d_y.shape} != output {acts[-1].shape}")
    n_layers = len(params.weights)
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    delta = d_y
    for i in range(n_layers - 1, -1, -1):
        if i != n_layers - 1:
            delta = delta * (pre[i] > 0)
        h_in = acts[i]
        if h_in.ndim == 1:
            d_weights[i] = np.outer(h_in, delta)
            d_biases[i] = delta.copy()
        else:
            d_weights[i] = h_in.T @ delta
            d_biases[i] = delta.sum(axis=0)
        if d_weights[i].shape != params.weights[i].shape:
            raise ShapeError("cache does not match params")
        delta = delta @ params.weights[i].T
    grads = []
    for dw, db in zip(d_weights, d_biases):
        grads.append(dw)
        grads.append(db)
    _check_finite("mlp_backward", *grads)
    return grads, delta


def finite_diff_grad(scalar_fn, x, eps=1e-5):
    """Central-difference gradient of scalar_fn at flat vector x."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = scalar_fn(x)
        flat[i] = orig - eps
        fm = scalar_fn(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def flatten_arrays(arrays):
    return np.concatenate([np.asarray(a).ravel() for a in arrays])


def unflatten_arrays(vec, like):
    out, ofs = [], 0
    for a in like:
        out.append(vec[ofs:ofs + a.size].reshape(a.shape))
        ofs += a.size
    return out


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(arrays, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
        t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(arrays, grads, state):
    """One Adam update with bias correction. Returns (new_arrays, new_state)."""
    if len(arrays) != len(grads) or any(
        a.shape != g.shape for a, g in zip(arrays, grads)
    ):
        raise ShapeError("params and grads do not match")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        m2 = b1 * m + (1 - b1) * g
        v2 = b2 * v + (1 - b2) * g * g
        m_hat = m2 / (1 - b1 ** t)
        v_hat = v2 / (1 - b2 ** t)
        new_m.append(m2)
        new_v.append(v2)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    new_state = AdamState(m=new_m, v=new_v, t=t, lr=state.lr,
                          beta1=b1, beta2=b2, eps=state.eps)
    _check_finite("adam_step", *new_p)
    return new_p, new_state


def save_params(params, path):
    """Binary checkpoint: magic, layer count, dims (int32 LE), then weights
    and biases per layer as float64 LE."""
    try:
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<i", len(params.layer_dims)))
            for d in params.layer_dims:
                f.write(struct.pack("<i", d))
            for w, b in zip(params.weights, params.biases):
                f.write(w.astype("<f8").tobytes())
                f.write(b.astype("<f8").tobytes())
    except OSError as e:
        raise IoError(str(e)) from e


def load_params(path):
    try:
        with open(path, "rb") as f:
            magic = f.read(8)
            if magic != CHECKPOINT_MAGIC:
                raise IoError(f"bad checkpoint magic in {path}")
            (n_dims,) = struct.unpack("<i", f.read(4))
            dims = [struct.unpack("<i", f.read(4))[0] for _ in range(n_dims)]
            weights, biases = [], []
            for din, dout in zip(dims[:-1], dims[1:]):
                w = np.frombuffer(f.read(8 * din * dout), dtype="<f8")
                weights.append(w.reshape(din, dout).copy())
                b = np.frombuffer(f.read(8 * dout), dtype="<f8")
                biases.append(b.copy())
    except OSError as e:
        raise IoError(str(e)) from e
    return MlpParams(layer_dims=dims, weights=weights, biases=biases)
