"""Encoder bundle and observation-to-representation integration.

The trunk embeds a 32x32x3 image into a 32-dim vector and is shared by the
environment view, the eye-in-hand frames and every pretraining head. The
integrated representation is z_vp (+) z_u (+) (x*, y*) (+) fullness,
dimension 2*embed_dim + 3.
"""
import os
from dataclasses import dataclass

import numpy as np

from .. import geometry, numeric
from ..errors import NoFeasiblePoint
from .dataset import downscale

EMBED_DIM = 32
INPUT_DIM = 32 * 32 * 3
TRUNK_DIMS = [INPUT_DIM, 256, 64, EMBED_DIM]


@dataclass
class Encoder:
    trunk: numeric.MlpParams
    type_head: numeric.MlpParams   # embed -> food type logits
    full_head: numeric.MlpParams   # embed -> bowl fullness estimate
    load_head: numeric.MlpParams   # embed -> spoon load estimate
    agg_head: numeric.MlpParams    # concat of k frame embeds -> z_u
    order_head: numeric.MlpParams  # concat of n frame embeds -> n*n logits
    n_frames: int = 4

    def components(self):
        return {
            "trunk": self.trunk, "type_head": self.type_head,
            "full_head": self.full_head, "load_head": self.load_head,
            "agg_head": self.agg_head, "order_head": self.order_head,
        }

    def param_list(self):
        out = []
        for p in self.components().values():
            out.extend(p.param_list())
        return out

    def replace_arrays(self, arrays):
        comps = {}
        ofs = 0
        for name, p in self.components().items():
            n = len(p.param_list())
            comps[name] = p.replace_arrays(arrays[ofs:ofs + n])
            ofs += n
        return Encoder(n_frames=self.n_frames, **comps)


def init_encoder(n_types, n_frames=4, seed=0, trunk_dims=None):
    dims = list(trunk_dims or TRUNK_DIMS)
    embed = dims[-1]
    # recency-weighted pooling initialization: the aggregation layer starts
    # as a frame average biased toward the newest frame and only departs
    # from that if trained
    agg = numeric.init_params([n_frames * embed, embed], (seed, 4))
    recency = 2.0 ** np.arange(n_frames)
    recency /= recency.sum()
    agg.weights[0][:] = np.concatenate(
        [np.eye(embed) * w for w in recency])
    agg.biases[0][:] = 0.0
    return Encoder(
        trunk=numeric.init_params(dims, (seed, 1)),
        type_head=numeric.init_params([embed, n_types], (seed, 2)),
        full_head=numeric.init_params([embed, 1], (seed, 3)),
        load_head=numeric.init_params([embed, 1], (seed, 6)),
        agg_head=agg,
        order_head=numeric.init_params([n_frames * embed, n_frames * n_frames],
                                       (seed, 5)),
        n_frames=n_frames,
    )


def embed_images(encoder, images):
    """Trunk embeddings for (B, 32, 32, 3) images (or a single image)."""
    batch = np.asarray(images, dtype=np.float64)
    single = batch.ndim == 3
    flat = batch.reshape(1 if single else batch.shape[0], -1)
    emb, _ = numeric.mlp_forward(encoder.trunk, flat)
    return emb[0] if single else emb


@dataclass
class IntegratedRepresentation:
    z_vp: np.ndarray
    z_u: np.ndarray
    scoop_xy: np.ndarray      # (x*, y*) normalized to [0,1]^2
    fullness: float
    scoop_fallback: bool      # centroid substituted for an infeasible point

    def vector(self):
        return np.concatenate(
            [self.z_vp, self.z_u, self.scoop_xy, [self.fullness]]
        )


def encode(encoder, window, mask, density_radius=9, margin=3.0,
           zero_temporal=False, zero_geometric=False):
    """Integrate one observation window into the policy representation.

    window is the last k Observations (oldest first); the current
    environment frame is taken from the newest one. zero_* blank the
    corresponding slots for ablation variants.
    """
    k = encoder.n_frames
    if len(window) < k:
        window = [window[0]] * (k - len(window)) + list(window)
    window = window[-k:]
    env32 = downscale(window[-1].env)
    z_vp = embed_images(encoder, env32)
    hands = np.stack([o.hand for o in window])
    frame_emb = embed_images(encoder, hands)
    z_u, _ = numeric.mlp_forward(encoder.agg_head, frame_emb.reshape(-1))
    fullness_pred, _ = numeric.mlp_forward(encoder.full_head, z_vp)

    fallback = False
    try:
        sp = geometry.optimal_scoop_point(mask, r=density_radius, m=margin)
        sx, sy = float(sp.x), float(sp.y)
    except NoFeasiblePoint:
        fallback = True
        try:
            sx, sy = geometry.centroid(mask)
        except Exception:
            sx = sy = (mask.shape[1] - 1) / 2.0
    h, w = mask.shape
    scoop = np.array([sx / (w - 1), sy / (h - 1)])

    if zero_temporal:
        z_u = np.zeros_like(z_u)
    if zero_geometric:
        scoop = np.zeros(2)
        fullness = 0.0
    else:
        fullness = float(fullness_pred[0])
    return IntegratedRepresentation(
        z_vp=z_vp, z_u=z_u, scoop_xy=scoop, fullness=fullness,
        scoop_fallback=fallback,
    )


def save_encoder(encoder, dirpath):
    os.makedirs(dirpath, exist_ok=True)
    for name, params in encoder.components().items():
        numeric.save_params(params, os.path.join(dirpath, f"{name}.par"))


def load_encoder(dirpath, n_frames=4):
    comps = {
        name: numeric.load_params(os.path.join(dirpath, f"{name}.par"))
        for name in ("trunk", "type_head", "full_head", "load_head",
                     "agg_head", "order_head")
    }
    return Encoder(n_frames=n_frames, **comps)
