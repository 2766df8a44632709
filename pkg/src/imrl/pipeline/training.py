"""Representation pretraining and behavior-cloning optimization."""
from dataclasses import dataclass

import numpy as np

from .. import losses, numeric, simworld
from ..errors import ConfigError
from .dataset import downscale
from . import encoder as enc

ACTION_DIM = 6
POLICY_HIDDEN = [64, 64]
TRIPLETS_PER_BATCH = 16
SEQUENCES_PER_BATCH = 8
LOADS_PER_BATCH = 32
_SOLID_CLASS = simworld.PROPERTY_CLASSES.index("solid")


def _zero_grads_like(params):
    return [np.zeros_like(a) for a in params.param_list()]


def _add(acc, grads):
    for a, g in zip(acc, grads):
        a += g


# --------------------------------------------------------------- pretraining

def _triplet_indices(dataset, train_idx, rng, count):
    """Anchor/positive share a property but differ in type; the negative
    has a different property."""
    props = dataset.prop_labels
    types = dataset.type_labels
    out = []
    by_prop = {}
    for i in train_idx:
        by_prop.setdefault(props[i], []).append(i)
    usable = [p for p, idxs in by_prop.items()
              if len({types[i] for i in idxs}) >= 2]
    for _ in range(count):
        p = usable[rng.integers(len(usable))]
        pool = by_prop[p]
        a = pool[rng.integers(len(pool))]
        pos_pool = [i for i in pool if types[i] != types[a]]
        pos = pos_pool[rng.integers(len(pos_pool))]
        neg_pool = [i for i in train_idx if props[i] != p]
        neg = neg_pool[rng.integers(len(neg_pool))]
        out.append((a, pos, neg))
    return out


def _triplet_batch_loss(embeds, margin):
    """Mean hinge loss over stacked (A, P, N) embeddings (3T, D) and its
    gradient in the same layout."""
    t = embeds.shape[0] // 3
    a, p, n = embeds[:t], embeds[t:2 * t], embeds[2 * t:]
    diff_ap = a - p
    diff_an = a - n
    d_ap = np.linalg.norm(diff_ap, axis=1)
    d_an = np.linalg.norm(diff_an, axis=1)
    hinge = d_ap - d_an + margin
    active = hinge > 0
    loss = float(np.where(active, hinge, 0.0).mean())
    u_ap = diff_ap / np.maximum(d_ap, 1e-12)[:, None]
    u_an = diff_an / np.maximum(d_an, 1e-12)[:, None]
    scale = active[:, None] / t
    grads = np.concatenate([
        (u_ap - u_an) * scale, -u_ap * scale, u_an * scale
    ])
    return loss, grads


def _stratified_picks(rng, length, n_frames):
    """One frame index per equal span of the episode, in order.

    Spreading the picks across the episode keeps the shuffled frames
    visually distinguishable; nearby frames are often identical and make
    order prediction ill-posed.
    """
    edges = np.linspace(0, length, n_frames + 1)
    return np.array([
        int(rng.integers(int(edges[i]), max(int(edges[i + 1]), int(edges[i]) + 1)))
        for i in range(n_frames)
    ])


def train_repr(dataset, demo_videos, weights, epochs, seed,
               lr=1e-3, batch_size=64, margin=0.2, n_frames=4,
               encoder=None, trunk_dims=None, load_set=None):
    """Minimize the weighted sum of the four representation losses with
    Adam. Returns (encoder, per-epoch history of loss components)."""
    if len(dataset) == 0:
        raise ConfigError("empty dataset")
    if weights.temp > 0 and not demo_videos:
        raise ConfigError("temporal loss requires demo videos")
    if encoder is None:
        encoder = enc.init_encoder(
            len(dataset.type_names), n_frames=n_frames, seed=(seed, 21),
            trunk_dims=trunk_dims,
        )
    history = []
    if weights.ce == weights.tri == weights.temp == weights.full == 0:
        return encoder, history

    rng = np.random.default_rng((int(seed), 22))
    train_idx = dataset.indices("train")
    flat_images = dataset.images.reshape(len(dataset), -1)
    videos = [np.asarray(v).reshape(len(v), -1) for v in (demo_videos or [])]
    videos = [v for v in videos if len(v) >= encoder.n_frames]
    if weights.temp > 0 and not videos:
        raise ConfigError(f"no demo video has {encoder.n_frames}+ frames")
    if load_set is not None:
        load_imgs = np.asarray(load_set[0]).reshape(len(load_set[0]), -1)
        load_lab = np.asarray(load_set[1])[:, None]

    opt_names = ("trunk", "type_head", "full_head", "load_head", "order_head")
    arrays = []
    for name in opt_names:
        arrays.extend(encoder.components()[name].param_list())
    state = numeric.adam_init(arrays, lr=lr)
    n_frm = encoder.n_frames

    for _ in range(epochs):
        order = rng.permutation(train_idx)
        sums = np.zeros(5)
        n_batches = 0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            all_comps = encoder.components()
            comps = {n: all_comps[n] for n in opt_names}
            grads = {n: _zero_grads_like(p) for n, p in comps.items()}
            l_ce = l_tri = l_temp = l_full = 0.0

            x = flat_images[batch]
            embeds, cache = numeric.mlp_forward(encoder.trunk, x)
            d_emb = np.zeros_like(embeds)
            if weights.ce > 0:
                logits, c_t = numeric.mlp_forward(encoder.type_head, embeds)
                l_ce, d_logits = losses.softmax_cross_entropy_batch(
                    logits, dataset.type_labels[batch])
                g_head, d_e = numeric.mlp_backward(
                    encoder.type_head, c_t, weights.ce * d_logits)
                _add(grads["type_head"], g_head)
                d_emb += d_e
            if weights.full > 0:
                pred, c_f = numeric.mlp_forward(encoder.full_head, embeds)
                target = dataset.fullness[batch][:, None]
                # solid items scatter freely, so their fill label has no
                # consistent visual area; keep them out of the regression
                valid = (dataset.prop_labels[batch] != _SOLID_CLASS)[:, None]
                n_valid = max(int(valid.sum()), 1)
                l_full = float(np.sum(valid * (pred - target) ** 2) / n_valid)
                d_pred = valid * 2.0 * (pred - target) / n_valid
                g_head, d_e = numeric.mlp_backward(
                    encoder.full_head, c_f, weights.full * d_pred)
                _add(grads["full_head"], g_head)
                d_emb += d_e
            if weights.full > 0 and load_set is not None:
                pick = rng.integers(len(load_imgs), size=LOADS_PER_BATCH)
                s_emb, c_s = numeric.mlp_forward(
                    encoder.trunk, load_imgs[pick])
                pred, c_f = numeric.mlp_forward(encoder.load_head, s_emb)
                target = load_lab[pick]
                l_full += float(np.mean((pred - target) ** 2))
                d_pred = 2.0 * (pred - target) / LOADS_PER_BATCH
                g_head, d_e = numeric.mlp_backward(
                    encoder.load_head, c_f, weights.full * d_pred)
                _add(grads["load_head"], g_head)
                g_trunk, _ = numeric.mlp_backward(encoder.trunk, c_s, d_e)
                _add(grads["trunk"], g_trunk)
            if d_emb.any():
                g_trunk, _ = numeric.mlp_backward(encoder.trunk, cache, d_emb)
                _add(grads["trunk"], g_trunk)

            if weights.tri > 0:
                trips = _triplet_indices(dataset, train_idx, rng,
                                         TRIPLETS_PER_BATCH)
                idx = np.array([i for col in zip(*trips) for i in col])
                t_emb, c_tr = numeric.mlp_forward(
                    encoder.trunk, flat_images[idx])
                l_tri, d_t = _triplet_batch_loss(t_emb, margin)
                g_trunk, _ = numeric.mlp_backward(
                    encoder.trunk, c_tr, weights.tri * d_t)
                _add(grads["trunk"], g_trunk)

            if weights.temp > 0:
                seq_frames, perms = [], []
                for _ in range(SEQUENCES_PER_BATCH):
                    v = videos[rng.integers(len(videos))]
                    picks = _stratified_picks(rng, len(v), n_frm)
                    perm = rng.permutation(n_frm)
                    seq_frames.append(v[picks][perm])
                    perms.append(perm)
                stacked = np.concatenate(seq_frames)
                f_emb, c_f = numeric.mlp_forward(encoder.trunk, stacked)
                per_seq = f_emb.reshape(SEQUENCES_PER_BATCH, n_frm * f_emb.shape[1])
                logits, c_o = numeric.mlp_forward(encoder.order_head, per_seq)
                d_logits = np.zeros_like(logits)
                for s in range(SEQUENCES_PER_BATCH):
                    l_s, d_s = losses.temporal_order_loss(
                        logits[s].reshape(n_frm, n_frm), perms[s])
                    l_temp += l_s / SEQUENCES_PER_BATCH
                    d_logits[s] = d_s.reshape(-1) / SEQUENCES_PER_BATCH
                g_head, d_seq = numeric.mlp_backward(
                    encoder.order_head, c_o, weights.temp * d_logits)
                _add(grads["order_head"], g_head)
                g_trunk, _ = numeric.mlp_backward(
                    encoder.trunk, c_f, d_seq.reshape(f_emb.shape))
                _add(grads["trunk"], g_trunk)

            flat_grads = []
            for name in opt_names:
                flat_grads.extend(grads[name])
            arrays, state = numeric.adam_step(arrays, flat_grads, state)
            encoder = _rebuild_encoder(encoder, opt_names, arrays)
            l_z = losses.combined_repr_loss(l_ce, l_tri, l_temp, l_full, weights)
            sums += (l_ce, l_tri, l_temp, l_full, l_z)
            n_batches += 1
        means = sums / max(n_batches, 1)
        history.append({
            "ce": means[0], "tri": means[1], "temp": means[2],
            "full": means[3], "combined": means[4],
        })
    return encoder, history


def _rebuild_encoder(encoder, opt_names, arrays):
    comps = dict(encoder.components())
    ofs = 0
    for name in opt_names:
        n = len(comps[name].param_list())
        comps[name] = comps[name].replace_arrays(arrays[ofs:ofs + n])
        ofs += n
    return enc.Encoder(n_frames=encoder.n_frames, **comps)


def temporal_accuracy(encoder, demo_videos, n_eval=200, seed=0):
    """Held-out frame-order prediction accuracy with the trained order head."""
    rng = np.random.default_rng((int(seed), 23))
    videos = [np.asarray(v).reshape(len(v), -1) for v in demo_videos
              if len(v) >= encoder.n_frames]
    n_frm = encoder.n_frames
    correct = total = 0
    for _ in range(n_eval):
        v = videos[rng.integers(len(videos))]
        picks = _stratified_picks(rng, len(v), n_frm)
        perm = rng.permutation(n_frm)
        emb, _ = numeric.mlp_forward(encoder.trunk, v[picks][perm])
        logits, _ = numeric.mlp_forward(encoder.order_head, emb.reshape(-1))
        pred = logits.reshape(n_frm, n_frm).argmax(axis=1)
        correct += int((pred == perm).sum())
        total += n_frm
    return correct / total


def fullness_mae(encoder, dataset, split="test"):
    """Mean absolute error of the fullness head on a dataset split.

    Solid-item images are excluded, matching the training restriction."""
    idx = dataset.indices(split)
    idx = idx[dataset.prop_labels[idx] != _SOLID_CLASS]
    emb = enc.embed_images(encoder, dataset.images[idx])
    pred, _ = numeric.mlp_forward(encoder.full_head, emb)
    return float(np.mean(np.abs(pred[:, 0] - dataset.fullness[idx])))


# ------------------------------------------------------------------------ BC

@dataclass
class PolicyParams:
    mlp: numeric.MlpParams
    log_std: np.ndarray
    history_k: int


def save_policy(policy, dirpath):
    import json, os
    os.makedirs(dirpath, exist_ok=True)
    numeric.save_params(policy.mlp, os.path.join(dirpath, "mlp.par"))
    with open(os.path.join(dirpath, "head.json"), "w") as fh:
        json.dump({"log_std": policy.log_std.tolist(),
                   "history_k": policy.history_k}, fh)


def load_policy(dirpath):
    import json, os
    mlp = numeric.load_params(os.path.join(dirpath, "mlp.par"))
    with open(os.path.join(dirpath, "head.json")) as fh:
        head = json.load(fh)
    return PolicyParams(mlp=mlp, log_std=np.array(head["log_std"]),
                        history_k=int(head["history_k"]))


@dataclass
class BcSamples:
    """Flattened demo timesteps ready for batching."""
    env32: np.ndarray      # (S, 3072)
    hands: np.ndarray      # (S, k, 3072)
    p_hist: np.ndarray     # (S, 6k)
    scoop: np.ndarray      # (S, 2) normalized scoop point (or centroid)
    actions: np.ndarray    # (S, 6)


def collect_bc_samples(demos, k, density_radius=9, margin=3.0):
    from .. import geometry
    from ..errors import NoFeasiblePoint

    env32, hands, p_hist, scoop, actions = [], [], [], [], []
    for episode in demos:
        obs_seq = [r[0] for r in episode]
        for t, (obs, action, mask) in enumerate(episode):
            window = obs_seq[max(0, t - k + 1):t + 1]
            window = [window[0]] * (k - len(window)) + window
            env32.append(downscale(obs.env).reshape(-1))
            hands.append(np.stack([o.hand.reshape(-1) for o in window]))
            p_hist.append(np.concatenate([o.proprio for o in window]))
            try:
                sp = geometry.optimal_scoop_point(
                    mask, r=density_radius, m=margin)
                sx, sy = float(sp.x), float(sp.y)
            except NoFeasiblePoint:
                try:
                    sx, sy = geometry.centroid(mask)
                except Exception:
                    sx = sy = (mask.shape[1] - 1) / 2.0
            h, w = mask.shape
            scoop.append([sx / (w - 1), sy / (h - 1)])
            actions.append(action)
    return BcSamples(
        env32=np.array(env32), hands=np.array(hands),
        p_hist=np.array(p_hist), scoop=np.array(scoop),
        actions=np.array(actions),
    )


def _assemble_inputs(encoder, samples, idx, zero_temporal, zero_geometric,
                     with_cache=False, pixel_noise=0.0, rng=None):
    """Forward the encoder over a sample batch and build policy inputs.

    Returns (inputs, caches) where caches carry everything needed to push
    policy gradients back into the encoder."""
    env = samples.env32[idx]
    if pixel_noise > 0.0:
        env = env + rng.normal(0.0, pixel_noise, env.shape)
    z_vp, c_env = numeric.mlp_forward(encoder.trunk, env)
    pred, c_full = numeric.mlp_forward(encoder.full_head, z_vp)
    b, k = len(idx), samples.hands.shape[1]
    flat_hands = samples.hands[idx].reshape(b * k, -1)
    if pixel_noise > 0.0:
        flat_hands = flat_hands + rng.normal(0.0, pixel_noise,
                                             flat_hands.shape)
    h_emb, c_hand = numeric.mlp_forward(encoder.trunk, flat_hands)
    concat = h_emb.reshape(b, -1)
    z_u, c_agg = numeric.mlp_forward(encoder.agg_head, concat)
    if zero_temporal:
        z_u = np.zeros_like(z_u)
    if zero_geometric:
        geo = np.zeros((b, 3))
    else:
        geo = np.concatenate([samples.scoop[idx], pred], axis=1)
    inputs = np.concatenate([z_vp, z_u, geo, samples.p_hist[idx]], axis=1)
    caches = (c_env, c_full, c_hand, c_agg, h_emb.shape) if with_cache else None
    return inputs, caches


def init_policy(input_dim, seed, hidden=None):
    dims = [input_dim] + list(hidden or POLICY_HIDDEN) + [ACTION_DIM]
    mlp = numeric.init_params(dims, (seed, 31))
    return PolicyParams(mlp=mlp, log_std=np.zeros(ACTION_DIM), history_k=0)


def train_bc(demos, encoder, k=4, epochs=40, finetune_encoder=True, seed=0,
             lr=1e-3, batch_size=64, density_radius=9, margin=3.0,
             zero_temporal=False, zero_geometric=False, samples=None,
             input_noise=0.0, pixel_noise=0.0, hidden=None,
             policy_init=None):
    """Behavior cloning on expert demos by minimizing the Gaussian NLL.

    With finetune_encoder the trunk, fullness head and temporal aggregation
    receive gradients through the integrated representation; otherwise the
    encoder is frozen and features are computed once up front. input_noise
    perturbs the assembled policy inputs during training only, which widens
    the basin the cloned policy tolerates at rollout time.

    Returns (policy, encoder, per-epoch NLL history).
    """
    if not demos and samples is None:
        raise ConfigError("no demonstrations")
    if k < 1:
        raise ConfigError(f"history window k must be >= 1, got {k}")
    if samples is None:
        samples = collect_bc_samples(demos, k, density_radius, margin)
    n = len(samples.actions)
    embed = encoder.trunk.layer_dims[-1]
    input_dim = 2 * embed + 3 + samples.p_hist.shape[1]
    if policy_init is not None:
        policy = PolicyParams(mlp=policy_init.mlp, history_k=k,
                              log_std=policy_init.log_std.copy())
    else:
        policy = init_policy(input_dim, seed, hidden)
    rng = np.random.default_rng((int(seed), 32))

    if not finetune_encoder:
        inputs, _ = _assemble_inputs(
            encoder, samples, np.arange(n), zero_temporal, zero_geometric)

    arrays = policy.mlp.param_list() + [policy.log_std.copy()]
    enc_names = ()
    if finetune_encoder:
        enc_names = ("trunk", "full_head") if zero_temporal else (
            "trunk", "full_head", "agg_head")
        for name in enc_names:
            arrays = arrays + encoder.components()[name].param_list()
    state = numeric.adam_init(arrays, lr=lr)
    n_policy = len(policy.mlp.param_list())

    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            if finetune_encoder:
                x, caches = _assemble_inputs(
                    encoder, samples, idx, zero_temporal, zero_geometric,
                    with_cache=True, pixel_noise=pixel_noise, rng=rng)
            else:
                x = inputs[idx]
            if input_noise > 0.0:
                x = x + rng.normal(0.0, input_noise, x.shape)
            mu, c_pol = numeric.mlp_forward(policy.mlp, x)
            loss, (d_mu, d_ls) = losses.bc_nll_batch(
                mu, policy.log_std, samples.actions[idx])
            g_pol, d_x = numeric.mlp_backward(policy.mlp, c_pol, d_mu)
            grads = g_pol + [d_ls]
            if finetune_encoder:
                grads = grads + _encoder_grads(
                    encoder, enc_names, caches, d_x, embed,
                    zero_temporal, zero_geometric)
            arrays, state = numeric.adam_step(arrays, grads, state)
            policy = PolicyParams(
                mlp=policy.mlp.replace_arrays(arrays[:n_policy]),
                log_std=np.clip(arrays[n_policy],
                                losses.LOG_STD_MIN, losses.LOG_STD_MAX),
                history_k=k,
            )
            arrays[n_policy] = policy.log_std.copy()
            if finetune_encoder:
                encoder = _rebuild_encoder(
                    encoder, enc_names, arrays[n_policy + 1:])
            total += loss
            n_batches += 1
        history.append(total / max(n_batches, 1))
    policy.history_k = k
    return policy, encoder, history


def _encoder_grads(encoder, enc_names, caches, d_x, embed,
                   zero_temporal, zero_geometric):
    c_env, c_full, c_hand, c_agg, h_shape = caches
    d_z_vp = d_x[:, :embed].copy()
    d_z_u = d_x[:, embed:2 * embed]
    d_full = d_x[:, 2 * embed + 2:2 * embed + 3]
    grads = {name: _zero_grads_like(encoder.components()[name])
             for name in enc_names}
    if not zero_geometric:
        g_full, d_e = numeric.mlp_backward(encoder.full_head, c_full, d_full)
        _add(grads["full_head"], g_full)
        d_z_vp += d_e
    g_trunk, _ = numeric.mlp_backward(encoder.trunk, c_env, d_z_vp)
    _add(grads["trunk"], g_trunk)
    if not zero_temporal:
        g_agg, d_concat = numeric.mlp_backward(encoder.agg_head, c_agg, d_z_u)
        _add(grads["agg_head"], g_agg)
        g_trunk2, _ = numeric.mlp_backward(
            encoder.trunk, c_hand, d_concat.reshape(h_shape))
        _add(grads["trunk"], g_trunk2)
    out = []
    for name in enc_names:
        out.extend(grads[name])
    return out


def policy_action(policy, encoder, window, mask, density_radius=9,
                  margin=3.0, zero_temporal=False, zero_geometric=False):
    """Deterministic (mean) action for one observation window."""
    rep = enc.encode(encoder, window, mask, density_radius, margin,
                     zero_temporal=zero_temporal,
                     zero_geometric=zero_geometric)
    k = policy.history_k
    win = list(window)
    if len(win) < k:
        win = [win[0]] * (k - len(win)) + win
    p_hist = np.concatenate([o.proprio for o in win[-k:]])
    x = np.concatenate([rep.vector(), p_hist])
    mu, _ = numeric.mlp_forward(policy.mlp, x)
    return mu
