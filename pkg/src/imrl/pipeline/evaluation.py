"""Demo generation, rollout evaluation, trajectory export and ablations."""
import base64
import json
import os
from dataclasses import dataclass

import numpy as np

from .. import geometry, losses, simworld as sw
from ..errors import ConfigError
from . import training
from .dataset import gen_food_dataset

DEMO_FOODS = ("cereals", "water", "jello", "rice", "milk", "yogurt",
              "beans", "soup", "stew")
FILL_RANGE = (0.4, 0.9)
CENTER_JITTER = 6
DEFAULT_DEMOS = 30

UNSEEN_BOWLS = (
    sw.BowlSpec(shape="circle", radius=26, wall=2, rim_color=(120, 140, 230)),
    sw.BowlSpec(shape="circle", radius=14, wall=2, rim_color=(120, 140, 230)),
    sw.BowlSpec(shape="square", radius=18, wall=2, rim_color=(180, 180, 185)),
)


@dataclass(frozen=True)
class EnvCase:
    bowl: sw.BowlSpec
    food: sw.FoodSpec
    fill: float
    seed: int

    def make(self):
        return sw.make_env(self.bowl, self.food, self.fill, self.seed)


def _jittered_bowl(base, rng, jitter):
    cx = 32 + int(rng.integers(-jitter, jitter + 1))
    cy = 32 + int(rng.integers(-jitter, jitter + 1))
    return sw.BowlSpec(shape=base.shape, radius=base.radius, wall=base.wall,
                       rim_color=base.rim_color, center=(cx, cy))


def in_distribution_suite(n, seed):
    """Training conditions: white circular bowls of varied size and
    position, demo foods, varied fill."""
    rng = np.random.default_rng((int(seed), 41))
    catalog = sw.food_catalog()
    cases = []
    for i in range(n):
        radius = int(rng.integers(14, 27))
        jitter = max(2, 29 - radius)
        bowl = _jittered_bowl(
            sw.BowlSpec(radius=radius), rng, jitter)
        food = catalog[DEMO_FOODS[i % len(DEMO_FOODS)]]
        fill = float(rng.uniform(*FILL_RANGE))
        cases.append(EnvCase(bowl, food, fill, int(rng.integers(1 << 30))))
    return cases


def generalization_suite(n, seed):
    """Zero-shot conditions: unseen bowl geometries and food colors,
    including the new-color granular beans."""
    rng = np.random.default_rng((int(seed), 42))
    catalog = dict(sw.food_catalog())
    catalog.update(sw.unseen_food_catalog())
    foods = ("black_beans", "green_beans", "yellow_beans", "juice",
             "milk", "rice")
    # jitter as large as the bowl allows inside the frame: off-center bowls
    # are what separates policies that follow (x*, y*) from ones that
    # memorized the average food position
    jitters = (3, 16, 11)
    cases = []
    for i in range(n):
        bowl = _jittered_bowl(UNSEEN_BOWLS[i % len(UNSEEN_BOWLS)],
                              rng, jitters[i % len(UNSEEN_BOWLS)])
        food = catalog[foods[i % len(foods)]]
        fill = float(rng.uniform(*FILL_RANGE))
        cases.append(EnvCase(bowl, food, fill, int(rng.integers(1 << 30))))
    return cases


def gen_demos(n=DEFAULT_DEMOS, suite=None, seed=0, horizon=40,
              action_noise=0.05):
    """Scripted-expert demonstrations over an environment suite.

    Jitter is injected into the executed action while the clean expert
    action is recorded as the label, so the demos cover a tube of states
    around the nominal trajectory without corrupting the targets (the
    expert re-plans every step, so perturbed rollouts still succeed).
    Returns a list of episodes; each episode is a list of per-step
    (observation, action, mask) records."""
    if n < 1:
        raise ConfigError(f"need at least one demo, got {n}")
    if suite is None:
        suite = in_distribution_suite(n, seed)
    rng = np.random.default_rng((int(seed), 43))
    demos = []
    for case in suite[:n]:
        state = case.make()
        records = []
        for _ in range(horizon):
            obs = sw.render(state)
            clean = sw.expert_action(state)
            records.append((obs, clean, sw.ground_truth_mask(state)))
            executed = clean + rng.normal(0.0, action_noise, 6)
            state, outcome = sw.step(state, executed)
            if outcome.scooped_amount > 0.0:
                break
        demos.append(records)
    return demos


def demo_videos(demos):
    """Ordered eye-in-hand frame stacks, one per episode."""
    return [np.stack([rec[0].hand for rec in ep]) for ep in demos]


# ----------------------------------------------------------- trajectory I/O

def _b64_image(img):
    u8 = np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)
    return base64.b64encode(u8.tobytes()).decode("ascii"), list(u8.shape)


def _decode_image(b64, shape):
    flat = np.frombuffer(base64.b64decode(b64), dtype=np.uint8)
    return flat.reshape(shape).astype(np.float64) / 255.0


def save_trajectories(demos, path):
    """Write episodes as JSON lines with base64 image buffers; masks go to
    a masks/ directory next to the file as P2 PGMs."""
    directory = os.path.dirname(os.path.abspath(path))
    mask_dir = os.path.join(directory, "masks")
    os.makedirs(mask_dir, exist_ok=True)
    with open(path, "w") as fh:
        for e, episode in enumerate(demos):
            for t, (obs, action, mask) in enumerate(episode):
                rel = os.path.join("masks", f"ep{e:03d}_t{t:03d}.pgm")
                geometry.write_pgm(mask, os.path.join(directory, rel))
                env_b64, env_shape = _b64_image(obs.env)
                hand_b64, hand_shape = _b64_image(obs.hand)
                record = {
                    "episode": e, "t": t,
                    "env": env_b64, "env_shape": env_shape,
                    "hand": hand_b64, "hand_shape": hand_shape,
                    "proprio": [float(v) for v in obs.proprio],
                    "action": [float(v) for v in action],
                    "mask": rel,
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_trajectories(path):
    directory = os.path.dirname(os.path.abspath(path))
    episodes = {}
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            obs = sw.Observation(
                env=_decode_image(rec["env"], rec["env_shape"]),
                hand=_decode_image(rec["hand"], rec["hand_shape"]),
                proprio=np.array(rec["proprio"]),
            )
            mask = geometry.read_pgm(os.path.join(directory, rec["mask"]))
            episodes.setdefault(rec["episode"], []).append(
                (obs, np.array(rec["action"]), mask))
    return [episodes[e] for e in sorted(episodes)]


# ---------------------------------------------------------------- rollouts

def _bc_policy_fn(policy, encoder, zero_temporal, zero_geometric):
    """Stateful closure maintaining the observation window across steps."""
    window = []

    def fn(state, obs):
        window.append(obs)
        del window[:-policy.history_k]
        mask = sw.ground_truth_mask(state)
        return training.policy_action(
            policy, encoder, window, mask,
            zero_temporal=zero_temporal, zero_geometric=zero_geometric)
    return fn


def evaluate(policy, encoder, suite, horizon=40, zero_temporal=False,
             zero_geometric=False, attempts_per_env=1):
    """Mean-action rollouts over a suite; returns the metrics row."""
    if not suite:
        raise ConfigError("empty environment suite")
    attempts = []
    for case in suite:
        state = case.make()
        for _ in range(attempts_per_env):
            state.spoon = sw.HOME_POSE.copy()
            fn = _bc_policy_fn(policy, encoder, zero_temporal, zero_geometric)
            state, outcomes, _ = sw.run_episode(state, fn, horizon=horizon)
            attempts.append(outcomes)
    sur, sfr, afs = sw.episode_metrics(attempts)
    return {"sur": sur, "sfr": sfr, "afs": afs, "attempts": len(attempts)}


def sequential_afs(policy, encoder, case, n_scoops=sw.AFS_WINDOW, horizon=40,
                   zero_temporal=False, zero_geometric=False):
    """Amount deposited over n consecutive scooping attempts in one bowl."""
    state = case.make()
    attempts = []
    for _ in range(n_scoops):
        state.spoon = sw.HOME_POSE.copy()
        fn = _bc_policy_fn(policy, encoder, zero_temporal, zero_geometric)
        state, outcomes, _ = sw.run_episode(state, fn, horizon=horizon)
        attempts.append(outcomes)
    return sw.episode_metrics(attempts)[2]


# ---------------------------------------------------------------- ablations

ABLATION_VARIANTS = ("full", "no_visual_physical", "no_temporal",
                     "no_geometric")


def _variant_settings(name):
    if name not in ABLATION_VARIANTS:
        raise ConfigError(f"unknown ablation variant {name!r}")
    weights = losses.LossWeights(
        ce=0.0 if name == "no_visual_physical" else 1.0,
        tri=0.0 if name == "no_visual_physical" else 1.0,
        temp=0.0 if name == "no_temporal" else 1.0,
        full=0.0 if name == "no_geometric" else 1.0,
    )
    return weights, name == "no_temporal", name == "no_geometric"


def ablation_suite(demos, dataset, eval_suites, seed=0, repr_epochs=12,
                   bc_epochs=400, k=4, finetune_encoder=False,
                   input_noise=0.05, variants=ABLATION_VARIANTS,
                   load_set=None):
    """Train and evaluate the representation ablations on identical demos
    and seeds; only the representation differs between rows."""
    videos = demo_videos(demos)
    samples = training.collect_bc_samples(demos, k)
    rows = []
    for name in variants:
        weights, zero_temp, zero_geo = _variant_settings(name)
        encoder, _ = training.train_repr(
            dataset, videos, weights, epochs=repr_epochs, seed=seed,
            load_set=load_set)
        policy, encoder, _ = training.train_bc(
            demos, encoder, k=k, epochs=bc_epochs, seed=seed,
            finetune_encoder=finetune_encoder, input_noise=input_noise,
            zero_temporal=zero_temp, zero_geometric=zero_geo,
            samples=samples)
        row = {"variant": name}
        for suite_name, suite in eval_suites.items():
            metrics = evaluate(policy, encoder, suite,
                               zero_temporal=zero_temp,
                               zero_geometric=zero_geo)
            for key, value in metrics.items():
                row[f"{suite_name}_{key}"] = value
        rows.append(row)
    return rows


def train_full_pipeline(dataset, demos, seed=0, repr_epochs=12, bc_epochs=400,
                        k=4, weights=None, finetune_encoder=False,
                        zero_temporal=False, zero_geometric=False,
                        pretrain=True, samples=None, input_noise=0.05,
                        load_set=None):
    """Pretrain the representation and clone the expert on top of it.

    pretrain=False skips representation learning entirely (the raw-encoder
    baseline: a freshly initialized trunk with geometric inputs zeroed)."""
    if weights is None:
        weights = losses.LossWeights(1.0, 1.0, 1.0, 1.0)
    videos = demo_videos(demos)
    if pretrain:
        encoder, _ = training.train_repr(
            dataset, videos, weights, epochs=repr_epochs, seed=seed,
            load_set=load_set)
    else:
        from . import encoder as enc
        encoder = enc.init_encoder(len(dataset.type_names), seed=(seed, 21))
        zero_geometric = True
    policy, encoder, history = training.train_bc(
        demos, encoder, k=k, epochs=bc_epochs, seed=seed,
        finetune_encoder=finetune_encoder, input_noise=input_noise,
        zero_temporal=zero_temporal, zero_geometric=zero_geometric,
        samples=samples)
    return policy, encoder, history
