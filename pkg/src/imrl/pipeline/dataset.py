"""Synthetic food-image dataset: simulator renders with type, property and
fullness labels, plus light augmentation and the frame-shuffling helper for
the temporal pretext task."""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .. import simworld

IMG_SIZE = 32
FULLNESS_LEVELS = np.round(np.arange(0.2, 1.01, 0.1), 2)
SPLITS = ("train", "val", "test")


@dataclass
class FoodImageDataset:
    images: np.ndarray       # (N, 32, 32, 3) in [0,1]
    type_labels: np.ndarray  # (N,) class index over type_names
    prop_labels: np.ndarray  # (N,) index into simworld.PROPERTY_CLASSES
    fullness: np.ndarray     # (N,) in [0,1]
    split: np.ndarray        # (N,) of {"train","val","test"}
    type_names: list
    foods: dict              # name -> FoodSpec

    def indices(self, split):
        return np.nonzero(self.split == split)[0]

    def __len__(self):
        return len(self.images)


def downscale(frame):
    """64x64 frame to 32x32 by 2x2 block averaging."""
    return frame.reshape(IMG_SIZE, 2, IMG_SIZE, 2, 3).mean(axis=(1, 3))


def _bilinear_resize(img, out_hw):
    h, w = img.shape[:2]
    oh, ow = out_hw
    ys = np.linspace(0, h - 1, oh)
    xs = np.linspace(0, w - 1, ow)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def augment(img, rng):
    """Horizontal flip, additive color jitter, box blur, crop-and-resize."""
    out = img
    if rng.random() < 0.5:
        out = out[:, ::-1]
    out = out + rng.uniform(-0.04, 0.04, size=3)
    if rng.random() < 0.3:
        padded = np.pad(out, ((1, 1), (1, 1), (0, 0)), mode="edge")
        out = sum(
            padded[1 + dy:IMG_SIZE + 1 + dy, 1 + dx:IMG_SIZE + 1 + dx]
            for dy in (-1, 0, 1) for dx in (-1, 0, 1)
        ) / 9.0
    if rng.random() < 0.3:
        # mild crop: stronger zooms rescale the food area, which is the
        # only cue the fullness regression has
        crop = 30
        oy, ox = rng.integers(0, IMG_SIZE - crop + 1, size=2)
        out = _bilinear_resize(out[oy:oy + crop, ox:ox + crop], (IMG_SIZE, IMG_SIZE))
    return np.clip(out, 0.0, 1.0)


def gen_food_dataset(foods=None, per_class=200, seed=0):
    """Deterministic labeled image set covering every property class.

    foods maps name -> FoodSpec; the per-class image budget is split evenly
    across the class's types. Fullness labels come from a 0.1 grid.
    """
    if foods is None:
        foods = simworld.food_catalog()
    by_prop = {}
    for f in foods.values():
        by_prop.setdefault(f.prop, []).append(f)
    if len(by_prop) < 2:
        raise ConfigError("need at least 2 property classes")
    if any(len(v) < 2 for v in by_prop.values()):
        raise ConfigError("need at least 2 food types per property class")
    type_names = sorted(foods)
    rng = np.random.default_rng((int(seed), 11))
    images, t_lab, p_lab, full, split = [], [], [], [], []
    for prop in sorted(by_prop):
        types = sorted(by_prop[prop], key=lambda f: f.name)
        for i in range(per_class):
            food = types[i % len(types)]
            # per-image channel scaling widens each type's color footprint,
            # pushing the property losses toward texture instead of hue
            scale = rng.uniform(0.75, 1.25, size=3)
            jittered = simworld.FoodSpec(
                name=food.name, prop=food.prop,
                color=tuple(np.clip(np.asarray(food.color) * scale, 0, 255)),
                noise_amp=food.noise_amp,
            )
            fill = float(rng.choice(FULLNESS_LEVELS))
            cx = 32 + int(rng.integers(-6, 7))
            cy = 32 + int(rng.integers(-6, 7))
            st = simworld.make_env(
                simworld.BowlSpec(center=(cx, cy)), jittered, fill,
                seed=int(rng.integers(1 << 31)),
            )
            img = augment(downscale(simworld.render(st).env), rng)
            images.append(img)
            t_lab.append(type_names.index(food.name))
            p_lab.append(simworld.PROPERTY_CLASSES.index(prop))
            full.append(fill)
            split.append(SPLITS[0] if i % 10 < 8 else SPLITS[1 + i % 2])
    order = rng.permutation(len(images))
    return FoodImageDataset(
        images=np.stack(images)[order],
        type_labels=np.array(t_lab)[order],
        prop_labels=np.array(p_lab)[order],
        fullness=np.array(full)[order],
        split=np.array(split)[order],
        type_names=type_names,
        foods=dict(foods),
    )


def gen_spoon_dataset(foods=None, n=240, seed=0):
    """Eye-in-hand crops of a loaded spoon with load-fraction labels.

    States are posed with the spoon inside the bowl at random depth and a
    directly assigned load, so the labels are exact. The label is the
    indicator saturation min(load / EXPERT_LOAD_TARGET, 1), i.e. exactly
    what the close-up render can resolve. Supervising the shared trunk on
    these crops keeps the spoon-content signal alive in the embedding.
    Returns (crops, labels) with crops of shape (n, 32, 32, 3).
    """
    if n < 1:
        raise ConfigError(f"need at least one spoon image, got {n}")
    if foods is None:
        foods = simworld.food_catalog()
    names = sorted(foods)
    rng = np.random.default_rng((int(seed), 12))
    crops, labels = [], []
    for i in range(n):
        food = foods[names[i % len(names)]]
        scale = rng.uniform(0.75, 1.25, size=3)
        jittered = simworld.FoodSpec(
            name=food.name, prop=food.prop,
            color=tuple(np.clip(np.asarray(food.color) * scale, 0, 255)),
            noise_amp=food.noise_amp,
        )
        cx = 32 + int(rng.integers(-6, 7))
        cy = 32 + int(rng.integers(-6, 7))
        st = simworld.make_env(
            simworld.BowlSpec(center=(cx, cy)), jittered,
            float(rng.uniform(0.2, 0.9)),
            seed=int(rng.integers(1 << 31)),
        )
        r = st.bowl.interior_radius() - 3
        ang = rng.uniform(0, 2 * np.pi)
        rad = r * np.sqrt(rng.uniform())
        st.spoon = st.spoon.copy()
        st.spoon[0] = simworld.to_norm(cx + rad * np.cos(ang))
        st.spoon[1] = simworld.to_norm(cy + rad * np.sin(ang))
        st.spoon[2] = float(rng.uniform(-0.8, 0.2))
        st.load = float(rng.uniform(0.0, 1.5 * simworld.EXPERT_LOAD_TARGET))
        crops.append(simworld.render(st).hand)
        labels.append(min(st.load / simworld.EXPERT_LOAD_TARGET, 1.0))
    return np.stack(crops), np.array(labels)


def shuffle_frames(frames, seed):
    """Uniformly permute a frame sequence.

    Returns (shuffled, true_positions) where placing shuffled[j] at index
    true_positions[j] restores the original order.
    """
    n = len(frames)
    if n < 2:
        raise ConfigError(f"need at least 2 frames, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    shuffled = [frames[p] for p in perm]
    return shuffled, perm
