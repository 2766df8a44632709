"""Deterministic top-down 2D scooping simulator.

A bowl sits in a 64x64 frame; food is drawn inside it with area
proportional to the fill level and a texture that depends on the
physical-property class. The spoon is a 6-dim configuration
(x, y, depth, tilt, sweep-phase, unused), all normalized to [-1, 1].
Scooping, spillage and collision are resolved by small per-class rules;
every function is pure and seed-deterministic.
"""
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ActionError, ConfigError, MetricsError
from . import geometry

ENV_SIZE = 64
HAND_SIZE = 32

# palette (RGB in [0,1])
BACKGROUND = np.array([0.05, 0.05, 0.06])
BOWL_INTERIOR = np.array([0.25, 0.35, 0.55])  # blue-gray: no food color comes near it

# motion / dynamics constants
MAX_STEP = 0.25          # per-dim spoon motion clip per step
RIM_DEPTH = -0.1         # spoon below this depth can hit the wall
DEPOSIT_DEPTH = -0.6     # lifting above this level banks the load
DEPTH_BASE = 0.2         # required depth at full bowl
DEPTH_GAIN = 0.5         # extra depth required as the bowl empties
CHUNK_EXTRA = 0.1        # extra depth to cut a semi-solid chunk
LOAD_RATE = 0.04         # fill units loaded per in-food step
LOAD_CAP = 0.12          # spoon capacity
SPILL_SPEED = 0.15       # max horizontal motion per step while carrying liquid
MIN_SCOOP_MOTION = 0.04  # minimum horizontal motion for the spoon to gather food
TILT_LIMIT = 0.5         # max |tilt| while loaded, any class
ITEM_RADIUS = 2          # solid item footprint (pixels)
ITEM_PICK_RADIUS = 2.5
SUCCESS_MIN = 0.04       # minimum deposited amount for a successful attempt
EXPERT_LOAD_TARGET = 0.06  # load at which the scripted expert lifts
OVERLOAD_LIMIT = 0.105   # dragging an overfull spoon dumps it back
EFFICIENCY_RANGE = (0.5, 1.0)  # hidden per-bowl loading efficiency
LOAD_INDICATOR = (0.85, 0.62, 0.2)  # close-up tint of a loaded spoon
AFS_WINDOW = 10          # attempts counted toward amount-of-food-scooped

PROPERTY_CLASSES = ("solid", "semi_solid", "granular", "liquid", "mixture")

# texture-noise amplitude per property class (also the distinguishing look)
DEFAULT_NOISE_AMP = {
    "solid": 0.04,
    "semi_solid": 0.08,
    "granular": 0.10,
    "liquid": 0.02,
    "mixture": 0.06,
}


@dataclass(frozen=True)
class BowlSpec:
    shape: str = "circle"          # circle | square
    radius: int = 20               # radius or half-side, pixels
    wall: int = 2
    rim_color: tuple = (214, 214, 214)
    center: tuple = (32, 32)

    def interior_radius(self):
        return self.radius - self.wall


@dataclass(frozen=True)
class FoodSpec:
    name: str
    prop: str
    color: tuple                   # RGB in [0,255]
    noise_amp: float = None

    def __post_init__(self):
        if self.prop not in PROPERTY_CLASSES:
            raise ConfigError(f"unknown property class {self.prop!r}")
        if any(not (0 <= c <= 255) for c in self.color):
            raise ConfigError(f"color {self.color} outside [0,255]")
        if self.noise_amp is None:
            object.__setattr__(self, "noise_amp", DEFAULT_NOISE_AMP[self.prop])

    def color01(self):
        return np.asarray(self.color, dtype=np.float64) / 255.0


def food_catalog():
    """Food types keyed by name. The demo set is cereals/jello/water; the
    remaining entries exercise other colors and property classes."""
    mk = FoodSpec
    return {
        "milk": mk("milk", "liquid", (245, 243, 238)),
        "water": mk("water", "liquid", (110, 160, 240)),
        "rice": mk("rice", "granular", (240, 230, 175)),
        "cereals": mk("cereals", "granular", (185, 130, 70)),
        "beans": mk("beans", "granular", (56, 45, 30)),
        "jello": mk("jello", "semi_solid", (215, 40, 60)),
        "yogurt": mk("yogurt", "semi_solid", (240, 195, 245)),
        "soup": mk("soup", "mixture", (230, 140, 50)),
        "stew": mk("stew", "mixture", (150, 90, 40)),
        "melon": mk("melon", "solid", (245, 190, 40)),
        "broccoli": mk("broccoli", "solid", (60, 140, 60)),
    }


def unseen_food_catalog():
    """New colors over seen property classes (bean-mix analog)."""
    mk = FoodSpec
    return {
        "black_beans": mk("black_beans", "granular", (48, 42, 60)),
        "green_beans": mk("green_beans", "granular", (80, 170, 90)),
        "yellow_beans": mk("yellow_beans", "granular", (230, 210, 60)),
        "juice": mk("juice", "liquid", (200, 60, 150)),
    }


HOME_POSE = np.array([-0.85, -0.85, -0.8, 0.0, 0.0, 0.0])


@dataclass
class SimState:
    bowl: BowlSpec
    food: FoodSpec
    fill: float
    spoon: np.ndarray
    step_index: int
    seed: int
    items: np.ndarray            # (n, 2) solid item centers (x, y), pixels
    load: float = 0.0            # fill units currently on the spoon
    efficiency: float = 1.0      # hidden loading-rate factor, only visible
                                 # through how fast the spoon fills up
    scooped_total: float = 0.0
    initial_fill: float = 0.0
    spill_history: list = field(default_factory=list)


@dataclass(frozen=True)
class Observation:
    env: np.ndarray      # (64, 64, 3) in [0,1]
    hand: np.ndarray     # (32, 32, 3) in [0,1], crop centered on the tip
    proprio: np.ndarray  # (6,)


@dataclass(frozen=True)
class StepOutcome:
    scooped_amount: float
    spilled: bool
    collided_with_bowl: bool


def to_pixel(v):
    """Normalized [-1,1] coordinate to pixel index."""
    return int(round((float(v) + 1.0) / 2.0 * (ENV_SIZE - 1)))


def to_norm(px):
    """Pixel index to normalized [-1,1] coordinate."""
    return px / (ENV_SIZE - 1) * 2.0 - 1.0


def required_depth(fill):
    """Deeper scooping is needed as the bowl empties."""
    return DEPTH_BASE + DEPTH_GAIN * (1.0 - fill)


def make_env(bowl, food, fill, seed):
    if not (0.0 <= fill <= 1.0):
        raise ConfigError(f"fill {fill} outside [0,1]")
    cx, cy = bowl.center
    extent = bowl.radius
    if (cx - extent < 2 or cy - extent < 2
            or cx + extent > ENV_SIZE - 3 or cy + extent > ENV_SIZE - 3):
        raise ConfigError("bowl does not fit in the frame with 2px clearance")
    if bowl.shape not in ("circle", "square"):
        raise ConfigError(f"unknown bowl shape {bowl.shape!r}")
    rng = np.random.default_rng((int(seed), 101))
    items = np.zeros((0, 2))
    if food.prop in ("solid", "mixture"):
        n = max(1, int(round(fill * (20 if food.prop == "solid" else 6))))
        rmax = max(2.0, (bowl.interior_radius() - 2) * 0.75)
        pts = []
        while len(pts) < n:
            ang = rng.uniform(0, 2 * np.pi)
            rad = rmax * np.sqrt(rng.uniform())
            pts.append((cx + rad * np.cos(ang), cy + rad * np.sin(ang)))
        items = np.array(pts)
    return SimState(
        bowl=bowl, food=food, fill=float(fill), spoon=HOME_POSE.copy(),
        step_index=0, seed=int(seed), items=items, initial_fill=float(fill),
        efficiency=float(rng.uniform(*EFFICIENCY_RANGE)),
    )


def _grids():
    yy, xx = np.mgrid[0:ENV_SIZE, 0:ENV_SIZE]
    return xx, yy


def _interior_mask(bowl):
    xx, yy = _grids()
    cx, cy = bowl.center
    r = bowl.interior_radius()
    if bowl.shape == "circle":
        return (xx - cx) ** 2 + (yy - cy) ** 2 < r ** 2
    return (np.abs(xx - cx) < r) & (np.abs(yy - cy) < r)


def _wall_mask(bowl):
    xx, yy = _grids()
    cx, cy = bowl.center
    r, rint = bowl.radius, bowl.interior_radius()
    if bowl.shape == "circle":
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        return (d2 >= rint ** 2) & (d2 <= r ** 2)
    cheb = np.maximum(np.abs(xx - cx), np.abs(yy - cy))
    return (cheb >= rint) & (cheb <= r)


def food_region(state):
    """Unoccluded food mask for the current fill (uint8 HxW)."""
    xx, yy = _grids()
    cx, cy = state.bowl.center
    if state.food.prop == "solid":
        mask = np.zeros((ENV_SIZE, ENV_SIZE), dtype=bool)
        for ix, iy in state.items:
            mask |= (xx - ix) ** 2 + (yy - iy) ** 2 <= ITEM_RADIUS ** 2
        return (mask & _interior_mask(state.bowl)).astype(np.uint8)
    if state.fill <= 0.0:
        return np.zeros((ENV_SIZE, ENV_SIZE), dtype=np.uint8)
    # linear in fill so each 0.1 fill step moves the food boundary by about
    # one pixel: the rim annulus stays resolvable at every fill level
    r_food = (state.bowl.interior_radius() - 1) * (0.25 + 0.75 * state.fill)
    disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= r_food ** 2
    return (disk & _interior_mask(state.bowl)).astype(np.uint8)


def _spoon_footprint(state):
    xx, yy = _grids()
    px = to_pixel(state.spoon[0])
    py = to_pixel(state.spoon[1])
    return (xx - px) ** 2 + (yy - py) ** 2 <= 2 ** 2


def ground_truth_mask(state):
    """Food mask as visible in the render (spoon occlusion removed)."""
    return (food_region(state).astype(bool) & ~_spoon_footprint(state)).astype(
        np.uint8
    )


def _texture_noise(state, shape):
    """Per-property texture, bounded by the food's noise amplitude."""
    rng = np.random.default_rng((state.seed, state.step_index, 7))
    amp = state.food.noise_amp
    prop = state.food.prop
    if prop == "granular":
        return rng.uniform(-amp, amp, size=shape)
    if prop == "liquid":
        return rng.uniform(-amp, amp, size=shape)
    if prop == "semi_solid":
        coarse = rng.uniform(-amp, amp, size=(8, 8, shape[2]))
        return np.repeat(np.repeat(coarse, 8, axis=0), 8, axis=1)[
            :shape[0], :shape[1]
        ]
    if prop == "solid":
        return rng.uniform(-amp, amp, size=shape)
    # mixture: smooth base plus faint item-sized speckle
    noise = rng.uniform(-amp / 3, amp / 3, size=shape)
    xx, yy = _grids()
    for ix, iy in state.items:
        dot = (xx - ix) ** 2 + (yy - iy) ** 2 <= ITEM_RADIUS ** 2
        noise[dot] = -amp * 0.9
    return noise


def render(state):
    """Render the environment frame, the eye-in-hand crop, and proprioception."""
    frame = np.tile(BACKGROUND, (ENV_SIZE, ENV_SIZE, 1))
    frame[_interior_mask(state.bowl)] = BOWL_INTERIOR
    frame[_wall_mask(state.bowl)] = np.asarray(state.bowl.rim_color) / 255.0
    food = food_region(state).astype(bool)
    if food.any():
        base = np.tile(state.food.color01(), (ENV_SIZE, ENV_SIZE, 1))
        textured = base + _texture_noise(state, frame.shape)
        frame[food] = textured[food]
    # spoon: gray disk, darker the deeper it goes
    shade = 0.72 - 0.22 * (float(state.spoon[2]) + 1.0) / 2.0
    frame[_spoon_footprint(state)] = shade
    frame = np.clip(frame, 0.0, 1.0)

    px, py = to_pixel(state.spoon[0]), to_pixel(state.spoon[1])
    # close-up view: a 16x16 window centered on the spoon, magnified 2x.
    half = HAND_SIZE // 4
    patch = np.zeros((2 * half, 2 * half, 3))
    y0, y1 = py - half, py + half
    x0, x1 = px - half, px + half
    sy0, sy1 = max(y0, 0), min(y1, ENV_SIZE)
    sx0, sx1 = max(x0, 0), min(x1, ENV_SIZE)
    patch[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = frame[sy0:sy1, sx0:sx1]
    # only the close-up view resolves the spoon's contents: food heaps up on
    # the spoon as a disk whose radius grows with the load. Lift timing is
    # therefore observable through the hand-frame history alone.
    if state.load > 0.0:
        blend = min(state.load / EXPERT_LOAD_TARGET, 1.0)
        heap_r = 1.0 + 3.0 * blend
        yy, xx = np.mgrid[0:2 * half, 0:2 * half]
        heap = (xx - half) ** 2 + (yy - half) ** 2 <= heap_r ** 2
        patch[heap] = np.asarray(LOAD_INDICATOR)
    hand = np.repeat(np.repeat(patch, 2, axis=0), 2, axis=1)
    return Observation(env=frame, hand=hand, proprio=state.spoon.copy())


def step(state, action):
    """Advance one timestep. Returns (new_state, StepOutcome)."""
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (6,) or not np.all(np.isfinite(action)):
        raise ActionError(f"action must be a finite 6-vector, got {action}")
    new = dataclasses.replace(
        state,
        spoon=state.spoon.copy(),
        items=state.items.copy(),
        spill_history=list(state.spill_history),
    )
    prev = state.spoon
    pose = prev + np.clip(action - prev, -MAX_STEP, MAX_STEP)
    pose = np.clip(pose, -1.0, 1.0)
    new.spoon = pose
    new.step_index = state.step_index + 1

    dx, dy = pose[0] - prev[0], pose[1] - prev[1]
    displacement = float(np.hypot(dx, dy))
    depth, tilt = float(pose[2]), float(pose[3])
    px, py = to_pixel(pose[0]), to_pixel(pose[1])
    cx, cy = state.bowl.center

    # collision with the bowl wall
    if state.bowl.shape == "circle":
        wall_dist = np.hypot(px - cx, py - cy)
    else:
        wall_dist = max(abs(px - cx), abs(py - cy))
    in_wall = state.bowl.interior_radius() <= wall_dist <= state.bowl.radius
    collided = bool(in_wall and depth > RIM_DEPTH)

    # spillage of the carried load due to this step's motion
    spilled = False
    if new.load > 0.0:
        fast = displacement > SPILL_SPEED
        if (state.food.prop in ("liquid", "mixture") and fast) or abs(tilt) > TILT_LIMIT:
            new.fill += new.load
            new.load = 0.0
            spilled = True

    # loading at the new position
    prop = state.food.prop
    region = food_region(new)
    in_food = bool(region[py, px]) if 0 <= px < ENV_SIZE and 0 <= py < ENV_SIZE else False
    deep = depth >= required_depth(new.fill)
    moving = displacement >= MIN_SCOOP_MOTION  # food is gathered by dragging
    if not collided and in_food and deep and moving and new.load < LOAD_CAP:
        gained = 0.0
        if prop == "granular":
            overlap = geometry.local_density(region, 5)[py, px]
            gained = LOAD_RATE * float(overlap) * new.efficiency
        elif prop == "liquid":
            gained = LOAD_RATE * new.efficiency
        elif prop == "semi_solid":
            # a chunk either comes up whole or not at all
            if depth >= required_depth(new.fill) + CHUNK_EXTRA and new.load == 0.0:
                gained = 1.5 * LOAD_RATE
        elif prop == "mixture":
            gained = 0.5 * LOAD_RATE * new.efficiency
        gained = min(gained, new.fill, LOAD_CAP - new.load)
        new.fill -= gained
        new.load += gained
        # keep dragging with an overfull spoon and it dumps back out
        if new.load > OVERLOAD_LIMIT:
            new.fill += new.load
            new.load = 0.0
            spilled = True
    if prop in ("solid", "mixture") and not collided and deep and len(new.items):
        d = np.hypot(new.items[:, 0] - px, new.items[:, 1] - py)
        hit = d <= ITEM_PICK_RADIUS
        if hit.any() and new.load < LOAD_CAP:
            per_item = new.initial_fill / max(
                1, len(state.items) + (0 if prop == "solid" else 1)
            )
            take = int(hit.argmax())
            gained = min(per_item, new.fill, LOAD_CAP - new.load)
            new.fill -= gained
            new.load += gained
            new.items = np.delete(new.items, take, axis=0)

    # deposit when lifted clear of the bowl
    scooped = 0.0
    if depth <= DEPOSIT_DEPTH and new.load > 0.0:
        scooped = new.load
        new.scooped_total += scooped
        new.load = 0.0

    new.spill_history.append(spilled)
    return new, StepOutcome(
        scooped_amount=scooped, spilled=spilled, collided_with_bowl=collided
    )


def expert_action(state, r=9, m=3.0):
    """Scripted teleoperation stand-in: approach above the optimal scoop
    point, descend to a fill-dependent depth, sweep toward the centroid,
    then lift and deposit. Raises NoFeasiblePoint when the bowl is
    effectively empty.

    Plans on the unoccluded food region: the spoon shadow in the rendered
    mask would otherwise shift the density argmax every step."""
    mask = food_region(state)
    sp = geometry.optimal_scoop_point(mask, r=r, m=m)
    tx, ty = to_norm(sp.x), to_norm(sp.y)
    d_req = required_depth(state.fill)
    # generous overshoot: a cloned policy that under-tracks the depth
    # command still clears the loading threshold
    d_target = d_req + (CHUNK_EXTRA if state.food.prop == "semi_solid" else 0.0) + 0.15
    x, y, depth, _, sweep, _ = state.spoon

    if state.load >= EXPERT_LOAD_TARGET:
        return np.array([x, y, -1.0, 0.0, 1.0, 0.0])
    dist = np.hypot(tx - x, ty - y)
    if depth < d_target - 0.02:
        # approach while descending on a ramp keyed to target distance;
        # the smooth command keeps the cloned feedback law single-valued
        ramp = np.clip((0.35 - dist) / 0.30, 0.0, 1.0)
        depth_cmd = -0.8 + (d_target + 0.8) * ramp
        return np.array([tx, ty, depth_cmd, 0.0, sweep, 0.0])
    # at depth: sweep toward the food centroid at a property-safe speed,
    # orbiting it once close so the spoon keeps dragging through food for
    # however long the bowl's loading efficiency requires
    cx, cy = geometry.centroid(mask)
    dirx, diry = to_norm(cx) - x, to_norm(cy) - y
    norm = np.hypot(dirx, diry)
    if norm < 0.10:
        if norm < 1e-9:
            dirx, diry, norm = 1.0, 0.0, 1.0
        dirx, diry = -diry / norm, dirx / norm
        norm = 1.0
    speed = 0.10 if state.food.prop in ("liquid", "mixture") else 0.18
    return np.array([
        x + dirx / norm * speed, y + diry / norm * speed,
        d_target, 0.0, sweep + 0.34, 0.0,
    ])


def run_episode(state, policy_fn, horizon=40):
    """Roll one scooping attempt. policy_fn(state, obs) -> 6-vector.

    Returns (final_state, outcomes, records) where records hold per-step
    (obs, action, mask) tuples for trajectory export.
    """
    outcomes, records = [], []
    for _ in range(horizon):
        obs = render(state)
        action = policy_fn(state, obs)
        mask = ground_truth_mask(state)
        state, outcome = step(state, action)
        outcomes.append(outcome)
        records.append((obs, np.asarray(action, dtype=np.float64), mask))
        if outcome.scooped_amount > 0.0:
            break
    return state, outcomes, records


def attempt_summary(outcomes):
    """Collapse one attempt's step outcomes into (scooped, spilled, collided)."""
    scooped = sum(o.scooped_amount for o in outcomes)
    spilled = any(o.spilled for o in outcomes)
    collided = any(o.collided_with_bowl for o in outcomes)
    return scooped, spilled, collided


def episode_metrics(attempts):
    """SUR / SFR / AFS over a list of attempts, each a list of StepOutcome.

    Success means enough food deposited with no spill or collision; every
    other attempt counts toward the spillage-or-failure rate. AFS sums the
    deposited amount over the first AFS_WINDOW attempts.
    """
    if not attempts:
        raise MetricsError("no attempts")
    successes = 0
    for outcomes in attempts:
        scooped, spilled, collided = attempt_summary(outcomes)
        if scooped >= SUCCESS_MIN and not spilled and not collided:
            successes += 1
    n = len(attempts)
    sur = successes / n
    sfr = (n - successes) / n
    afs = sum(attempt_summary(o)[0] for o in attempts[:AFS_WINDOW])
    return sur, sfr, afs
