"""Binary-mask geometry: centroid, local food density via a summed-area
table, exact boundary distance, and the margin-constrained scooping point.

Masks are (H, W) uint8 arrays in {0, 1}, indexed mask[y, x]; points are
(x, y) pixel coordinates.
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, EmptyMask, IoError, NoFeasiblePoint


@dataclass
class ScoopPoint:
    x: int
    y: int
    density: float
    boundary_distance: float

    def as_line(self):
        return f"{self.x} {self.y} {self.density:.6f} {self.boundary_distance:.6f}"


def _as_mask(mask):
    m = np.asarray(mask)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ConfigError(f"mask must be 2D non-empty, got shape {m.shape}")
    if not np.isin(m, (0, 1)).all():
        raise ConfigError("mask values must be 0 or 1")
    return m.astype(np.uint8)


def centroid(mask):
    """Mean (x, y) over food pixels."""
    m = _as_mask(mask)
    ys, xs = np.nonzero(m)
    if xs.size == 0:
        raise EmptyMask("mask has no food pixels")
    return float(xs.mean()), float(ys.mean())


def integral_image(mask):
    """Summed-area table with a zero row/column pad, int64 exact."""
    m = _as_mask(mask).astype(np.int64)
    table = np.zeros((m.shape[0] + 1, m.shape[1] + 1), dtype=np.int64)
    table[1:, 1:] = m.cumsum(axis=0).cumsum(axis=1)
    return table


def box_sum(table, x0, y0, x1, y1):
    """Food-pixel count over the inclusive rect [x0,x1]x[y0,y1], clipped."""
    h, w = table.shape[0] - 1, table.shape[1] - 1
    x0, x1 = max(x0, 0), min(x1, w - 1)
    y0, y1 = max(y0, 0), min(y1, h - 1)
    if x0 > x1 or y0 > y1:
        return 0
    return int(
        table[y1 + 1, x1 + 1] - table[y0, x1 + 1]
        - table[y1 + 1, x0] + table[y0, x0]
    )


def local_density(mask, r):
    """Food fraction in the r x r window around each pixel; windows are
    clipped at borders and the divisor is the clipped pixel count."""
    if r < 1 or r % 2 == 0:
        raise ConfigError(f"neighborhood size r must be odd and >= 1, got {r}")
    m = _as_mask(mask)
    h, w = m.shape
    half = r // 2
    table = integral_image(m)
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - half, 0, h - 1)
    y1 = np.clip(ys + half, 0, h - 1)
    x0 = np.clip(xs - half, 0, w - 1)
    x1 = np.clip(xs + half, 0, w - 1)
    counts = (
        table[np.ix_(y1 + 1, x1 + 1)] - table[np.ix_(y0, x1 + 1)]
        - table[np.ix_(y1 + 1, x0)] + table[np.ix_(y0, x0)]
    )
    areas = np.outer(y1 - y0 + 1, x1 - x0 + 1)
    return counts / areas


def boundary_pixels(mask):
    """Food pixels 4-adjacent to a non-food pixel or to the image edge."""
    m = _as_mask(mask)
    padded = np.pad(m, 1, constant_values=0)
    interior = (
        (padded[:-2, 1:-1] == 1) & (padded[2:, 1:-1] == 1)
        & (padded[1:-1, :-2] == 1) & (padded[1:-1, 2:] == 1)
    )
    return (m == 1) & ~interior


def boundary_distance(mask):
    """Exact Euclidean distance from each food pixel to the nearest
    boundary pixel; 0 on boundary pixels and outside the mask."""
    m = _as_mask(mask)
    if m.sum() == 0:
        raise EmptyMask("mask has no food pixels")
    boundary = boundary_pixels(m)
    dist = ndimage.distance_transform_edt(~boundary)
    return np.where(m == 1, dist, 0.0)


def optimal_scoop_point(mask, r=9, m=3.0):
    """Food pixel maximizing local density among pixels whose boundary
    distance exceeds the margin m. Ties break to the pixel nearest the
    centroid, then row-major.
    """
    if m < 0:
        raise ConfigError(f"margin m must be >= 0, got {m}")
    mask = _as_mask(mask)
    if mask.sum() == 0:
        raise NoFeasiblePoint("empty mask")
    dist = boundary_distance(mask)
    feasible = (mask == 1) & (dist > m)
    if not feasible.any():
        raise NoFeasiblePoint(f"no food pixel clears margin {m}")
    density = local_density(mask, r)
    cx, cy = centroid(mask)
    ys, xs = np.nonzero(feasible)
    dens = density[ys, xs]
    best = dens.max()
    top = np.nonzero(dens == best)[0]
    if top.size > 1:
        d2 = (xs[top] - cx) ** 2 + (ys[top] - cy) ** 2
        top = top[d2 == d2.min()]
        # np.nonzero is already row-major ordered, so the first wins
    i = top[0]
    return ScoopPoint(
        x=int(xs[i]), y=int(ys[i]),
        density=float(dens[i]),
        boundary_distance=float(dist[ys[i], xs[i]]),
    )


def threshold_segment(frame, food_color, tolerance):
    """Mark a pixel as food iff every channel is within tolerance of the
    food color. Frame is (H, W, 3) in [0, 1]."""
    if tolerance < 0:
        raise ConfigError(f"tolerance must be >= 0, got {tolerance}")
    frame = np.asarray(frame, dtype=np.float64)
    color = np.asarray(food_color, dtype=np.float64)
    close = np.abs(frame - color) <= tolerance
    return close.all(axis=-1).astype(np.uint8)


def write_pgm(mask, path):
    """Plain-text PGM (P2, maxval 1)."""
    m = _as_mask(mask)
    h, w = m.shape
    try:
        with open(path, "w") as f:
            f.write(f"P2\n{w} {h}\n1\n")
            for row in m:
                f.write(" ".join(str(int(v)) for v in row) + "\n")
    except OSError as e:
        raise IoError(str(e)) from e


def read_pgm(path):
    try:
        with open(path) as f:
            tokens = []
            for line in f:
                line = line.split("#", 1)[0]
                tokens.extend(line.split())
    except OSError as e:
        raise IoError(str(e)) from e
    if not tokens or tokens[0] != "P2":
        raise IoError(f"{path}: not a plain PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    vals = np.array([int(t) for t in tokens[4:4 + w * h]], dtype=np.int64)
    if vals.size != w * h:
        raise IoError(f"{path}: truncated pixel data")
    if maxval != 1 or vals.max(initial=0) > 1:
        raise IoError(f"{path}: expected a binary mask with maxval 1")
    return vals.reshape(h, w).astype(np.uint8)
