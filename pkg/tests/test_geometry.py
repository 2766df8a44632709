import numpy as np
import pytest

from imrl import geometry
from imrl.errors import ConfigError, EmptyMask, IoError, NoFeasiblePoint


# ---------------------------------------------------------------- oracles

def naive_box_sum(mask, x0, y0, x1, y1):
    h, w = mask.shape
    x0, x1 = max(x0, 0), min(x1, w - 1)
    y0, y1 = max(y0, 0), min(y1, h - 1)
    if x0 > x1 or y0 > y1:
        return 0
    return int(mask[y0:y1 + 1, x0:x1 + 1].sum())


def naive_density(mask, r):
    h, w = mask.shape
    half = r // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            y0, y1 = max(y - half, 0), min(y + half, h - 1)
            x0, x1 = max(x - half, 0), min(x + half, w - 1)
            count = mask[y0:y1 + 1, x0:x1 + 1].sum()
            out[y, x] = count / ((y1 - y0 + 1) * (x1 - x0 + 1))
    return out


def naive_boundary_distance(mask):
    h, w = mask.shape
    boundary = []
    for y in range(h):
        for x in range(w):
            if mask[y, x] != 1:
                continue
            edge = y in (0, h - 1) or x in (0, w - 1)
            hole = any(
                mask[y + dy, x + dx] == 0
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if 0 <= y + dy < h and 0 <= x + dx < w
            )
            if edge or hole:
                boundary.append((x, y))
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 1:
                out[y, x] = min(
                    np.hypot(x - bx, y - by) for bx, by in boundary
                )
    return out


def naive_scoop_point(mask, r, m):
    dist = naive_boundary_distance(mask)
    density = naive_density(mask, r)
    ys, xs = np.nonzero(mask)
    cx, cy = xs.mean(), ys.mean()
    best = None
    for y in range(mask.shape[0]):
        for x in range(mask.shape[1]):
            if mask[y, x] != 1 or dist[y, x] <= m:
                continue
            key = (-density[y, x], (x - cx) ** 2 + (y - cy) ** 2, y, x)
            if best is None or key < best[0]:
                best = (key, (x, y))
    return None if best is None else best[1]


def random_mask(rng, h, w, p=0.4):
    return (rng.random((h, w)) < p).astype(np.uint8)


def blob_mask(h, w, cx, cy, radius):
    yy, xx = np.mgrid[0:h, 0:w]
    return (((xx - cx) ** 2 + (yy - cy) ** 2) <= radius ** 2).astype(np.uint8)


# ----------------------------------------------------------------- tests

def test_centroid_symmetry():
    mask = np.zeros((3, 3), dtype=np.uint8)
    mask[0, 0] = 1
    mask[0, 2] = 1
    assert geometry.centroid(mask) == (1.0, 0.0)


def test_centroid_single_pixel():
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[7, 5] = 1
    assert geometry.centroid(mask) == (5.0, 7.0)


def test_centroid_empty():
    with pytest.raises(EmptyMask):
        geometry.centroid(np.zeros((4, 4), dtype=np.uint8))


def test_box_sum_full_rect():
    table = geometry.integral_image(np.ones((4, 4), dtype=np.uint8))
    assert geometry.box_sum(table, 0, 0, 3, 3) == 16


def test_box_sum_single_pixel():
    mask = np.zeros((6, 6), dtype=np.uint8)
    mask[2, 3] = 1
    table = geometry.integral_image(mask)
    assert geometry.box_sum(table, 2, 1, 4, 3) == 1
    assert geometry.box_sum(table, 0, 0, 1, 1) == 0


def test_box_sum_matches_naive_on_random_masks():
    rng = np.random.default_rng(0)
    for _ in range(50):
        h, w = rng.integers(2, 64, size=2)
        mask = random_mask(rng, h, w)
        table = geometry.integral_image(mask)
        for _ in range(4):
            x0, x1 = sorted(rng.integers(-3, w + 3, size=2))
            y0, y1 = sorted(rng.integers(-3, h + 3, size=2))
            assert geometry.box_sum(table, x0, y0, x1, y1) == \
                naive_box_sum(mask, x0, y0, x1, y1)


def test_density_saturated_window():
    d = geometry.local_density(np.ones((8, 8), dtype=np.uint8), 3)
    assert d[4, 4] == 1.0


def test_density_lone_pixel():
    mask = np.zeros((9, 9), dtype=np.uint8)
    mask[4, 4] = 1
    d = geometry.local_density(mask, 3)
    assert d[4, 4] == pytest.approx(1 / 9)


def test_density_corner_clipping():
    mask = np.zeros((9, 9), dtype=np.uint8)
    mask[0, 0] = 1
    d = geometry.local_density(mask, 3)
    assert d[0, 0] == pytest.approx(0.25)  # window clipped to 2x2


def test_density_rejects_even_r():
    with pytest.raises(ConfigError):
        geometry.local_density(np.ones((4, 4), dtype=np.uint8), 4)


def test_density_matches_naive_exactly():
    rng = np.random.default_rng(1)
    for _ in range(20):
        h, w = rng.integers(3, 40, size=2)
        mask = random_mask(rng, h, w)
        r = int(rng.choice([1, 3, 5, 9]))
        assert np.array_equal(geometry.local_density(mask, r), naive_density(mask, r))


def test_boundary_pixel_distance_zero():
    mask = np.ones((5, 5), dtype=np.uint8)
    d = geometry.boundary_distance(mask)
    assert d[0, 2] == 0.0  # touches the image edge


def test_block_center_distance():
    mask = np.zeros((9, 9), dtype=np.uint8)
    mask[2:7, 2:7] = 1  # solid 5x5 block
    d = geometry.boundary_distance(mask)
    assert d[4, 4] == pytest.approx(2.0)


def test_boundary_distance_matches_naive():
    rng = np.random.default_rng(2)
    for _ in range(15):
        h, w = rng.integers(3, 40, size=2)
        mask = random_mask(rng, h, w, p=0.6)
        if mask.sum() == 0:
            continue
        assert np.allclose(
            geometry.boundary_distance(mask), naive_boundary_distance(mask),
            atol=1e-9,
        )


def test_scoop_point_disk():
    mask = blob_mask(32, 32, 16, 16, 12)
    sp = geometry.optimal_scoop_point(mask, r=9, m=3.0)
    assert naive_scoop_point(mask, 9, 3.0) == (sp.x, sp.y)
    assert mask[sp.y, sp.x] == 1
    assert sp.boundary_distance > 3.0


def test_thin_line_infeasible():
    mask = np.zeros((16, 16), dtype=np.uint8)
    mask[8, 2:14] = 1
    with pytest.raises(NoFeasiblePoint):
        geometry.optimal_scoop_point(mask, r=3, m=2.0)


def test_dense_blob_beats_sparse_scatter():
    rng = np.random.default_rng(3)
    mask = np.zeros((32, 32), dtype=np.uint8)
    mask[4:13, 4:13] = 1  # dense 9x9 block
    ys = rng.integers(20, 31, size=15)
    xs = rng.integers(18, 31, size=15)
    mask[ys, xs] = 1
    sp = geometry.optimal_scoop_point(mask, r=9, m=1.0)
    assert 4 <= sp.x < 13 and 4 <= sp.y < 13
    assert naive_scoop_point(mask, 9, 1.0) == (sp.x, sp.y)


def test_scoop_point_matches_oracle_on_random_masks():
    rng = np.random.default_rng(4)
    checked_infeasible = 0
    for _ in range(30):
        h, w = rng.integers(4, 32, size=2)
        mask = random_mask(rng, h, w, p=float(rng.uniform(0.3, 0.9)))
        if mask.sum() == 0:
            continue
        m = float(rng.choice([0.0, 1.0, 2.0]))
        oracle = naive_scoop_point(mask, 5, m)
        if oracle is None:
            checked_infeasible += 1
            with pytest.raises(NoFeasiblePoint):
                geometry.optimal_scoop_point(mask, r=5, m=m)
        else:
            sp = geometry.optimal_scoop_point(mask, r=5, m=m)
            assert (sp.x, sp.y) == oracle
    assert checked_infeasible > 0


def test_translation_equivariance():
    base = blob_mask(40, 40, 12, 14, 7)
    dx, dy = 9, 6
    shifted = np.zeros_like(base)
    shifted[dy:, dx:] = base[:-dy, :-dx]
    sp0 = geometry.optimal_scoop_point(base, r=5, m=1.0)
    sp1 = geometry.optimal_scoop_point(shifted, r=5, m=1.0)
    assert (sp1.x, sp1.y) == (sp0.x + dx, sp0.y + dy)
    c0 = geometry.centroid(base)
    c1 = geometry.centroid(shifted)
    assert c1 == (c0[0] + dx, c0[1] + dy)


def test_threshold_segment_recovers_exact_color():
    rng = np.random.default_rng(5)
    color = np.array([0.8, 0.4, 0.2])
    frame = np.full((16, 16, 3), 0.1)
    mask = random_mask(rng, 16, 16)
    frame[mask == 1] = color
    seg = geometry.threshold_segment(frame, color, 0.0)
    assert np.array_equal(seg, mask)
    assert np.array_equal(geometry.threshold_segment(frame, color, 0.05), mask)


def test_threshold_segment_background_only():
    frame = np.zeros((8, 8, 3))
    assert geometry.threshold_segment(frame, [1.0, 1.0, 1.0], 0.1).sum() == 0


def test_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    mask = random_mask(rng, 12, 17)
    path = tmp_path / "m.pgm"
    geometry.write_pgm(mask, path)
    back = geometry.read_pgm(path)
    assert np.array_equal(mask, back)
    with pytest.raises(IoError):
        geometry.read_pgm(tmp_path / "missing.pgm")
