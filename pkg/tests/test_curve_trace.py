"""
Hessian valley tracing and mask division tests
"""

import math

import numpy as np
import pytest

from tests.helpers import disc_mask
from utils.curve_trace import (
    DividingPath,
    apply_divisions,
    eigen_2x2,
    hessian_field,
    path_to_rle,
    rle_to_path,
    snap_to_boundary,
    straight_path,
    trace_dividing_curve,
)
from utils.errors import TraceError


def _grid(size=64):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    return xx, yy


def test_hessian_of_quadratic_in_x():
    xx, _ = _grid()
    field = hessian_field((xx - 32.0) ** 2, sigma=2.0)
    assert field.ixx[32, 32] == pytest.approx(2.0, rel=0.02)
    assert field.iyy[32, 32] == pytest.approx(0.0, abs=0.05)
    assert field.ixy[32, 32] == pytest.approx(0.0, abs=1e-6)


def test_hessian_of_bilinear_term():
    xx, yy = _grid()
    field = hessian_field((xx - 32.0) * (yy - 32.0), sigma=2.0)
    assert field.ixy[32, 32] == pytest.approx(1.0, rel=0.02)


def test_hessian_of_constant_image_is_zero():
    field = hessian_field(np.full((32, 32), 0.4), sigma=2.0)
    assert np.allclose(field.ixx, 0.0, atol=1e-12)
    assert np.allclose(field.lambda2, 0.0, atol=1e-12)


@pytest.mark.parametrize("matrix, expected", [
    ([[2.0, 0.0], [0.0, 0.0]], (0.0, 2.0, (1.0, 0.0))),
    ([[0.0, 1.0], [1.0, 0.0]], (-1.0, 1.0, (math.sqrt(0.5), math.sqrt(0.5)))),
])
def test_eigen_examples(matrix, expected):
    l1, l2, v1, v2 = eigen_2x2(np.array(matrix))
    assert float(l1) == pytest.approx(expected[0], abs=1e-12)
    assert float(l2) == pytest.approx(expected[1], abs=1e-12)
    assert abs(float(v2 @ np.array(expected[2]))) == pytest.approx(1.0, abs=1e-12)


def test_eigen_decomposition_reconstructs_random_matrices():
    rng = np.random.default_rng(0)
    a, b, c = rng.normal(size=(3, 100_000))
    h = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)
    l1, l2, v1, v2 = eigen_2x2(h)
    rebuilt = (l1[:, None, None] * v1[:, :, None] * v1[:, None, :]
               + l2[:, None, None] * v2[:, :, None] * v2[:, None, :])
    assert np.abs(rebuilt - h).max() < 1e-12
    assert np.all(l1 <= l2)
    assert np.allclose(np.einsum("ij,ij->i", v1, v2), 0.0, atol=1e-12)
    assert np.allclose(np.hypot(v1[:, 0], v1[:, 1]), 1.0, atol=1e-12)


def test_walk_follows_horizontal_valley():
    xx, yy = _grid()
    img = 0.5 + 1e-4 * (yy - 32.0) ** 2
    field = hessian_field(img, sigma=2.0)
    path = trace_dividing_curve(field, img, (5, 32), (58, 32))
    assert not path.fallback
    assert path.start == (5, 32) and path.end == (58, 32)
    assert all(abs(y - 32) <= 1 for _, y in path.pixels)


def test_walk_follows_vertical_valley():
    xx, yy = _grid()
    img = 0.5 + 1e-4 * (xx - 20.0) ** 2
    field = hessian_field(img, sigma=2.0)
    path = trace_dividing_curve(field, img, (20, 4), (20, 60))
    assert not path.fallback
    assert all(x == 20 for x, _ in path.pixels)


def test_uniform_image_falls_back_to_straight_chord():
    img = np.full((64, 64), 0.5)
    field = hessian_field(img)
    path = trace_dividing_curve(field, img, (5, 10), (50, 40))
    assert path.fallback
    assert list(path.pixels) == straight_path((5, 10), (50, 40))


def test_every_step_stays_in_the_sector_and_budget():
    rng = np.random.default_rng(5)
    from scipy.ndimage import gaussian_filter

    for _ in range(10):
        img = gaussian_filter(rng.uniform(0.0, 1.0, (64, 64)), 3.0)
        field = hessian_field(img)
        p, q = (8, 8), (55, 50)
        path = trace_dividing_curve(field, img, p, q)
        assert path.start == p and path.end == q
        if path.fallback:
            continue
        assert len(path) - 1 <= math.ceil(4.0 * math.dist(p, q))
        for (x0, y0), (x1, y1) in zip(path.pixels, path.pixels[1:]):
            bearing = math.atan2(q[1] - y0, q[0] - x0)
            heading = math.atan2(y1 - y0, x1 - x0)
            turn = abs((heading - bearing + math.pi) % (2 * math.pi) - math.pi)
            assert math.degrees(turn) <= 45.0 + 1e-6


def test_tracing_is_deterministic():
    xx, yy = _grid()
    img = 0.5 + 1e-4 * (yy - 0.3 * xx - 20.0) ** 2
    field = hessian_field(img)
    first = trace_dividing_curve(field, img, (4, 21), (60, 38))
    second = trace_dividing_curve(field, img, (4, 21), (60, 38))
    assert first == second


def test_bad_endpoints_raise():
    img = np.zeros((32, 32))
    field = hessian_field(img)
    with pytest.raises(TraceError):
        trace_dividing_curve(field, img, (5, 5), (5, 5))
    with pytest.raises(TraceError):
        trace_dividing_curve(field, img, (5, 5), (40, 5))


def test_path_validation():
    with pytest.raises(ValueError):
        DividingPath(pixels=((0, 0), (2, 0)))
    with pytest.raises(ValueError):
        DividingPath(pixels=((0, 0), (1, 0), (0, 0)))


def test_path_rle_restores_pixels():
    path = DividingPath(pixels=tuple(straight_path((3, 4), (20, 11))))
    encoded = path_to_rle(path)
    assert encoded["start"] == [3, 4]
    assert rle_to_path(encoded).pixels == path.pixels


def test_endpoint_snaps_to_inner_boundary():
    bits = disc_mask((64, 64), [(32, 32, 15)])
    x, y = snap_to_boundary(bits, (32 + 18.0, 32.0))
    assert bits[y, x]
    neighbours = [bits[y + dy, x + dx] for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    assert not all(neighbours)
    assert (x, y) == (47, 32)


# ---------------------------------------------------------------------------
# apply_divisions
# ---------------------------------------------------------------------------

def test_no_paths_labels_each_component():
    bits = disc_mask((64, 96), [(20, 30, 12), (70, 30, 12)])
    labels = apply_divisions(bits, [])
    assert labels.count == 2


def test_empty_mask_gives_no_labels():
    assert apply_divisions(np.zeros((16, 16), dtype=bool), []).count == 0


def test_bisected_disc_gives_two_labels():
    bits = disc_mask((64, 64), [(32, 32, 20)])
    cut = DividingPath(pixels=tuple(straight_path((32, 12), (32, 52))))
    labels = apply_divisions(bits, [cut])
    assert labels.count == 2
    assert np.array_equal(labels.labels > 0, bits)
    left, right = labels.labels[32, 20], labels.labels[32, 44]
    assert left != right and left > 0 and right > 0


def _column_cut(bits, column):
    rows = np.flatnonzero(bits[:, column])
    return DividingPath(pixels=tuple(straight_path((column, int(rows.min())), (column, int(rows.max())))))


def test_three_lobed_chain_gives_three_labels():
    bits = disc_mask((80, 96), [(20, 40, 18), (48, 40, 18), (76, 40, 18)])
    labels = apply_divisions(bits, [_column_cut(bits, 34), _column_cut(bits, 62)])
    assert labels.count == 3
    assert int((labels.labels > 0).sum()) == int(bits.sum())


def test_tiny_fragment_is_merged():
    bits = disc_mask((64, 64), [(32, 32, 20)])
    rows = np.flatnonzero(bits[:, 50])
    sliver = DividingPath(pixels=tuple(straight_path((50, int(rows.min())), (50, int(rows.max())))))
    labels = apply_divisions(bits, [sliver], min_fragment_area=100)
    assert labels.count == 1


def test_corpus_paths_keep_the_sector_and_budget(corpus_runs, default_config):
    seen = 0
    for _, _, result in corpus_runs:
        for path in result.paths:
            seen += 1
            if path.fallback:
                continue
            start, goal = path.start, path.end
            assert len(path) - 1 <= math.ceil(default_config.trace_budget_factor * math.dist(start, goal))
            for (x0, y0), (x1, y1) in zip(path.pixels, path.pixels[1:]):
                bearing = math.atan2(goal[1] - y0, goal[0] - x0)
                heading = math.atan2(y1 - y0, x1 - x0)
                turn = abs((heading - bearing + math.pi) % (2 * math.pi) - math.pi)
                assert math.degrees(turn) <= default_config.sector_deg + 1e-6
    assert seen > 0
