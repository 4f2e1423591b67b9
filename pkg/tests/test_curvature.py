"""
Curvature profile and concave-point voting tests
"""

import math

import numpy as np
import pytest

from tests.helpers import circle_contour, flat_profile, two_disc_mask
from utils.curvature import (
    compute_curvature,
    find_concave_segments,
    outward_normal,
    profile_records,
    segment_indices,
    vote_candidate,
    vote_candidates,
)
from utils.image_prep import BinaryMask, Contour, smooth_contour, trace_contours
from utils.pairing import normal_angle_deg


@pytest.mark.parametrize("radius", [10.0, 20.0, 50.0])
def test_circle_curvature_is_inverse_radius(radius):
    n = int(round(2 * math.pi * radius))
    contour = smooth_contour(circle_contour(radius, n, (100.0, 100.0)), 3.0)
    profile = compute_curvature(contour)
    assert profile.kappa.mean() == pytest.approx(1.0 / radius, rel=0.03)
    assert np.all(profile.kappa > 0)


def test_profile_arc_and_length():
    profile = compute_curvature(circle_contour(20.0, 400))
    assert profile.arc[0] == 0.0
    assert np.all(np.diff(profile.arc) > 0)
    assert profile.length == pytest.approx(2 * math.pi * 20.0, rel=1e-3)
    assert profile.kappa == pytest.approx(np.full(400, 0.05), rel=1e-3)


def test_full_convex_contour_has_no_concave_segment():
    profile = compute_curvature(circle_contour(20.0, 200))
    assert find_concave_segments(profile) == []


def test_concave_run_is_found():
    kappa = np.full(50, 0.05)
    kappa[10:16] = -0.2
    assert find_concave_segments(flat_profile(kappa)) == [(10, 15)]


def test_run_across_the_seam_stays_whole():
    kappa = np.full(40, 0.05)
    kappa[[38, 39, 0, 1]] = -0.1
    assert find_concave_segments(flat_profile(kappa)) == [(38, 1)]


def test_single_sample_runs_are_dropped():
    kappa = np.full(40, 0.05)
    kappa[5] = -0.5
    kappa[20:23] = -0.5
    assert find_concave_segments(flat_profile(kappa)) == [(20, 22)]


def test_kappa_min_must_be_positive():
    with pytest.raises(ValueError):
        find_concave_segments(flat_profile(np.zeros(20)), kappa_min=0.0)


def test_linear_weight_votes_two_thirds_along_segment():
    contour = circle_contour(30.0, 100)
    kappa = np.full(100, 0.05)
    kappa[10:31] = -np.linspace(0.0, 1.0, 21)
    cand = vote_candidate(contour, flat_profile(kappa), (10, 30))
    t_star = (cand.s_star - 0.10) * 100 / 20
    assert t_star == pytest.approx(2.0 / 3.0, abs=0.02)
    assert cand.contour_index == 23
    assert cand.kappa == pytest.approx(-0.65)


def test_symmetric_segment_votes_its_middle():
    contour = circle_contour(30.0, 100)
    kappa = np.full(100, 0.05)
    kappa[40:61] = -(1.0 - np.abs(np.linspace(-1.0, 1.0, 21))) - 0.05
    cand = vote_candidate(contour, flat_profile(kappa), (40, 60))
    assert abs(cand.contour_index - 50) <= 1


def test_zero_weight_segment_votes_midpoint():
    contour = circle_contour(30.0, 100)
    cand = vote_candidate(contour, flat_profile(np.zeros(100)), (20, 30))
    assert cand.contour_index == 25
    assert cand.s_star == pytest.approx(0.25)


def test_outward_normal_on_circle():
    contour = circle_contour(20.0, 128, (50.0, 50.0))
    assert outward_normal(contour, 0) == pytest.approx((1.0, 0.0), abs=1e-9)
    assert outward_normal(contour, 32) == pytest.approx((0.0, 1.0), abs=1e-9)


def test_outward_normal_flipped_by_mask_probe():
    contour = circle_contour(20.0, 128, (50.0, 50.0))
    inside_out = np.ones((100, 100), dtype=bool)
    yy, xx = np.mgrid[0:100, 0:100]
    inside_out[(xx - 50) ** 2 + (yy - 50) ** 2 <= 20 ** 2] = False
    assert outward_normal(contour, 0, inside_out) == pytest.approx((-1.0, 0.0), abs=1e-9)


@pytest.fixture(scope="module")
def two_disc_clump():
    mask = BinaryMask(two_disc_mask())
    (raw,) = trace_contours(mask)
    contour = smooth_contour(raw, 3.0)
    return contour, compute_curvature(contour), mask


def test_two_disc_clump_has_two_notches(two_disc_clump):
    contour, profile, mask = two_disc_clump
    segments = find_concave_segments(profile)
    assert len(segments) == 2
    for start, end in segments:
        assert profile.kappa[segment_indices((start, end), len(profile))].min() < -0.05


def test_two_disc_notches_face_each_other(two_disc_clump):
    contour, profile, mask = two_disc_clump
    upper, lower = sorted(vote_candidates(contour, profile, mask), key=lambda c: c.position[1])
    assert upper.position[0] == pytest.approx(48.0, abs=2.0)
    assert lower.position[0] == pytest.approx(48.0, abs=2.0)
    assert upper.normal[1] < 0 < lower.normal[1]
    assert normal_angle_deg(upper, lower) > 90.0
    assert upper.kappa < 0 and lower.kappa < 0


def test_profile_records_columns(two_disc_clump):
    contour, profile, _ = two_disc_clump
    records = profile_records(contour, profile)
    assert len(records) == len(contour)
    assert set(records[0]) == {"index", "x", "y", "s", "kappa"}


def _rotate(points, degrees, center=(48.0, 48.0)):
    theta = math.radians(degrees)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    return (np.asarray(points) - center) @ rot.T + center


@pytest.mark.parametrize("degrees", [37.0, 90.0, 200.0])
def test_candidates_rotate_with_the_contour(two_disc_clump, degrees):
    contour, profile, _ = two_disc_clump
    reference = vote_candidates(contour, profile)
    turned = Contour(_rotate(contour.points, degrees), contour_id=contour.contour_id)
    rotated = vote_candidates(turned, compute_curvature(turned))

    assert len(rotated) == len(reference) == 2
    expected = _rotate([c.position for c in reference], degrees)
    for cand, (x, y) in zip(rotated, expected):
        assert math.dist(cand.position, (x, y)) <= 1.0
