"""
Pair screening tests: adjacency, Walking Energy, V score, C+/C- sets, partitioning
"""

import math

import numpy as np
import pytest

from tests.helpers import candidate, circle_contour, contour_candidate, flat_profile
from utils.curvature import compute_curvature
from utils.errors import InvalidPairError
from utils.pairing import (
    PairingParams,
    PairKind,
    chord_inside_mask,
    chords_cross,
    classify_adjacency,
    make_pair,
    merge_low_energy,
    partition_contour,
    resolve_crossings,
    screen_pairs,
    v_score,
    walking_energy,
)

PARAMS = PairingParams()


def test_adjacency_is_circular():
    cands = [candidate(200, (0, 0)), candidate(10, (1, 0)), candidate(50, (2, 0))]
    pairs = classify_adjacency(cands)
    assert [pair.endpoints for pair in pairs] == [(10, 50), (50, 200), (200, 10)]
    assert all(pair.kind is PairKind.ADJACENT for pair in pairs)


def test_single_candidate_has_no_pairs():
    assert classify_adjacency([candidate(3, (0, 0))]) == []


def test_two_candidates_pair_in_both_directions():
    pairs = classify_adjacency([candidate(3, (0, 0)), candidate(9, (4, 0))])
    assert [pair.endpoints for pair in pairs] == [(3, 9), (9, 3)]


def test_quarter_circle_walking_energy():
    contour = circle_contour(20.0, 400)
    p, q = contour_candidate(contour, 0), contour_candidate(contour, 100)
    energy = walking_energy(contour, p, q)
    assert energy == pytest.approx(math.pi / 2, rel=0.03)
    assert walking_energy(contour, q, p) == energy


def test_flat_arc_has_zero_energy():
    contour = circle_contour(20.0, 100)
    profile = flat_profile(np.zeros(100))
    p, q = contour_candidate(contour, 10), contour_candidate(contour, 30)
    assert walking_energy(contour, p, q, profile) == 0.0
    assert walking_energy(contour, p, p, profile) == 0.0


def test_low_energy_neighbours_merge_into_stronger_point():
    contour = circle_contour(100.0, 200)
    profile = flat_profile(np.zeros(200))
    weak, strong = contour_candidate(contour, 10, kappa=-0.1), contour_candidate(contour, 15, kappa=-0.3)
    merged = merge_low_energy([weak, strong], contour, PARAMS, profile)
    assert merged == [strong]


def test_convex_bulge_keeps_both_points():
    contour = circle_contour(100.0, 200)
    kappa = np.zeros(200)
    kappa[10:60] = 0.1
    p, q = contour_candidate(contour, 10), contour_candidate(contour, 20)
    assert merge_low_energy([p, q], contour, PARAMS, flat_profile(kappa)) == [p, q]


def test_merge_of_nothing():
    assert merge_low_energy([], circle_contour(10.0, 40), PARAMS) == []


def test_v_score_for_perpendicular_normals():
    p = candidate(0, (0, 0), normal=(1.0, 0.0), kappa=-0.1)
    q = candidate(20, (30, 0), normal=(0.0, 1.0), kappa=-0.1)
    assert v_score(p, q, PARAMS) == pytest.approx(9000.0 / 30.068, rel=1e-6)
    assert v_score(p, q, PARAMS) == pytest.approx(299.3, abs=0.1)


def test_v_score_for_parallel_normals_is_zero():
    p = candidate(0, (0, 0), normal=(1.0, 0.0))
    q = candidate(20, (30, 0), normal=(1.0, 0.0))
    assert v_score(p, q, PARAMS) == 0.0


def test_v_score_for_opposing_flat_points():
    p = candidate(0, (0, 0), normal=(1.0, 0.0), kappa=0.0)
    q = candidate(20, (69, 0), normal=(-1.0, 0.0), kappa=0.0)
    assert v_score(p, q, PARAMS) == pytest.approx(260.87, abs=0.01)


def test_coincident_flat_pair_is_invalid():
    p = candidate(0, (5, 5), kappa=0.0)
    q = candidate(20, (5, 5), kappa=0.0)
    with pytest.raises(InvalidPairError):
        v_score(p, q, PARAMS)


def _four_candidates(p20_position, p20_normal):
    """Candidates at contour indices 0, 10, 20, 30; (0, 20) and (10, 30) are non-adjacent"""
    return [
        candidate(0, (0, 0), normal=(1.0, 0.0)),
        candidate(10, (100, 100), normal=(1.0, 0.0)),
        candidate(20, p20_position, normal=p20_normal),
        candidate(30, (200, 200), normal=(1.0, 0.0)),
    ]


def test_close_non_adjacent_pair_joins_inner_set_without_v_test():
    contour = circle_contour(30.0, 40)
    result = screen_pairs(_four_candidates((40, 0), (1.0, 0.0)), contour, None, PARAMS)
    assert [pair.endpoints for pair in result.c_minus] == [(0, 20)]
    assert result.c_minus[0].kind is PairKind.NONADJACENT_INNER
    assert result.c_minus[0].v_score == 0.0


def test_inner_pairs_can_require_the_v_test():
    contour = circle_contour(30.0, 40)
    strict = PairingParams(inner_pairs_require_v=True)
    result = screen_pairs(_four_candidates((40, 0), (1.0, 0.0)), contour, None, strict)
    assert result.c_minus == ()
    assert [pair.endpoints for pair in result.rejected] == [(0, 20)]


def test_ring_pair_with_low_v_is_rejected():
    contour = circle_contour(30.0, 40)
    result = screen_pairs(_four_candidates((60, 0), (0.0, 1.0)), contour, None, PARAMS)
    assert result.c_minus == ()
    assert result.rejected[0].v_score == pytest.approx(150.0, rel=0.01)


def test_ring_pair_with_high_v_is_accepted():
    contour = circle_contour(30.0, 40)
    result = screen_pairs(_four_candidates((60, 0), (-1.0, 0.0)), contour, None, PARAMS)
    assert [pair.endpoints for pair in result.c_minus] == [(0, 20)]
    assert result.c_minus[0].kind is PairKind.NONADJACENT_RING
    assert result.c_minus[0].v_score > PARAMS.v_threshold


def test_far_pairs_are_ignored():
    contour = circle_contour(30.0, 40)
    result = screen_pairs(_four_candidates((90, 0), (-1.0, 0.0)), contour, None, PARAMS)
    assert result.c_minus == ()
    assert result.rejected == ()


def test_raising_v_threshold_never_adds_pairs():
    rng = np.random.default_rng(0)
    contour = circle_contour(30.0, 40)
    loose, strict = PairingParams(v_threshold=150.0), PairingParams(v_threshold=250.0)
    for _ in range(200):
        cands = []
        for index in (0, 10, 20, 30):
            angle = rng.uniform(0, 2 * math.pi)
            cands.append(candidate(index, tuple(rng.uniform(0, 80, 2)), (math.cos(angle), math.sin(angle)),
                                   kappa=-rng.uniform(0.0, 0.3)))
        keys_loose = {pair.key for pair in screen_pairs(cands, contour, None, loose).c_minus}
        keys_strict = {pair.key for pair in screen_pairs(cands, contour, None, strict).c_minus}
        assert keys_strict <= keys_loose


def test_chord_leaving_the_mask_is_refused():
    mask = np.ones((40, 80), dtype=bool)
    mask[:, 38:42] = False
    p = candidate(0, (10, 20), normal=(1.0, 0.0))
    q = candidate(20, (70, 20), normal=(-1.0, 0.0))
    assert not chord_inside_mask(mask, p, q)
    assert chord_inside_mask(np.ones((40, 80), dtype=bool), p, q)


def test_screening_on_real_clump_contour():
    from tests.helpers import two_disc_mask
    from utils.curvature import vote_candidates
    from utils.image_prep import BinaryMask, smooth_contour, trace_contours

    mask = BinaryMask(two_disc_mask())
    contour = smooth_contour(trace_contours(mask)[0], 3.0)
    profile = compute_curvature(contour)
    cands = merge_low_energy(vote_candidates(contour, profile, mask), contour, PARAMS, profile)
    result = screen_pairs(cands, contour, mask, PARAMS, profile)
    assert len(cands) == 2
    assert result.c_minus == ()
    assert len(result.c_plus) == 2
    assert all(pair.walk_energy >= PARAMS.walk_energy_threshold for pair in result.c_plus)


# ---------------------------------------------------------------------------
# Chords and faces
# ---------------------------------------------------------------------------

def _chord(contour, i, j, v=250.0):
    return make_pair(contour_candidate(contour, i), contour_candidate(contour, j),
                     PairKind.NONADJACENT_INNER, v_score=v)


def test_chords_cross_topologically():
    contour = circle_contour(30.0, 60)
    assert chords_cross(_chord(contour, 0, 30), _chord(contour, 10, 40))
    assert not chords_cross(_chord(contour, 0, 30), _chord(contour, 35, 50))
    assert not chords_cross(_chord(contour, 0, 30), _chord(contour, 30, 45))


def test_crossing_resolved_in_favour_of_higher_v():
    contour = circle_contour(30.0, 60)
    strong, weak = _chord(contour, 10, 40, v=300.0), _chord(contour, 0, 30, v=210.0)
    assert resolve_crossings([weak, strong]) == [strong]


def test_partition_without_chords_is_whole_contour():
    contour = circle_contour(30.0, 60)
    (face,) = partition_contour(contour, [])
    assert face.arcs == ((0, 59),)
    assert face.virtual_edges == ()


def test_one_chord_gives_two_faces():
    contour = circle_contour(30.0, 60)
    faces = partition_contour(contour, [_chord(contour, 0, 30)])
    assert len(faces) == 2
    assert sorted(len(face.vertex_set()) for face in faces) == [31, 31]


def test_two_chords_give_three_faces_and_conserve_area():
    contour = circle_contour(30.0, 60)
    faces = partition_contour(contour, [_chord(contour, 0, 20), _chord(contour, 30, 50)])
    assert len(faces) == 3
    total = sum(face.area(contour) for face in faces)
    assert total == pytest.approx(contour.signed_area, rel=1e-9)
    assert all(face.area(contour) > 0 for face in faces)


def test_walking_energy_is_symmetric():
    from tests.helpers import two_disc_mask
    from utils.image_prep import BinaryMask, smooth_contour, trace_contours

    contour = smooth_contour(trace_contours(BinaryMask(two_disc_mask()))[0], 3.0)
    profile = compute_curvature(contour)
    rng = np.random.default_rng(11)
    for i, j in rng.integers(0, len(contour), size=(200, 2)):
        p, q = contour_candidate(contour, int(i)), contour_candidate(contour, int(j))
        forward = walking_energy(contour, p, q, profile)
        assert walking_energy(contour, q, p, profile) == pytest.approx(forward, abs=1e-9)
        assert forward >= 0.0
