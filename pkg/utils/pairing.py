"""
Candidate pair screening and contour partitioning

Bu modül aday noktaları çiftlere ayırır:
- Komşu (adjacent) çiftler: kontur boyunca ardışık adaylar; düşük Walking
  Energy ile birleştirilir, yüksek enerjili olanlar C+ kümesine girer
- Komşu olmayan çiftler: r1 diski (C1-) ve r1–r2 halkası + V skoru (C2-)
- C- kirişleri ile konturun alt bölgelere (SubContour / face) ayrılması

Bir face, kontur indeks aralıkları (arcs) ile bu aralıkları kapatan kirişlerin
(virtual_edges) dönüşümlü dizisidir; virtual_edges[k], arcs[k]'nın sonundan
arcs[k+1]'in başına gider.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from skimage.draw import line as draw_line

from utils.curvature import CandidatePoint, CurvatureProfile, compute_curvature, segment_indices
from utils.errors import InvalidPairError
from utils.image_prep import Contour, mask_bits, polygon_signed_area

logger = logging.getLogger(__name__)

PairKey = FrozenSet[Tuple[int, int]]


class PairKind(str, Enum):
    ADJACENT = "adjacent"
    NONADJACENT_INNER = "nonadjacent_inner"
    NONADJACENT_RING = "nonadjacent_ring"


@dataclass(frozen=True)
class PairingParams:
    """Search radii, V weights and the Walking Energy threshold"""
    r1: float = 45.0
    r2: float = 70.0
    alpha: float = 100.0
    beta: float = 0.34
    v_threshold: float = 200.0
    walk_energy_threshold: float = 0.35
    inner_pairs_require_v: bool = False
    chord_end_margin: int = 2

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ValueError(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.chord_end_margin < 0:
            raise ValueError("chord_end_margin must be non-negative")


@dataclass(frozen=True)
class PointPair:
    """Screened candidate pair; v_score for non-adjacent, walk_energy for adjacent pairs"""
    a: CandidatePoint
    b: CandidatePoint
    kind: PairKind
    distance: float
    v_score: Optional[float] = None
    walk_energy: Optional[float] = None

    @property
    def endpoints(self) -> Tuple[int, int]:
        return self.a.contour_index, self.b.contour_index

    @property
    def key(self) -> PairKey:
        return frozenset((self.a.key, self.b.key))

    def to_dict(self) -> Dict:
        return {
            "contour_id": self.a.contour_id,
            "a_index": self.a.contour_index,
            "b_index": self.b.contour_index,
            "a": list(self.a.position),
            "b": list(self.b.position),
            "kind": self.kind.value,
            "distance": self.distance,
            "v_score": self.v_score,
            "walk_energy": self.walk_energy,
        }


@dataclass(frozen=True)
class ScreeningResult:
    c_plus: Tuple[PointPair, ...]
    c_minus: Tuple[PointPair, ...]
    rejected: Tuple[PointPair, ...] = ()


@dataclass(frozen=True)
class SubContour:
    """One face of the chord subdivision of a contour"""
    parent: int
    n_points: int
    arcs: Tuple[Tuple[int, int], ...]
    virtual_edges: Tuple[PointPair, ...] = ()

    def __post_init__(self):
        if not self.arcs:
            raise ValueError("a SubContour needs at least one arc")
        if self.virtual_edges and len(self.virtual_edges) != len(self.arcs):
            raise ValueError("arcs and virtual edges must alternate")

    @classmethod
    def whole(cls, contour: Contour) -> "SubContour":
        return cls(parent=contour.contour_id, n_points=len(contour), arcs=((0, len(contour) - 1),))

    def boundary(self) -> Tuple[List[int], List[bool]]:
        """Face vertices in walking order, and whether a chord follows each one"""
        vertices: List[int] = []
        chord_after: List[bool] = []
        closes_by_chord = bool(self.virtual_edges)
        for arc in self.arcs:
            idx = segment_indices(arc, self.n_points)
            vertices.extend(int(i) for i in idx)
            chord_after.extend([False] * (len(idx) - 1) + [closes_by_chord])
        return vertices, chord_after

    def vertex_set(self) -> set:
        return set(self.boundary()[0])

    def has_chord(self, i: int, j: int) -> bool:
        return any(set(edge.endpoints) == {i, j} for edge in self.virtual_edges)

    def polygon(self, contour: Contour) -> np.ndarray:
        return contour.points[self.boundary()[0]]

    def area(self, contour: Contour) -> float:
        return polygon_signed_area(self.polygon(contour))

    def contour_length(self, profile: CurvatureProfile) -> float:
        """Length of the boundary that runs along the real contour"""
        vertices, chord_after = self.boundary()
        return float(sum(profile.ds[v] for v, chord in zip(vertices, chord_after) if not chord))

    def chord_length(self) -> float:
        return float(sum(edge.distance for edge in self.virtual_edges))

    def perimeter(self, profile: CurvatureProfile) -> float:
        return self.contour_length(profile) + self.chord_length()

    def boundary_fraction(self, profile: CurvatureProfile) -> float:
        perimeter = self.perimeter(profile)
        return self.contour_length(profile) / perimeter if perimeter > 0 else 0.0

    def to_dict(self) -> Dict:
        return {
            "parent": self.parent,
            "arcs": [list(arc) for arc in self.arcs],
            "chords": [list(edge.endpoints) for edge in self.virtual_edges],
        }


def _distance(p: CandidatePoint, q: CandidatePoint) -> float:
    return float(math.hypot(p.position[0] - q.position[0], p.position[1] - q.position[1]))


def make_pair(p: CandidatePoint, q: CandidatePoint, kind: PairKind, **scores) -> PointPair:
    return PointPair(a=p, b=q, kind=kind, distance=_distance(p, q), **scores)


def classify_adjacency(candidates: Sequence[CandidatePoint]) -> List[PointPair]:
    """
    Consecutive candidates along the contour, circularly.

    With exactly two candidates both directions are returned, since the two
    arcs between them close different regions.
    """
    ordered = sorted(candidates, key=lambda cand: cand.contour_index)
    n = len(ordered)
    if n < 2:
        return []
    # n == 2 yields (a, b) and (b, a): one pair per arc, not a duplicate
    return [make_pair(ordered[k], ordered[(k + 1) % n], PairKind.ADJACENT) for k in range(n)]


def _forward_steps(i: int, j: int, n: int) -> np.ndarray:
    """Sample indices k whose step k -> k+1 lies on the forward arc from i to j"""
    count = (j - i) % n
    return (i + np.arange(count)) % n


def arc_energy(profile: CurvatureProfile, i: int, j: int) -> float:
    """Trapezoidal ∫ max(κ, 0) ds along the forward arc i -> j"""
    steps = _forward_steps(i, j, len(profile))
    if steps.size == 0:
        return 0.0
    convex = np.maximum(profile.kappa, 0.0)
    nxt = (steps + 1) % len(profile)
    return float(np.sum(0.5 * (convex[steps] + convex[nxt]) * profile.ds[steps]))


def arc_length_between(profile: CurvatureProfile, i: int, j: int) -> float:
    steps = _forward_steps(i, j, len(profile))
    return float(profile.ds[steps].sum())


def walking_energy(c: Contour, p: CandidatePoint, q: CandidatePoint,
                   profile: Optional[CurvatureProfile] = None) -> float:
    """
    Convex turning (radians) along the shorter contour arc between p and q.

    Symmetric in p and q; equal-length arcs resolve to the one starting at the
    lower contour index.
    """
    profile = profile if profile is not None else compute_curvature(c)
    i, j = p.contour_index, q.contour_index
    if i == j:
        return 0.0
    lo, hi = min(i, j), max(i, j)
    inner_len = arc_length_between(profile, lo, hi)
    outer_len = arc_length_between(profile, hi, lo)
    if outer_len < inner_len:
        return arc_energy(profile, hi, lo)
    return arc_energy(profile, lo, hi)


def merge_low_energy(candidates: Sequence[CandidatePoint], c: Contour, params: PairingParams,
                     profile: Optional[CurvatureProfile] = None) -> List[CandidatePoint]:
    """
    Repeatedly merge the adjacent pair (distance ≤ r1) with the lowest
    energy below walk_energy_threshold, keeping the higher-|κ| point.
    Equal |κ| keeps the lower contour index.
    """
    profile = profile if profile is not None else compute_curvature(c)
    current = sorted(candidates, key=lambda cand: cand.contour_index)

    while len(current) >= 2:
        best = None
        for pair in classify_adjacency(current):
            if pair.distance > params.r1:
                continue
            energy = walking_energy(c, pair.a, pair.b, profile)
            if energy >= params.walk_energy_threshold:
                continue
            rank = (energy, min(pair.endpoints), max(pair.endpoints))
            if best is None or rank < best[0]:
                best = (rank, pair)
        if best is None:
            break

        pair = best[1]
        weaker = _weaker(pair.a, pair.b)
        current = [cand for cand in current if cand is not weaker]
        logger.debug(
            f"Merged candidate {weaker.contour_index} into its neighbour "
            f"(E={best[0][0]:.3f} rad)"
        )
    return current


def _weaker(p: CandidatePoint, q: CandidatePoint) -> CandidatePoint:
    if abs(p.kappa) != abs(q.kappa):
        return p if abs(p.kappa) < abs(q.kappa) else q
    return q if p.contour_index < q.contour_index else p


def normal_angle_deg(p: CandidatePoint, q: CandidatePoint) -> float:
    dot = p.normal[0] * q.normal[0] + p.normal[1] * q.normal[1]
    return float(np.degrees(np.arccos(np.clip(dot, -1.0, 1.0))))


def v_score(p: CandidatePoint, q: CandidatePoint, params: PairingParams) -> float:
    """V = α·θ / (D + β(|κp| + |κq|)) with θ the normal angle in degrees"""
    denominator = _distance(p, q) + params.beta * (abs(p.kappa) + abs(q.kappa))
    if denominator <= 0:
        raise InvalidPairError(f"coincident flat pair at {p.position}")
    return params.alpha * normal_angle_deg(p, q) / denominator


def chord_inside_mask(mask, p: CandidatePoint, q: CandidatePoint, margin: int = 2) -> bool:
    """Straight chord stays in the foreground, ignoring `margin` pixels at each end"""
    bits = mask_bits(mask)
    rr, cc = draw_line(int(round(p.position[1])), int(round(p.position[0])),
                       int(round(q.position[1])), int(round(q.position[0])))
    inner = slice(margin, len(rr) - margin)
    rr, cc = rr[inner], cc[inner]
    if rr.size == 0:
        return True
    inside = (rr >= 0) & (cc >= 0) & (rr < bits.shape[0]) & (cc < bits.shape[1])
    if not inside.all():
        return False
    return bool(bits[rr, cc].all())


def _nonadjacent_pair(p: CandidatePoint, q: CandidatePoint, mask,
                      params: PairingParams) -> Tuple[Optional[PointPair], Optional[PointPair]]:
    """(accepted, rejected) for one non-adjacent candidate pair"""
    distance = _distance(p, q)
    if distance > params.r2:
        return None, None
    try:
        score = v_score(p, q, params)
    except InvalidPairError:
        logger.debug(f"Skipping invalid pair {p.contour_index}-{q.contour_index}")
        return None, None

    if distance <= params.r1:
        kind = PairKind.NONADJACENT_INNER
        passes = not params.inner_pairs_require_v or score > params.v_threshold
    else:
        kind = PairKind.NONADJACENT_RING
        passes = score > params.v_threshold

    pair = PointPair(a=p, b=q, kind=kind, distance=distance, v_score=score)
    if not passes:
        return None, pair
    if mask is not None and not chord_inside_mask(mask, p, q, params.chord_end_margin):
        return None, pair
    return pair, None


def screen_pairs(candidates: Sequence[CandidatePoint], c: Contour, mask, params: PairingParams,
                 profile: Optional[CurvatureProfile] = None) -> ScreeningResult:
    """
    C+ = adjacent pairs within r1 whose Walking Energy reaches the threshold.
    C- = non-adjacent pairs within r1 (C1-) or in the r1–r2 ring with V above
    v_threshold (C2-), minus chords that leave the mask.
    """
    profile = profile if profile is not None else compute_curvature(c)
    adjacent = classify_adjacency(candidates)
    adjacent_keys = {pair.key for pair in adjacent}

    c_plus = []
    for pair in adjacent:
        if pair.distance > params.r1:
            continue
        energy = walking_energy(c, pair.a, pair.b, profile)
        if energy >= params.walk_energy_threshold:
            c_plus.append(replace(pair, walk_energy=energy))

    c_minus, rejected = [], []
    ordered = sorted(candidates, key=lambda cand: cand.contour_index)
    for p, q in combinations(ordered, 2):
        if frozenset((p.key, q.key)) in adjacent_keys:
            continue
        accepted, refused = _nonadjacent_pair(p, q, mask, params)
        if accepted is not None:
            c_minus.append(accepted)
        elif refused is not None:
            rejected.append(refused)

    logger.debug(f"Contour {c.contour_id}: |C+|={len(c_plus)}, |C-|={len(c_minus)}, rejected={len(rejected)}")
    return ScreeningResult(c_plus=tuple(c_plus), c_minus=tuple(c_minus), rejected=tuple(rejected))


def chords_cross(p: PointPair, q: PointPair) -> bool:
    """Topological crossing of two chords of the same closed contour"""
    if set(p.endpoints) & set(q.endpoints):
        return False
    lo, hi = sorted(p.endpoints)
    inside = [lo < k < hi for k in q.endpoints]
    return inside[0] != inside[1]


def _orientation(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect(p: PointPair, q: PointPair) -> bool:
    """Proper geometric intersection of two chords; touching at a shared endpoint does not count"""
    if p.key & q.key:
        return False
    a, b = p.a.position, p.b.position
    c, d = q.a.position, q.b.position
    o1, o2 = _orientation(a, b, c), _orientation(a, b, d)
    o3, o4 = _orientation(c, d, a), _orientation(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def _v_priority(pair: PointPair):
    return (-(pair.v_score or 0.0), min(pair.endpoints), max(pair.endpoints))


def resolve_crossings(pairs: Iterable[PointPair]) -> List[PointPair]:
    """Keep a non-crossing subset of chords, higher V first"""
    kept: List[PointPair] = []
    for pair in sorted(pairs, key=_v_priority):
        if any(pair.key == other.key for other in kept):
            continue
        if any(chords_cross(pair, other) for other in kept):
            logger.debug(f"Dropping crossing chord {pair.endpoints}")
            continue
        kept.append(pair)
    return kept


def _face_from_walk(face: SubContour, walk: List[int], chord_after: List[bool],
                    chords: Dict[FrozenSet[int], PointPair]) -> SubContour:
    arcs, edges = [], []
    start = walk[0]
    for k, vertex in enumerate(walk):
        if chord_after[k]:
            nxt = walk[(k + 1) % len(walk)]
            arcs.append((start, vertex))
            edges.append(chords[frozenset((vertex, nxt))])
            start = nxt
    return SubContour(parent=face.parent, n_points=face.n_points, arcs=tuple(arcs), virtual_edges=tuple(edges))


def split_face(face: SubContour, pair: PointPair) -> Optional[Tuple[SubContour, SubContour]]:
    """
    Cut a face along the chord of `pair`.

    Returns (face walking a -> b then the chord back, face walking b -> a),
    or None when the chord is not a proper diagonal of the face.
    """
    vertices, chord_after = face.boundary()
    position = {v: k for k, v in enumerate(vertices)}
    i, j = pair.endpoints
    if i == j or i not in position or j not in position:
        return None

    m = len(vertices)
    pi, pj = position[i], position[j]

    def walk(start: int, end: int):
        count = (end - start) % m
        seq = [vertices[(start + k) % m] for k in range(count + 1)]
        flags = [chord_after[(start + k) % m] for k in range(count)] + [True]
        return seq, flags

    seq_ab, flags_ab = walk(pi, pj)
    seq_ba, flags_ba = walk(pj, pi)
    if len(seq_ab) < 3 or len(seq_ba) < 3:
        return None

    chords = {frozenset(edge.endpoints): edge for edge in face.virtual_edges}
    chords[frozenset((i, j))] = pair
    return (_face_from_walk(face, seq_ab, flags_ab, chords),
            _face_from_walk(face, seq_ba, flags_ba, chords))


def _insert_chord(faces: List[SubContour], pair: PointPair) -> bool:
    i, j = pair.endpoints
    for k, face in enumerate(faces):
        vertices = face.vertex_set()
        if i in vertices and j in vertices and not face.has_chord(i, j):
            halves = split_face(face, pair)
            if halves is None:
                return False
            faces[k:k + 1] = list(halves)
            return True
    return False


def partition_contour(c: Contour, c_minus: Iterable[PointPair]) -> List[SubContour]:
    """Planar subdivision of one contour by non-crossing chords"""
    faces = [SubContour.whole(c)]
    for pair in resolve_crossings(c_minus):
        if not _insert_chord(faces, pair):
            logger.debug(f"Contour {c.contour_id}: chord {pair.endpoints} does not split a face")
    return faces


def face_candidates(face: SubContour, candidates: Sequence[CandidatePoint]) -> List[CandidatePoint]:
    """Candidates on the face boundary, in face walking order"""
    vertices, _ = face.boundary()
    position = {v: k for k, v in enumerate(vertices)}
    on_face = [cand for cand in candidates if cand.contour_index in position]
    return sorted(on_face, key=lambda cand: position[cand.contour_index])


def face_adjacent_pairs(face: SubContour, candidates: Sequence[CandidatePoint],
                        profile: CurvatureProfile, params: PairingParams) -> List[PointPair]:
    """
    Directed adjacent pairs (p, q) of a face whose boundary path p -> q runs
    along the contour, is within r1 and carries enough convex energy.
    """
    ordered = face_candidates(face, candidates)
    m = len(ordered)
    if m < 2:
        return []
    vertices, chord_after = face.boundary()
    position = {v: k for k, v in enumerate(vertices)}

    pairs = []
    for k in range(m):
        p, q = ordered[k], ordered[(k + 1) % m]
        pp = position[p.contour_index]
        if chord_after[pp] and vertices[(pp + 1) % len(vertices)] == q.contour_index:
            continue
        pair = make_pair(p, q, PairKind.ADJACENT)
        if pair.distance > params.r1:
            continue
        energy = arc_energy(profile, p.contour_index, q.contour_index)
        if energy >= params.walk_energy_threshold:
            pairs.append(replace(pair, walk_energy=energy))
    return pairs


def _face_nonadjacent_pairs(face: SubContour, candidates: Sequence[CandidatePoint], mask,
                            params: PairingParams) -> List[PointPair]:
    ordered = face_candidates(face, candidates)
    m = len(ordered)
    found = []
    for k, l in combinations(range(m), 2):
        if (l - k) % m in (1, m - 1):
            continue
        p, q = ordered[k], ordered[l]
        if face.has_chord(p.contour_index, q.contour_index):
            continue
        accepted, _ = _nonadjacent_pair(p, q, mask, params)
        if accepted is not None:
            found.append(accepted)
    return found


@dataclass(frozen=True)
class PartitionResult:
    faces: Tuple[SubContour, ...]
    c_minus: Tuple[PointPair, ...]
    screening: ScreeningResult


def partition_clump(c: Contour, candidates: Sequence[CandidatePoint], mask, params: PairingParams,
                    profile: Optional[CurvatureProfile] = None) -> PartitionResult:
    """
    Screen, partition, then re-screen non-adjacent pairs inside every face
    until no new C- chord appears.
    """
    profile = profile if profile is not None else compute_curvature(c)
    screening = screen_pairs(candidates, c, mask, params, profile)
    chords = resolve_crossings(screening.c_minus)
    faces = partition_contour(c, chords)

    for _ in range(len(candidates)):
        known = {pair.key for pair in chords}
        fresh = [pair for face in faces for pair in _face_nonadjacent_pairs(face, candidates, mask, params)
                 if pair.key not in known]
        added = False
        for pair in sorted(fresh, key=_v_priority):
            if pair.key in known or any(chords_cross(pair, other) for other in chords):
                continue
            if _insert_chord(faces, pair):
                chords.append(pair)
                known.add(pair.key)
                added = True
        if not added:
            break

    logger.debug(f"Contour {c.contour_id}: {len(chords)} partition chord(s), {len(faces)} face(s)")
    return PartitionResult(faces=tuple(faces), c_minus=tuple(chords), screening=screening)
