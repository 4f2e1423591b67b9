"""
Signed contour curvature and concave-point voting

Bu modül her kontur için:
- Merkezi farklarla (dairesel) işaretli eğrilik κ hesaplar
- κ ≤ -kappa_min olan içbükey segmentleri bulur
- Her segment için |κ| ağırlıklı yay konumu ile tek bir aday nokta seçer

Dışbükey kısımlar pozitif, içbükey kısımlar negatif eğriliğe sahiptir.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from utils.image_prep import Contour, mask_bits, sample_mask

logger = logging.getLogger(__name__)

Segment = Tuple[int, int]

_SPEED_EPS = 1e-12
NORMAL_PROBE_PX = 2.0


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    """κ(s) along one contour, with the chord lengths it was measured on"""
    contour_id: int
    kappa: np.ndarray
    arc: np.ndarray     # normalized arc position, arc[0] = 0
    ds: np.ndarray      # chord length from sample i to i+1 (wrapping)
    length: float

    def __len__(self) -> int:
        return len(self.kappa)


@dataclass(frozen=True)
class CandidatePoint:
    """Voted concave point of one contour"""
    position: Tuple[float, float]
    contour_index: int
    s_star: float
    kappa: float
    normal: Tuple[float, float]
    contour_id: int = 0

    @property
    def key(self) -> Tuple[int, int]:
        return self.contour_id, self.contour_index

    def as_array(self) -> np.ndarray:
        return np.asarray(self.position, dtype=np.float64)


def _fill_degenerate(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Copy the nearest valid sample (circular distance) into invalid slots"""
    if valid.all():
        return values
    good = np.flatnonzero(valid)
    if good.size == 0:
        return np.zeros_like(values)
    n = len(values)
    bad = np.flatnonzero(~valid)
    dist = np.abs(bad[:, None] - good[None, :])
    dist = np.minimum(dist, n - dist)
    filled = values.copy()
    filled[bad] = values[good[np.argmin(dist, axis=1)]]
    return filled


def compute_curvature(c: Contour) -> CurvatureProfile:
    """
    κ = (x'y'' − y'x'') / (x'² + y'²)^{3/2} with circular central differences.

    Samples whose first derivative vanishes (coincident neighbours) take the
    curvature of the nearest valid sample.
    """
    x = c.points[:, 0]
    y = c.points[:, 1]
    x_next, x_prev = np.roll(x, -1), np.roll(x, 1)
    y_next, y_prev = np.roll(y, -1), np.roll(y, 1)

    dx = 0.5 * (x_next - x_prev)
    dy = 0.5 * (y_next - y_prev)
    ddx = x_next - 2.0 * x + x_prev
    ddy = y_next - 2.0 * y + y_prev

    speed2 = dx * dx + dy * dy
    valid = speed2 > _SPEED_EPS
    kappa = np.zeros(len(x))
    kappa[valid] = (dx * ddy - dy * ddx)[valid] / speed2[valid] ** 1.5
    if not valid.all():
        logger.debug(f"Contour {c.contour_id}: {int((~valid).sum())} degenerate curvature samples")
    kappa = _fill_degenerate(kappa, valid)

    ds = np.hypot(x_next - x, y_next - y)
    length = float(ds.sum())
    cumulative = np.concatenate([[0.0], np.cumsum(ds)[:-1]])
    arc = cumulative / length if length > 0 else np.linspace(0.0, 1.0, len(x), endpoint=False)
    return CurvatureProfile(contour_id=c.contour_id, kappa=kappa, arc=arc, ds=ds, length=length)


def segment_indices(seg: Segment, n: int) -> np.ndarray:
    """Contour indices of an inclusive (start, end) segment, wrapping past n - 1"""
    start, end = seg
    if end >= start:
        return np.arange(start, end + 1)
    return np.concatenate([np.arange(start, n), np.arange(0, end + 1)])


def find_concave_segments(p: CurvatureProfile, kappa_min: float = 0.03) -> List[Segment]:
    """Maximal runs with κ ≤ −kappa_min, merged across the seam, at least 2 samples long."""
    if kappa_min <= 0:
        raise ValueError(f"kappa_min must be positive, got {kappa_min}")
    concave = p.kappa <= -kappa_min
    n = len(concave)
    if not concave.any():
        return []
    if concave.all():
        return [(0, n - 1)]

    # rotate so the sequence starts outside a run; seam-crossing runs stay whole
    offset = int(np.flatnonzero(~concave)[0])
    rolled = np.roll(concave, -offset).astype(np.int8)
    edges = np.diff(np.concatenate([[0], rolled, [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1

    segments = [
        (int((s + offset) % n), int((e + offset) % n))
        for s, e in zip(starts, ends)
        if e - s + 1 >= 2
    ]
    return sorted(segments)


def outward_normal(c: Contour, i: int, mask=None) -> Tuple[float, float]:
    """
    Unit normal (t_y, −t_x) of the central-difference tangent at sample i.

    When a mask is given the direction is checked by probing 2 px along the
    normal and flipped if it points into the foreground.
    """
    pts = c.points
    n = len(pts)
    tangent = pts[(i + 1) % n] - pts[(i - 1) % n]
    norm = float(np.hypot(*tangent))
    if norm == 0.0:
        tangent = pts[(i + 2) % n] - pts[(i - 2) % n]
        norm = float(np.hypot(*tangent))
    if norm == 0.0:
        logger.warning(f"Contour {c.contour_id}: no tangent at index {i}, using (1, 0)")
        return 1.0, 0.0

    normal = np.array([tangent[1], -tangent[0]]) / norm
    if mask is not None:
        bits = mask_bits(mask)
        ahead = pts[i] + NORMAL_PROBE_PX * normal
        behind = pts[i] - NORMAL_PROBE_PX * normal
        if sample_mask(bits, *ahead) and not sample_mask(bits, *behind):
            normal = -normal
    return float(normal[0]), float(normal[1])


def vote_candidate(c: Contour, p: CurvatureProfile, seg: Segment, mask=None) -> CandidatePoint:
    """
    One candidate per concave segment.

    t* = ∫|κ|·t dt / ∫|κ| dt over the segment's local normalized arc t ∈ [0, 1]
    (trapezoidal rule); a zero-weight segment votes its midpoint. t* is mapped
    back to the nearest contour sample.
    """
    n = len(p)
    idx = segment_indices(seg, n)
    if idx.size == 0:
        raise ValueError(f"empty segment {seg}")

    steps = p.ds[idx[:-1]]
    local = np.concatenate([[0.0], np.cumsum(steps)])
    span = float(local[-1])
    t = local / span if span > 0 else np.linspace(0.0, 1.0, idx.size)

    weights = np.abs(p.kappa[idx])
    denom = float(trapezoid(weights, t)) if idx.size >= 2 else 0.0
    t_star = float(trapezoid(weights * t, t)) / denom if denom > 0 else 0.5

    k = int(np.argmin(np.abs(t - t_star)))
    index = int(idx[k])
    s_star = float((p.arc[idx[0]] + t_star * span / p.length) % 1.0) if p.length > 0 else float(p.arc[index])

    return CandidatePoint(
        position=(float(c.points[index, 0]), float(c.points[index, 1])),
        contour_index=index,
        s_star=s_star,
        kappa=float(p.kappa[index]),
        normal=outward_normal(c, index, mask),
        contour_id=c.contour_id,
    )


def vote_candidates(c: Contour, p: CurvatureProfile, mask=None,
                    kappa_min: float = 0.03) -> List[CandidatePoint]:
    """find_concave_segments + vote_candidate for a whole contour, sorted by index"""
    segments = find_concave_segments(p, kappa_min)
    candidates = [vote_candidate(c, p, seg, mask) for seg in segments]
    candidates.sort(key=lambda cand: cand.contour_index)
    logger.debug(f"Contour {c.contour_id}: {len(segments)} concave segment(s) -> {len(candidates)} candidate(s)")
    return candidates


def profile_records(c: Contour, p: CurvatureProfile) -> List[dict]:
    """(index, x, y, s, κ) rows for the debug contour export"""
    return [
        {
            "index": i,
            "x": float(c.points[i, 0]),
            "y": float(c.points[i, 1]),
            "s": float(p.arc[i]),
            "kappa": float(p.kappa[i]),
        }
        for i in range(len(p))
    ]
