"""
Ellipse fitting and connection selection

Bu modül komşu aday çiftlerinin (C+) kestiği bölgelere elips uydurur ve
kalite skoru Q ile hangi kirişlerin bağlanacağına karar verir:

    Q = (μ·S+ + ν·ψ) / max((Δx + Δy) + γ1·ΔL + γ2·η, ε)

- S+  : bölge ile elipsin kesişim / birleşim oranı (piksel bazlı)
- ψ   : elips merkezinde p ve q'nun gördüğü açı (varsayılan yarım tur birimi)
- Δx, Δy : ağırlık merkezi farkları, ΔL : çevre farkı (Ramanujan), η = a/b

Seçim açgözlüdür: her turda en büyük Q bağlanır, değişen bölgeler yeniden
skorlanır, sonunda kesişen ve dar açılı kirişler budanır.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from skimage.draw import polygon as draw_polygon

from utils.curvature import CandidatePoint, CurvatureProfile
from utils.errors import EllipseFitError, EmptyRegionError
from utils.image_prep import Contour, polygon_signed_area
from utils.pairing import (
    PairingParams,
    PointPair,
    SubContour,
    face_adjacent_pairs,
    segments_intersect,
    split_face,
)

logger = logging.getLogger(__name__)

PSI_UNITS = ("half_turn", "degrees")
_MAX_CANVAS_PIXELS = 4_000_000


@dataclass(frozen=True)
class Ellipse:
    center: Tuple[float, float]
    a: float
    b: float
    orientation: float

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise ValueError(f"need a >= b > 0, got a={self.a}, b={self.b}")
        if not 0.0 <= self.orientation < math.pi:
            raise ValueError(f"orientation must be in [0, pi), got {self.orientation}")

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def perimeter(self) -> float:
        """Ramanujan's second approximation"""
        h = ((self.a - self.b) / (self.a + self.b)) ** 2
        return math.pi * (self.a + self.b) * (1.0 + 3.0 * h / (10.0 + math.sqrt(4.0 - 3.0 * h)))

    def contains(self, x, y) -> np.ndarray:
        cos_t, sin_t = math.cos(self.orientation), math.sin(self.orientation)
        dx = np.asarray(x, dtype=np.float64) - self.center[0]
        dy = np.asarray(y, dtype=np.float64) - self.center[1]
        u = dx * cos_t + dy * sin_t
        v = -dx * sin_t + dy * cos_t
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0

    def boundary_points(self, count: int = 72) -> np.ndarray:
        t = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
        cos_t, sin_t = math.cos(self.orientation), math.sin(self.orientation)
        u, v = self.a * np.cos(t), self.b * np.sin(t)
        return np.column_stack([
            self.center[0] + u * cos_t - v * sin_t,
            self.center[1] + u * sin_t + v * cos_t,
        ])

    def to_dict(self) -> Dict:
        return {"center": list(self.center), "a": self.a, "b": self.b, "orientation": self.orientation}


@dataclass(frozen=True)
class QualityParams:
    """Weights of the fit quality score and the connection rules"""
    mu: float = 10.70
    nu: float = 10.70
    gamma1: float = 0.67
    gamma2: float = 3.40
    q_threshold: float = 0.7
    sharp_angle_min: float = 20.0
    psi_unit: str = "half_turn"
    min_boundary_fraction: float = 0.35
    min_area: float = 50.0
    denominator_floor: float = 1e-3

    def __post_init__(self):
        for name in ("mu", "nu", "gamma1", "gamma2", "q_threshold", "sharp_angle_min", "min_area"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.psi_unit not in PSI_UNITS:
            raise ValueError(f"psi_unit must be one of {PSI_UNITS}, got {self.psi_unit!r}")
        if self.denominator_floor <= 0:
            raise ValueError("denominator_floor must be positive")


def quality_score(s_plus: float, psi: float, dx: float, dy: float, d_perimeter: float,
                  elongation: float, params: QualityParams) -> float:
    numerator = params.mu * s_plus + params.nu * psi
    denominator = (dx + dy) + params.gamma1 * d_perimeter + params.gamma2 * elongation
    return numerator / max(denominator, params.denominator_floor)


@dataclass(frozen=True)
class FitQuality:
    overlap_ratio: float
    fit_angle: float
    d_centroid: Tuple[float, float]
    d_perimeter: float
    elongation: float
    q: float

    def recompute(self, params: QualityParams) -> float:
        return quality_score(self.overlap_ratio, self.fit_angle, self.d_centroid[0], self.d_centroid[1],
                             self.d_perimeter, self.elongation, params)

    def to_dict(self) -> Dict:
        return {
            "overlap_ratio": self.overlap_ratio,
            "fit_angle": self.fit_angle,
            "d_centroid": list(self.d_centroid),
            "d_perimeter": self.d_perimeter,
            "elongation": self.elongation,
            "q": self.q,
        }


@dataclass(frozen=True, eq=False)
class CandidateRegion:
    """Polygon from p along the contour to q; the closing edge q -> p is the chord"""
    polygon: np.ndarray
    p: Tuple[float, float]
    q: Tuple[float, float]

    @property
    def perimeter(self) -> float:
        steps = np.roll(self.polygon, -1, axis=0) - self.polygon
        return float(np.hypot(steps[:, 0], steps[:, 1]).sum())

    @property
    def area(self) -> float:
        return abs(polygon_signed_area(self.polygon))


# ---------------------------------------------------------------------------
# Direct least-squares fit (numerically stable variant)
# ---------------------------------------------------------------------------

def _conic_to_ellipse(A: float, B: float, C: float, D: float, E: float, F: float) -> Ellipse:
    """Ax² + Bxy + Cy² + Dx + Ey + F = 0 to centre / axes / orientation"""
    quad = np.array([[A, B / 2.0], [B / 2.0, C]])
    full = np.array([[A, B / 2.0, D / 2.0], [B / 2.0, C, E / 2.0], [D / 2.0, E / 2.0, F]])
    det_quad = float(np.linalg.det(quad))
    if det_quad <= 0:
        raise EllipseFitError("conic is not an ellipse")

    center = np.linalg.solve(quad, [-D / 2.0, -E / 2.0])
    offset = float(np.linalg.det(full)) / det_quad
    evals, evecs = np.linalg.eigh(quad)
    squared = -offset / evals
    if np.any(squared <= 0) or not np.all(np.isfinite(squared)):
        raise EllipseFitError("imaginary ellipse")

    axes = np.sqrt(squared)
    major = int(np.argmax(axes))
    direction = evecs[:, major]
    orientation = math.atan2(direction[1], direction[0]) % math.pi
    if orientation >= math.pi:
        orientation = 0.0
    return Ellipse(center=(float(center[0]), float(center[1])), a=float(axes[major]),
                   b=float(axes[1 - major]), orientation=orientation)


def fit_ellipse(points) -> Ellipse:
    """
    Ellipse-specific direct least-squares conic fit.

    Coordinates are centred and scaled before the fit, which keeps the scatter
    matrices well conditioned and makes the result equivariant under rigid
    motions and independent of point order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 6:
        raise EllipseFitError(f"need at least 6 points, got {len(pts)}")

    mean = pts.mean(axis=0)
    centred = pts - mean
    scale = math.sqrt(float((centred ** 2).sum(axis=1).mean()))
    if scale == 0.0:
        raise EllipseFitError("all points coincide")
    x, y = (centred / scale).T

    D1 = np.column_stack([x * x, x * y, y * y])
    D2 = np.column_stack([x, y, np.ones_like(x)])
    S1, S2, S3 = D1.T @ D1, D1.T @ D2, D2.T @ D2
    if np.linalg.cond(S3) > 1e12:
        raise EllipseFitError("degenerate (collinear) point set")
    T = -np.linalg.solve(S3, S2.T)
    M = S1 + S2 @ T
    M = np.vstack([M[2] / 2.0, -M[1], M[0] / 2.0])

    evals, evecs = np.linalg.eig(M)
    real = np.abs(evals.imag) < 1e-9 * max(1.0, float(np.abs(evals).max()))
    evecs = evecs.real
    constraint = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    admissible = np.flatnonzero(real & (constraint > 0))
    if admissible.size == 0:
        raise EllipseFitError("no elliptical solution")
    best = admissible[np.argmin(np.abs(evals.real[admissible]))]

    a1 = evecs[:, best]
    a2 = T @ a1
    fitted = _conic_to_ellipse(*a1, *a2)
    return Ellipse(
        center=(float(mean[0] + scale * fitted.center[0]), float(mean[1] + scale * fitted.center[1])),
        a=fitted.a * scale,
        b=fitted.b * scale,
        orientation=fitted.orientation,
    )


# ---------------------------------------------------------------------------
# Fit quality
# ---------------------------------------------------------------------------

def _subtended_angle(center: Tuple[float, float], p, q) -> float:
    u = np.asarray(p, dtype=np.float64) - center
    v = np.asarray(q, dtype=np.float64) - center
    norms = float(np.hypot(*u) * np.hypot(*v))
    if norms == 0.0:
        return 0.0
    return float(np.arccos(np.clip(float(u @ v) / norms, -1.0, 1.0)))


def _raster_canvas(region: CandidateRegion, e: Ellipse, include_ellipse: bool):
    xs, ys = region.polygon[:, 0], region.polygon[:, 1]
    lo_x, hi_x, lo_y, hi_y = xs.min(), xs.max(), ys.min(), ys.max()
    if include_ellipse:
        lo_x, hi_x = min(lo_x, e.center[0] - e.a), max(hi_x, e.center[0] + e.a)
        lo_y, hi_y = min(lo_y, e.center[1] - e.a), max(hi_y, e.center[1] + e.a)
    x0, y0 = int(math.floor(lo_x)) - 1, int(math.floor(lo_y)) - 1
    width = int(math.ceil(hi_x)) - x0 + 2
    height = int(math.ceil(hi_y)) - y0 + 2
    return x0, y0, height, width


def fit_quality(region: CandidateRegion, e: Ellipse, params: QualityParams) -> FitQuality:
    """Score how well an ellipse explains a candidate nucleus region."""
    if len(region.polygon) < 3 or region.area == 0.0:
        raise EmptyRegionError("candidate region has no area")

    x0, y0, height, width = _raster_canvas(region, e, include_ellipse=True)
    whole_ellipse = height * width <= _MAX_CANVAS_PIXELS
    if not whole_ellipse:
        logger.debug(f"Ellipse a={e.a:.1f} too large for raster canvas, using analytic area")
        x0, y0, height, width = _raster_canvas(region, e, include_ellipse=False)

    rr, cc = draw_polygon(region.polygon[:, 1] - y0, region.polygon[:, 0] - x0, shape=(height, width))
    inside_region = np.zeros((height, width), dtype=bool)
    inside_region[rr, cc] = True
    region_px = int(inside_region.sum())
    if region_px == 0:
        raise EmptyRegionError("candidate region rasterizes to no pixels")

    yy, xx = np.mgrid[y0:y0 + height, x0:x0 + width]
    inside_ellipse = e.contains(xx, yy)
    intersection = int((inside_region & inside_ellipse).sum())
    ellipse_px = int(inside_ellipse.sum()) if whole_ellipse else e.area
    union = region_px + ellipse_px - intersection
    s_plus = float(intersection / union) if union > 0 else 0.0

    angle = _subtended_angle(e.center, region.p, region.q)
    psi = angle / math.pi if params.psi_unit == "half_turn" else math.degrees(angle)

    dx = abs(float(xx[inside_region].mean()) - e.center[0])
    dy = abs(float(yy[inside_region].mean()) - e.center[1])
    d_perimeter = abs(region.perimeter - e.perimeter())
    elongation = e.a / e.b

    q = quality_score(s_plus, psi, dx, dy, d_perimeter, elongation, params)
    return FitQuality(overlap_ratio=s_plus, fit_angle=psi, d_centroid=(dx, dy),
                      d_perimeter=d_perimeter, elongation=elongation, q=q)


# ---------------------------------------------------------------------------
# Greedy connection selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScoredPair:
    """Adjacent pair with the ellipse fitted to the region its chord would cut off"""
    pair: PointPair
    face_key: int = 0
    ellipse: Optional[Ellipse] = None
    quality: Optional[FitQuality] = None
    region_area: float = math.inf
    remainder_area: float = math.inf
    remainder_fraction: float = 1.0
    halves: Optional[Tuple[SubContour, SubContour]] = field(default=None, repr=False)

    @property
    def q(self) -> float:
        return self.quality.q if self.quality is not None else 0.0

    def to_dict(self) -> Dict:
        return {
            **self.pair.to_dict(),
            "face": self.face_key,
            "q": self.q,
            "ellipse": self.ellipse.to_dict() if self.ellipse else None,
            "quality": self.quality.to_dict() if self.quality else None,
            "region_area": self.region_area,
            "remainder_area": self.remainder_area,
            "remainder_fraction": self.remainder_fraction,
        }


Rescore = Callable[[ScoredPair], Tuple[Set[int], List[ScoredPair]]]


def _priority(scored: ScoredPair):
    lo, hi = sorted(scored.pair.endpoints)
    return (-scored.q, lo, hi, scored.face_key)


def _shared_endpoint_angle(p: PointPair, q: PointPair) -> Optional[float]:
    """Angle (degrees) between two chords at their common endpoint, None if they share none"""
    shared = p.key & q.key
    if len(shared) != 1:
        return None
    (key,) = shared
    anchor = p.a if p.a.key == key else p.b
    far_p = p.b if p.a.key == key else p.a
    far_q = q.b if q.a.key == key else q.a
    u = far_p.as_array() - anchor.as_array()
    v = far_q.as_array() - anchor.as_array()
    norms = float(np.hypot(*u) * np.hypot(*v))
    if norms == 0.0:
        return 0.0
    return float(np.degrees(np.arccos(np.clip(float(u @ v) / norms, -1.0, 1.0))))


def _chord_conflict(pair: PointPair, others: Iterable[PointPair], params: QualityParams) -> Optional[str]:
    for other in others:
        if pair.key == other.key:
            return "duplicate"
        if segments_intersect(pair, other):
            return "crossing"
        angle = _shared_endpoint_angle(pair, other)
        if angle is not None and angle < params.sharp_angle_min:
            return f"sharp angle {angle:.1f}"
    return None


def _commit_refusal(scored: ScoredPair, chords: Sequence[PointPair], params: QualityParams) -> Optional[str]:
    conflict = _chord_conflict(scored.pair, chords, params)
    if conflict:
        return conflict
    if scored.remainder_fraction < params.min_boundary_fraction:
        return f"remainder mostly chords ({scored.remainder_fraction:.2f})"
    if min(scored.region_area, scored.remainder_area) < params.min_area:
        return "region too small"
    return None


def greedy_commit(scored: Iterable[ScoredPair], params: QualityParams, rescore: Optional[Rescore] = None,
                  fixed: Sequence[PointPair] = ()) -> List[ScoredPair]:
    """Commit the globally best pair above q_threshold, rescore, repeat."""
    pool = list(scored)
    committed: List[ScoredPair] = []
    while pool:
        best = min(pool, key=_priority)
        if best.q <= params.q_threshold:
            break
        pool.remove(best)
        reason = _commit_refusal(best, [s.pair for s in committed] + list(fixed), params)
        if reason:
            logger.debug(f"Refused chord {best.pair.endpoints} (Q={best.q:.3f}): {reason}")
            continue
        committed.append(best)
        logger.debug(f"Committed chord {best.pair.endpoints} with Q={best.q:.3f}")
        if rescore is not None:
            stale, fresh = rescore(best)
            pool = [s for s in pool if s.face_key not in stale] + list(fresh)
    return committed


def prune_connections(committed: Sequence[ScoredPair], params: QualityParams,
                      fixed: Sequence[PointPair] = ()) -> List[ScoredPair]:
    """Drop chords that cross, duplicate or form a sharp angle with a stronger chord."""
    kept: List[ScoredPair] = []
    for scored in sorted(committed, key=_priority):
        reason = _chord_conflict(scored.pair, [s.pair for s in kept] + list(fixed), params)
        if reason:
            logger.debug(f"Pruned chord {scored.pair.endpoints}: {reason}")
            continue
        kept.append(scored)
    return kept


def select_connections(scored: Iterable[ScoredPair], params: QualityParams, rescore: Optional[Rescore] = None,
                       fixed: Sequence[PointPair] = ()) -> List[PointPair]:
    """C* = pruned greedy commits ∪ the fixed partition chords"""
    kept = prune_connections(greedy_commit(scored, params, rescore, fixed), params, fixed)
    return [s.pair for s in kept] + list(fixed)


# ---------------------------------------------------------------------------
# Per-contour planning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionPlan:
    c_star: Tuple[PointPair, ...]
    committed: Tuple[ScoredPair, ...]
    evaluated: Tuple[ScoredPair, ...]
    faces: Tuple[SubContour, ...]


def score_pair(contour: Contour, profile: CurvatureProfile, face: SubContour, face_key: int,
               pair: PointPair, params: QualityParams) -> ScoredPair:
    """Fit and score the region that the chord of `pair` cuts off `face`."""
    halves = split_face(face, pair)
    if halves is None:
        return ScoredPair(pair=pair, face_key=face_key, region_area=0.0, remainder_area=0.0, remainder_fraction=0.0)

    region_face, remainder_face = halves
    polygon = region_face.polygon(contour)
    region = CandidateRegion(polygon=polygon, p=pair.a.position, q=pair.b.position)
    common = dict(
        pair=pair,
        face_key=face_key,
        region_area=region.area,
        remainder_area=abs(remainder_face.area(contour)),
        remainder_fraction=remainder_face.boundary_fraction(profile),
        halves=halves,
    )
    try:
        ellipse = fit_ellipse(polygon)
        quality = fit_quality(region, ellipse, params)
    except (EllipseFitError, EmptyRegionError) as exc:
        logger.debug(f"Pair {pair.endpoints}: no quality ({exc}), Q = 0")
        return ScoredPair(**common)
    return ScoredPair(ellipse=ellipse, quality=quality, **common)


def plan_connections(contour: Contour, profile: CurvatureProfile, candidates: Sequence[CandidatePoint],
                     faces: Sequence[SubContour], c_minus: Sequence[PointPair],
                     pairing: PairingParams, params: QualityParams) -> ConnectionPlan:
    """
    Score every face-level adjacent pair, then run the greedy selection with
    face splitting: a commit replaces its face by the two halves and only
    pairs of those halves are rescored.
    """
    live: Dict[int, SubContour] = {}
    evaluated: List[ScoredPair] = []
    next_key = [0]

    def register(face: SubContour) -> List[ScoredPair]:
        key = next_key[0]
        next_key[0] += 1
        live[key] = face
        scored = [score_pair(contour, profile, face, key, pair, params)
                  for pair in face_adjacent_pairs(face, candidates, profile, pairing)]
        evaluated.extend(scored)
        return scored

    def rescore(best: ScoredPair) -> Tuple[Set[int], List[ScoredPair]]:
        live.pop(best.face_key, None)
        fresh: List[ScoredPair] = []
        for half in best.halves or ():
            fresh.extend(register(half))
        return {best.face_key}, fresh

    initial: List[ScoredPair] = []
    for face in faces:
        initial.extend(register(face))

    committed = prune_connections(greedy_commit(initial, params, rescore, c_minus), params, c_minus)
    c_star = tuple(s.pair for s in committed) + tuple(c_minus)
    logger.debug(f"Contour {contour.contour_id}: {len(committed)} committed chord(s), |C*|={len(c_star)}")
    return ConnectionPlan(c_star=c_star, committed=tuple(committed), evaluated=tuple(evaluated),
                          faces=tuple(live.values()))
