"""
Shared geometry builders for the test suite

Kontur, aday nokta ve maske üreticileri; testlerde tekrar eden kurulum
kodunu tek yerde tutar.
"""

import math
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from utils.curvature import CandidatePoint, CurvatureProfile
from utils.image_prep import Contour


def circle_points(radius: float, n: int, center: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """n uniform samples, index 0 at angle 0, positive orientation"""
    t = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def circle_contour(radius: float, n: int, center: Tuple[float, float] = (0.0, 0.0), contour_id: int = 0) -> Contour:
    return Contour(circle_points(radius, n, center), contour_id=contour_id)


def flat_profile(kappa: Sequence[float], contour_id: int = 0) -> CurvatureProfile:
    """Profile with unit chord lengths and the given curvature samples"""
    kappa = np.asarray(kappa, dtype=np.float64)
    n = len(kappa)
    return CurvatureProfile(contour_id=contour_id, kappa=kappa, arc=np.arange(n) / n, ds=np.ones(n), length=float(n))


def candidate(index: int, position: Tuple[float, float], normal: Tuple[float, float] = (1.0, 0.0),
              kappa: float = -0.1, contour_id: int = 0) -> CandidatePoint:
    return CandidatePoint(position=(float(position[0]), float(position[1])), contour_index=index, s_star=0.0,
                          kappa=kappa, normal=normal, contour_id=contour_id)


def contour_candidate(contour: Contour, index: int, kappa: float = -0.1,
                      normal: Optional[Tuple[float, float]] = None) -> CandidatePoint:
    x, y = contour.points[index]
    return candidate(index, (x, y), normal or (1.0, 0.0), kappa, contour.contour_id)


def disc_mask(shape: Tuple[int, int], discs: Iterable[Tuple[float, float, float]]) -> np.ndarray:
    """Union of pixel discs given as (cx, cy, r)"""
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    mask = np.zeros(shape, dtype=bool)
    for cx, cy, r in discs:
        mask |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r ** 2
    return mask


def two_disc_mask(radius: float = 20.0, separation: float = 30.0, size: int = 96) -> np.ndarray:
    mid = size / 2.0
    return disc_mask((size, size), [(mid - separation / 2.0, mid, radius), (mid + separation / 2.0, mid, radius)])
