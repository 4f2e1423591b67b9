"""
Intensity-valley dividing curves

Bu modül bağlanan her aday çifti (C*) için düz kiriş yerine yoğunluk
vadisini izleyen bir piksel yolu üretir:
- Gauss türevleriyle Hessian alanı (Ixx, Ixy, Iyy)
- Kapalı form 2x2 özdeğer ayrışımı (λ1 ≤ λ2)
- q yönüne ±max_dev derece sektörde açgözlü 8-komşu adımlama:
  |λ1| ≈ 0 ve λ2 > 0 olan komşular arasından en büyük λ2 seçilir
- Adım bütçesi aşılırsa ya da aday kalmazsa düz (Bresenham) yol

apply_divisions yolları maskeden çıkarır, parçaları etiketler ve yol
piksellerini en yakın ağırlık merkezli komşu etikete geri verir.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from skimage.draw import line as draw_line
from skimage.segmentation import find_boundaries

from utils.errors import TraceError
from utils.image_prep import EIGHT_CONNECTED, BinaryMask, LabelMask, as_plane, mask_bits
from utils.pairing import PointPair

logger = logging.getLogger(__name__)

Pixel = Tuple[int, int]  # (x, y)

_NEIGHBOURS: Tuple[Pixel, ...] = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_EIG_EPS = 1e-9
_TIE_RTOL = 1e-6

# Freeman chain directions for the path RLE, in image coordinates
_CHAIN = {offset: code for code, offset in enumerate(_NEIGHBOURS)}


@dataclass(frozen=True, eq=False)
class HessianField:
    """Second derivatives of the Gaussian-smoothed intensity plus their eigenvalues"""
    ixx: np.ndarray
    ixy: np.ndarray
    iyy: np.ndarray
    sigma: float
    lambda1: np.ndarray
    lambda2: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.ixx.shape

    def matrix(self, x: int, y: int) -> np.ndarray:
        return np.array([[self.ixx[y, x], self.ixy[y, x]], [self.ixy[y, x], self.iyy[y, x]]])


@dataclass(frozen=True)
class DividingPath:
    """8-connected pixel chain from p to q"""
    pixels: Tuple[Pixel, ...]
    source_pair: Optional[PointPair] = None
    fallback: bool = False

    def __post_init__(self):
        if len(self.pixels) < 1:
            raise ValueError("a dividing path needs at least one pixel")
        if len(set(self.pixels)) != len(self.pixels):
            raise ValueError("dividing path revisits a pixel")
        for (x0, y0), (x1, y1) in zip(self.pixels, self.pixels[1:]):
            if max(abs(x1 - x0), abs(y1 - y0)) != 1:
                raise ValueError(f"step {(x0, y0)} -> {(x1, y1)} is not 8-adjacent")

    @property
    def start(self) -> Pixel:
        return self.pixels[0]

    @property
    def end(self) -> Pixel:
        return self.pixels[-1]

    def __len__(self) -> int:
        return len(self.pixels)

    def to_dict(self) -> Dict:
        return {
            **path_to_rle(self),
            "fallback": self.fallback,
            "pair": list(self.source_pair.endpoints) if self.source_pair else None,
            "contour_id": self.source_pair.a.contour_id if self.source_pair else None,
        }


def eigen_2x2(h):
    """
    Closed-form eigendecomposition of symmetric 2x2 matrices.

    `h` has shape (..., 2, 2); only h[..., 0, 1] is read for the off-diagonal.
    Returns (lambda1, lambda2, v1, v2) with lambda1 ≤ lambda2 and unit,
    orthogonal eigenvectors of shape (..., 2).
    """
    h = np.asarray(h, dtype=np.float64)
    a, b, c = h[..., 0, 0], h[..., 0, 1], h[..., 1, 1]
    mean = 0.5 * (a + c)
    radius = np.hypot(0.5 * (a - c), b)
    lambda1 = mean - radius
    lambda2 = mean + radius

    theta = 0.5 * np.arctan2(2.0 * b, a - c)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    v2 = np.stack([cos_t, sin_t], axis=-1)
    v1 = np.stack([-sin_t, cos_t], axis=-1)
    return lambda1, lambda2, v1, v2


def hessian_field(img, sigma: float = 2.0) -> HessianField:
    """Gaussian derivative Hessian with clamped ('nearest') borders"""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    plane = as_plane(img)
    # truncated derivative kernels do not sum to exactly zero
    plane = plane - plane.mean()
    # axis 0 is y, axis 1 is x
    ixx = ndimage.gaussian_filter(plane, sigma, order=(0, 2), mode="nearest")
    iyy = ndimage.gaussian_filter(plane, sigma, order=(2, 0), mode="nearest")
    ixy = ndimage.gaussian_filter(plane, sigma, order=(1, 1), mode="nearest")
    stacked = np.stack([np.stack([ixx, ixy], -1), np.stack([ixy, iyy], -1)], -2)
    lambda1, lambda2, _, _ = eigen_2x2(stacked)
    return HessianField(ixx=ixx, ixy=ixy, iyy=iyy, sigma=sigma, lambda1=lambda1, lambda2=lambda2)


def _to_pixel(point, shape: Tuple[int, int]) -> Pixel:
    x, y = int(round(float(point[0]))), int(round(float(point[1])))
    if not (0 <= x < shape[1] and 0 <= y < shape[0]):
        raise TraceError(f"endpoint {tuple(point)} lies outside the {shape[1]}x{shape[0]} image")
    return x, y


def straight_path(p: Pixel, q: Pixel) -> List[Pixel]:
    rr, cc = draw_line(p[1], p[0], q[1], q[0])
    return [(int(x), int(y)) for y, x in zip(rr, cc)]


def _valley_step(field: HessianField, current: Pixel, target: Pixel, visited: set,
                 max_dev: float, lambda1_rel_tol: float) -> Optional[Pixel]:
    height, width = field.shape
    bearing = math.atan2(target[1] - current[1], target[0] - current[0])
    limit = math.radians(max_dev) + 1e-9

    options = []
    for dx, dy in _NEIGHBOURS:
        heading = math.atan2(dy, dx)
        turn = (heading - bearing + math.pi) % (2.0 * math.pi) - math.pi
        if abs(turn) > limit:
            continue
        nx, ny = current[0] + dx, current[1] + dy
        if not (0 <= nx < width and 0 <= ny < height) or (nx, ny) in visited:
            continue
        l1, l2 = float(field.lambda1[ny, nx]), float(field.lambda2[ny, nx])
        if l2 <= 0 or abs(l1) > lambda1_rel_tol * max(abs(l2), _EIG_EPS):
            continue
        # clockwise scan order starting at the bearing
        options.append((l2, (heading - bearing) % (2.0 * math.pi), (nx, ny)))

    if not options:
        return None
    best = max(score for score, _, _ in options)
    ties = [opt for opt in options if opt[0] >= best - _TIE_RTOL * abs(best)]
    return min(ties, key=lambda opt: opt[1])[2]


def trace_dividing_curve(field: HessianField, img, p, q, max_dev: float = 45.0,
                         lambda1_rel_tol: float = 0.15, budget_factor: float = 4.0,
                         source_pair: Optional[PointPair] = None) -> DividingPath:
    """
    Greedy sector-constrained walk along the intensity valley from p to q.

    `img` is only used for its dimensions; the walk reads the precomputed
    field. Falls back to the Bresenham chord when the step budget
    (budget_factor·‖p − q‖) runs out or no neighbour qualifies.
    """
    shape = field.shape
    if img is not None and as_plane(img).shape != shape:
        raise TraceError("Hessian field and image dimensions differ")
    start, goal = _to_pixel(p, shape), _to_pixel(q, shape)
    if start == goal:
        raise TraceError(f"dividing curve endpoints coincide at {start}")

    budget = int(math.ceil(budget_factor * math.hypot(goal[0] - start[0], goal[1] - start[1])))
    path = [start]
    visited = {start}
    current = start
    reached = False
    for _ in range(budget):
        if max(abs(goal[0] - current[0]), abs(goal[1] - current[1])) <= 1:
            reached = True
            break
        step = _valley_step(field, current, goal, visited, max_dev, lambda1_rel_tol)
        if step is None:
            break
        path.append(step)
        visited.add(step)
        current = step

    if reached or max(abs(goal[0] - current[0]), abs(goal[1] - current[1])) <= 1:
        if current != goal:
            path.append(goal)
        if len(path) - 1 <= budget:
            return DividingPath(pixels=tuple(path), source_pair=source_pair, fallback=False)

    logger.debug(f"Valley walk {start} -> {goal} gave up after {len(path) - 1} step(s), using straight chord")
    return DividingPath(pixels=tuple(straight_path(start, goal)), source_pair=source_pair, fallback=True)


class BoundarySnapper:
    """Nearest inner-boundary pixel of a mask (4-connectivity boundary)"""

    def __init__(self, mask):
        bits = mask_bits(mask)
        boundary = find_boundaries(bits, connectivity=1, mode="inner") & bits
        coords = np.argwhere(boundary)
        self._coords = coords
        self._tree = cKDTree(coords[:, ::-1]) if len(coords) else None

    def snap(self, point) -> Pixel:
        if self._tree is None:
            return int(round(float(point[0]))), int(round(float(point[1])))
        _, index = self._tree.query([float(point[0]), float(point[1])])
        row, col = self._coords[int(index)]
        return int(col), int(row)


def snap_to_boundary(mask, point) -> Pixel:
    return BoundarySnapper(mask).snap(point)


# ---------------------------------------------------------------------------
# Applying the cuts
# ---------------------------------------------------------------------------

def _path_raster(paths: Sequence[DividingPath], shape: Tuple[int, int]) -> np.ndarray:
    raster = np.zeros(shape, dtype=bool)
    for path in paths:
        for x, y in path.pixels:
            if 0 <= y < shape[0] and 0 <= x < shape[1]:
                raster[y, x] = True
    return raster


def _reconnect_diagonals(fragments: np.ndarray, count: int, cut: np.ndarray) -> np.ndarray:
    """Join 4-connected fragments that touch diagonally where no path pixel blocks the corner"""
    if count < 2:
        return fragments
    rows, cols = [], []
    for a, b, off1, off2 in (
        (fragments[:-1, :-1], fragments[1:, 1:], cut[:-1, 1:], cut[1:, :-1]),
        (fragments[:-1, 1:], fragments[1:, :-1], cut[:-1, :-1], cut[1:, 1:]),
    ):
        link = (a > 0) & (b > 0) & (a != b) & ~off1 & ~off2
        rows.append(a[link])
        cols.append(b[link])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    if rows.size == 0:
        return fragments

    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(count + 1, count + 1))
    _, component = connected_components(graph, directed=False)
    # lowest original id of each merged group becomes its representative
    representative = np.full(component.max() + 1, count + 1)
    np.minimum.at(representative, component[1:], np.arange(1, count + 1))
    lookup = np.concatenate([[0], representative[component[1:]]])
    return lookup[fragments]


def _best_neighbour(local: np.ndarray, label: int, allowed: np.ndarray, centroids: Dict[int, np.ndarray]) -> int:
    own = local == label
    ring = ndimage.binary_dilation(own, structure=EIGHT_CONNECTED, iterations=2) & ~own
    touching = local[ring]
    touching = touching[np.isin(touching, allowed) & (touching != label)]
    if touching.size:
        ids, counts = np.unique(touching, return_counts=True)
        return int(ids[np.argmax(counts)])
    others = [int(i) for i in allowed if i != label]
    return min(others, key=lambda i: (float(np.hypot(*(centroids[i] - centroids[label]))), i))


def _merge_fragments(fragments: np.ndarray, components: np.ndarray, n_components: int,
                     paths_per_component: Dict[int, int], min_fragment_area: int) -> np.ndarray:
    """Fold slivers and surplus fragments of each original component into neighbours"""
    merged = fragments.copy()
    for comp, window in enumerate(ndimage.find_objects(components, max_label=n_components), start=1):
        if window is None:
            continue
        local = merged[window]
        in_comp = components[window] == comp
        cap = 1 + paths_per_component.get(comp, 0)
        while True:
            ids, areas = np.unique(local[in_comp & (local > 0)], return_counts=True)
            if ids.size <= 1:
                break
            smallest = int(np.lexsort((ids, areas))[0])
            if ids.size <= cap and areas[smallest] >= min_fragment_area:
                break
            centroids = {int(i): np.argwhere(local == i).mean(axis=0) for i in ids}
            label = int(ids[smallest])
            target = _best_neighbour(local, label, ids, centroids)
            logger.debug(f"Merging fragment of {int(areas[smallest])} px into neighbour")
            local[local == label] = target
    return merged


def _assign_cut_pixels(labels: np.ndarray, cut_fg: np.ndarray, components: np.ndarray) -> np.ndarray:
    """Give every removed path pixel to the touching label with the nearest centroid"""
    result = labels.copy()
    ids = np.unique(labels[labels > 0])
    centroids = dict(zip(ids.tolist(), ndimage.center_of_mass(np.ones_like(labels), labels, ids)))
    pending = [tuple(rc) for rc in np.argwhere(cut_fg & (result == 0))]
    height, width = result.shape

    def nearest(row: int, col: int, options) -> int:
        return min(options, key=lambda i: (math.hypot(row - centroids[i][0], col - centroids[i][1]), i))

    while pending:
        snapshot = result.copy()
        remaining = []
        for row, col in pending:
            window = snapshot[max(row - 1, 0):min(row + 2, height), max(col - 1, 0):min(col + 2, width)]
            touching = np.unique(window[window > 0])
            if touching.size == 0:
                remaining.append((row, col))
                continue
            result[row, col] = nearest(row, col, touching.tolist())
        if len(remaining) == len(pending):
            break
        pending = remaining

    next_label = int(result.max()) + 1
    fresh: Dict[int, int] = {}
    for row, col in pending:
        comp = int(components[row, col])
        same = np.unique(result[(components == comp) & (result > 0)]).tolist()
        if same:
            result[row, col] = nearest(row, col, same)
        else:
            # component fully covered by paths keeps one label of its own
            if comp not in fresh:
                fresh[comp] = next_label
                next_label += 1
            result[row, col] = fresh[comp]
    return result


def apply_divisions(mask, paths: Sequence[DividingPath], min_fragment_area: int = 10) -> LabelMask:
    """
    Cut the foreground along the paths and label the pieces.

    Pieces are found with 4-connectivity and re-joined across diagonal
    contacts that no path pixel blocks; every foreground pixel, path pixels
    included, ends up labelled.
    """
    bits = mask_bits(mask)
    components, n_components = ndimage.label(bits, structure=EIGHT_CONNECTED)
    if n_components == 0:
        return LabelMask.empty(bits.shape)

    cut = _path_raster(paths, bits.shape)
    cut_fg = cut & bits
    fragments, count = ndimage.label(bits & ~cut)
    fragments = _reconnect_diagonals(fragments, count, cut)

    paths_per_component: Dict[int, int] = {}
    for path in paths:
        touched = {int(components[y, x]) for x, y in path.pixels
                   if 0 <= y < bits.shape[0] and 0 <= x < bits.shape[1] and bits[y, x]}
        for comp in touched:
            paths_per_component[comp] = paths_per_component.get(comp, 0) + 1

    fragments = _merge_fragments(fragments, components, n_components, paths_per_component, min_fragment_area)
    labels = _assign_cut_pixels(LabelMask(fragments).labels, cut_fg, components)
    result = LabelMask(labels)
    logger.debug(f"{len(paths)} path(s) over {n_components} component(s) -> {result.count} label(s)")
    return result


# ---------------------------------------------------------------------------
# Path run-length encoding
# ---------------------------------------------------------------------------

def path_to_rle(path: DividingPath) -> Dict:
    """Start pixel plus run-length encoded chain codes"""
    runs: List[List[int]] = []
    for (x0, y0), (x1, y1) in zip(path.pixels, path.pixels[1:]):
        code = _CHAIN[(x1 - x0, y1 - y0)]
        if runs and runs[-1][0] == code:
            runs[-1][1] += 1
        else:
            runs.append([code, 1])
    return {"start": list(path.start), "runs": runs}


def rle_to_path(encoded: Dict, source_pair: Optional[PointPair] = None, fallback: bool = False) -> DividingPath:
    x, y = encoded["start"]
    pixels = [(int(x), int(y))]
    for code, length in encoded["runs"]:
        dx, dy = _NEIGHBOURS[code]
        for _ in range(length):
            x, y = x + dx, y + dy
            pixels.append((int(x), int(y)))
    return DividingPath(pixels=tuple(pixels), source_pair=source_pair, fallback=fallback)
