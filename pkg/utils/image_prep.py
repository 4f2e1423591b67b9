"""
Image preparation for clumped nuclei splitting

Bu modül ham floresan görüntüyü kontur analizine hazırlar:
- Nükleer boya kanalının (mavi) seçimi
- Otsu global eşikleme + küçük parça / küçük delik temizliği
- Dış kontur çıkarma (8-bağlantılı bileşen başına bir kontur)
- Dairesel Gauss yumuşatma (büzülme düzeltmeli)

Kontur yönü sabittir: (x, y) koordinatlarında pozitif işaretli alan,
yani ön plan gidiş yönünün solunda kalır.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import cv2
import numpy as np
from scipy import ndimage
from scipy.ndimage import gaussian_filter1d
from skimage.draw import polygon as draw_polygon
from skimage.filters import threshold_otsu
from skimage.segmentation import relabel_sequential

from utils.errors import ImageFormatError

logger = logging.getLogger(__name__)

MIN_CONTOUR_POINTS = 8
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major intensity grid normalized to [0, 1], 1 or 3 channels"""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 3 and data.shape[2] == 1:
            data = data[..., 0]
        if data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[2] != 3):
            raise ImageFormatError(f"expected HxW or HxWx3 data, got shape {data.shape}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise ImageFormatError("image must have positive width and height")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise ImageFormatError("intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Foreground flags with the dimensions of the source image"""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ImageFormatError(f"mask must be 2-D, got shape {bits.shape}")
        object.__setattr__(self, "bits", _freeze(bits.astype(bool)))

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def as_uint8(self) -> np.ndarray:
        return self.bits.astype(np.uint8) * 255


@dataclass(frozen=True, eq=False)
class LabelMask:
    """
    Integer-labeled segmentation raster, 0 = background.

    Labels are relabeled on construction so they always form {0..K}
    without gaps (raster order of the original ids is kept).
    """
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ImageFormatError(f"label mask must be 2-D, got shape {labels.shape}")
        if labels.size and labels.min() < 0:
            raise ImageFormatError("labels must be non-negative")
        labels = labels.astype(np.int64)
        if labels.size and labels.max() > 0:
            labels, _, _ = relabel_sequential(labels)
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int32)))

    @classmethod
    def empty(cls, shape: Tuple[int, int]) -> "LabelMask":
        return cls(np.zeros(shape, dtype=np.int32))

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def count(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def object_mask(self, label: int) -> np.ndarray:
        return self.labels == label

    def areas(self) -> np.ndarray:
        """Pixel area per label, index 0 is background"""
        return np.bincount(self.labels.ravel(), minlength=self.count + 1)


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed, ordered boundary polyline in (x, y) subpixel coordinates"""
    points: np.ndarray
    contour_id: int = 0
    closed: bool = field(default=True, init=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError(f"contour points must be (N, 2), got {points.shape}")
        if len(points) < MIN_CONTOUR_POINTS:
            raise ValueError(f"contour needs at least {MIN_CONTOUR_POINTS} points, got {len(points)}")
        object.__setattr__(self, "points", _freeze(points))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def arc_length(self) -> float:
        steps = np.roll(self.points, -1, axis=0) - self.points
        return float(np.hypot(steps[:, 0], steps[:, 1]).sum())

    @property
    def signed_area(self) -> float:
        return polygon_signed_area(self.points)


@dataclass(frozen=True, eq=False)
class ClumpGeometry:
    """Everything the later stages need from one prepared image"""
    channel: RasterImage
    mask: BinaryMask
    raw_contours: List[Contour]
    contours: List[Contour]


def polygon_signed_area(points: np.ndarray) -> float:
    """Shoelace area, positive for the orientation used by every Contour"""
    x = points[:, 0]
    y = points[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def select_nuclear_channel(img: RasterImage) -> RasterImage:
    """Blue plane for RGB input, the image itself for grayscale."""
    if img.channels == 1:
        return img
    return RasterImage(img.data[..., 2])


def _remove_small_components(fg: np.ndarray, min_area: int) -> np.ndarray:
    labels, count = ndimage.label(fg, structure=EIGHT_CONNECTED)
    if count == 0:
        return fg
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_area
    keep[0] = False
    return keep[labels]


def _fill_small_holes(fg: np.ndarray, max_hole: int) -> np.ndarray:
    # background uses 4-connectivity, dual of the 8-connected foreground
    holes, count = ndimage.label(~fg)
    if count == 0:
        return fg
    border = np.unique(np.concatenate([holes[0], holes[-1], holes[:, 0], holes[:, -1]]))
    sizes = np.bincount(holes.ravel(), minlength=count + 1)
    fill = sizes < max_hole
    fill[0] = False
    fill[border] = False
    return fg | fill[holes]


def binarize(img: RasterImage, min_area: int = 50, max_hole: int = 30) -> BinaryMask:
    """
    Otsu global threshold (256 bins) followed by cleanup.

    Components smaller than min_area pixels are removed and holes smaller
    than max_hole pixels are filled. A constant image yields an empty mask.
    """
    if img.channels != 1:
        raise ImageFormatError("binarize expects a single-channel image")
    data = img.data
    if float(np.ptp(data)) == 0.0:
        logger.debug("Constant image, returning empty mask")
        return BinaryMask(np.zeros(data.shape, dtype=bool))

    threshold = threshold_otsu(data, nbins=256)
    fg = data > threshold
    fg = _remove_small_components(fg, min_area)
    fg = _fill_small_holes(fg, max_hole)
    logger.debug(f"Otsu threshold {threshold:.4f}, foreground {int(fg.sum())} px")
    return BinaryMask(fg)


def trace_contours(mask: BinaryMask) -> List[Contour]:
    """Outer boundary pixel chain of every 8-connected foreground component."""
    bits = np.ascontiguousarray(mask.bits, dtype=np.uint8)
    if not bits.any():
        return []

    # OpenCV 3 returns (image, contours, hierarchy), OpenCV 4 (contours, hierarchy)
    found = cv2.findContours(bits, cv2.RETR_CCOMP, cv2.CHAIN_APPROX_NONE)
    chains, hierarchy = found[-2], found[-1]
    if hierarchy is None:
        return []

    outer = []
    for chain, links in zip(chains, hierarchy[0]):
        if links[3] != -1:
            continue  # hole boundary
        points = chain[:, 0, :].astype(np.float64)
        if len(points) < MIN_CONTOUR_POINTS:
            logger.debug(f"Skipping tiny contour with {len(points)} points")
            continue
        if polygon_signed_area(points) < 0:
            points = np.roll(points[::-1], 1, axis=0)
        outer.append(points)

    outer.sort(key=lambda pts: (pts[:, 1].min(), pts[pts[:, 1] == pts[:, 1].min(), 0].min()))
    return [Contour(points, contour_id=k) for k, points in enumerate(outer)]


def smooth_contour(c: Contour, sigma: float, shrink_correction: bool = True) -> Contour:
    """
    Circular Gaussian smoothing of x(s) and y(s).

    With shrink_correction the filter is 2·G∗c − G∗G∗c, which removes the
    first-order inward drift of plain smoothing on curved outlines.
    Point count and indexing are preserved.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    smoothed = gaussian_filter1d(c.points, sigma, axis=0, mode="wrap")
    if shrink_correction:
        smoothed = 2.0 * smoothed - gaussian_filter1d(smoothed, sigma, axis=0, mode="wrap")
    return Contour(smoothed, contour_id=c.contour_id)


def contour_to_mask(contour: Contour, shape: Tuple[int, int]) -> BinaryMask:
    """Rasterize a contour: polygon interior plus its boundary pixels"""
    pts = contour.points
    bits = np.zeros(shape, dtype=bool)
    rr, cc = draw_polygon(pts[:, 1], pts[:, 0], shape=shape)
    bits[rr, cc] = True
    cols = np.clip(np.rint(pts[:, 0]).astype(int), 0, shape[1] - 1)
    rows = np.clip(np.rint(pts[:, 1]).astype(int), 0, shape[0] - 1)
    bits[rows, cols] = True
    return BinaryMask(bits)


def prepare_clumps(img: RasterImage, contour_sigma: float = 3.0, min_area: int = 50,
                   max_hole: int = 30, shrink_correction: bool = True) -> ClumpGeometry:
    """channel → binarize → trace → smooth"""
    channel = select_nuclear_channel(img)
    mask = binarize(channel, min_area=min_area, max_hole=max_hole)
    raw = trace_contours(mask)
    smoothed = [smooth_contour(c, contour_sigma, shrink_correction) for c in raw]
    logger.info(f"Prepared {len(smoothed)} clump contour(s)")
    return ClumpGeometry(channel=channel, mask=mask, raw_contours=raw, contours=smoothed)


def sample_mask(mask: np.ndarray, x: float, y: float) -> bool:
    """Foreground flag at the pixel nearest to (x, y); outside counts as background"""
    col = int(np.rint(x))
    row = int(np.rint(y))
    if row < 0 or col < 0 or row >= mask.shape[0] or col >= mask.shape[1]:
        return False
    return bool(mask[row, col])


def mask_bits(mask) -> np.ndarray:
    return mask.bits if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)


def as_plane(img) -> np.ndarray:
    """Single-channel float array from a RasterImage or raw array"""
    if isinstance(img, RasterImage):
        if img.channels != 1:
            raise ImageFormatError("expected a single-channel image")
        return img.data
    data = np.asarray(img, dtype=np.float64)
    if data.ndim != 2:
        raise ImageFormatError(f"expected a 2-D intensity array, got shape {data.shape}")
    return data
