"""
Image file input / output

PNG dosyaları Pillow ile, TIFF dosyaları tifffile ile okunur. Yoğunluklar
bit derinliğine göre [0, 1] aralığına ölçeklenir; etiket maskeleri ise
ölçeklenmeden (ham tamsayı) okunur ve 16-bit PNG olarak yazılır.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
import tifffile
from PIL import Image

from utils.errors import ImageFormatError
from utils.image_prep import BinaryMask, LabelMask, RasterImage

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PNG_SUFFIXES = {".png"}
TIFF_SUFFIXES = {".tif", ".tiff"}
IMAGE_SUFFIXES = PNG_SUFFIXES | TIFF_SUFFIXES


def _read_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("1",):
            raise ImageFormatError(f"{path.name}: 1-bit images are not supported")
        if mode == "P":
            im = im.convert("RGBA" if "transparency" in im.info else "RGB")
            mode = im.mode
        if mode in ("LA", "RGBA"):
            im = im.convert("L" if mode == "LA" else "RGB")
            mode = im.mode
        if mode in ("L", "RGB"):
            return np.asarray(im, dtype=np.uint8)
        if mode.startswith("I;16") or mode == "I":
            data = np.asarray(im)
            if data.min() < 0 or data.max() > np.iinfo(np.uint16).max:
                raise ImageFormatError(f"{path.name}: values outside the 16-bit range")
            return data.astype(np.uint16)
        raise ImageFormatError(f"{path.name}: unsupported PNG mode {mode}")


def _read_tiff(path: Path) -> np.ndarray:
    data = tifffile.imread(path)
    if data.ndim == 3 and data.shape[0] in (3, 4) and data.shape[-1] not in (3, 4):
        data = np.moveaxis(data, 0, -1)
    if data.ndim == 3 and data.shape[-1] == 4:
        data = data[..., :3]
    if data.ndim not in (2, 3) or (data.ndim == 3 and data.shape[-1] != 3):
        raise ImageFormatError(f"{path.name}: unsupported TIFF layout {data.shape}")
    return data


def _read_raw(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    suffix = path.suffix.lower()
    if suffix in PNG_SUFFIXES:
        return _read_png(path)
    if suffix in TIFF_SUFFIXES:
        return _read_tiff(path)
    raise ImageFormatError(f"{path.name}: only PNG and TIFF are supported")


def load_image(path: PathLike) -> RasterImage:
    """Read an 8/16-bit PNG or TIFF and rescale intensities to [0, 1]."""
    data = _read_raw(path)
    if data.dtype == np.uint8:
        scaled = data.astype(np.float64) / 255.0
    elif data.dtype == np.uint16:
        scaled = data.astype(np.float64) / 65535.0
    else:
        raise ImageFormatError(f"{Path(path).name}: unsupported bit depth ({data.dtype})")
    logger.debug(f"Loaded {path} with shape {data.shape} ({data.dtype})")
    return RasterImage(scaled)


def load_label_mask(path: PathLike) -> LabelMask:
    """Read an integer label image as is (no intensity scaling)."""
    data = _read_raw(path)
    if data.ndim != 2:
        raise ImageFormatError(f"{Path(path).name}: label masks must be single-channel")
    if not np.issubdtype(data.dtype, np.integer):
        raise ImageFormatError(f"{Path(path).name}: label masks must hold integers")
    return LabelMask(data)


def _prepare_parent(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def save_label_png(path: PathLike, labels: LabelMask) -> Path:
    if labels.count > np.iinfo(np.uint16).max:
        raise ImageFormatError("more labels than a 16-bit PNG can hold")
    path = _prepare_parent(path)
    Image.fromarray(labels.labels.astype(np.uint16)).save(path)
    return path


def save_mask_png(path: PathLike, mask: BinaryMask) -> Path:
    path = _prepare_parent(path)
    Image.fromarray(mask.as_uint8()).save(path)
    return path


def to_uint8(data: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(data, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_image_png(path: PathLike, img: RasterImage) -> Path:
    """8-bit PNG of a normalized image (grayscale or RGB)"""
    path = _prepare_parent(path)
    Image.fromarray(to_uint8(img.data)).save(path)
    return path
