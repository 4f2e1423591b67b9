"""
Debug exports for the segment command

- Kontur başına (index, x, y, s, κ) CSV
- Tüm çiftlerin skorlarıyla JSON dökümü
- Uydurulan elipsler + seçilen kirişler overlay PNG
- Bölme eğrileri: RLE JSON + overlay PNG
- Etiket overlay PNG
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image, ImageDraw
from skimage.color import label2rgb
from skimage.segmentation import mark_boundaries

from services.image_io import to_uint8
from utils.curvature import profile_records
from utils.curve_trace import DividingPath
from utils.image_prep import LabelMask, RasterImage, select_nuclear_channel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CHORD_COLOUR = (255, 220, 0)
ELLIPSE_COLOUR = (0, 255, 120)
CANDIDATE_COLOUR = (255, 60, 60)
PATH_COLOUR = (255, 0, 255)
FALLBACK_COLOUR = (255, 140, 0)


def _write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def background_rgb(img: RasterImage) -> np.ndarray:
    """Nuclear channel as 8-bit gray RGB"""
    plane = to_uint8(select_nuclear_channel(img).data)
    return np.stack([plane] * 3, axis=-1)


def export_contour_csvs(out_dir: PathLike, contours: Iterable, profiles: Dict[int, Any]) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for contour in contours:
        frame = pd.DataFrame(profile_records(contour, profiles[contour.contour_id]),
                             columns=["index", "x", "y", "s", "kappa"])
        target = out_dir / f"{contour.contour_id}.csv"
        frame.to_csv(target, index=False)
        written.append(target)
    logger.debug(f"Wrote {len(written)} contour CSV(s) to {out_dir}")
    return written


def pair_records(diagnostics: Dict[str, Any]) -> List[Dict[str, Any]]:
    records = []
    for contour in diagnostics["contours"]:
        for role in ("c_plus", "c_minus", "rejected", "evaluated", "c_star"):
            records.extend({"role": role, **pair} for pair in contour[role])
    return records


def export_pairs_json(path: PathLike, diagnostics: Dict[str, Any]) -> Path:
    return _write_json(path, pair_records(diagnostics))


def export_paths_json(path: PathLike, paths: Sequence[DividingPath]) -> Path:
    return _write_json(path, [p.to_dict() for p in paths])


def _save_rgb(path: PathLike, rgb: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb).save(path)
    return path


def draw_ellipse_overlay(path: PathLike, img: RasterImage, plans: Dict[int, Any], candidates: Dict[int, list]) -> Path:
    """Committed ellipses, every chord of C* and the candidate points"""
    canvas = Image.fromarray(background_rgb(img))
    draw = ImageDraw.Draw(canvas)
    for plan in plans.values():
        for scored in plan.committed:
            if scored.ellipse is not None:
                outline = [tuple(pt) for pt in scored.ellipse.boundary_points(96)]
                draw.line(outline + [outline[0]], fill=ELLIPSE_COLOUR, width=1)
        for pair in plan.c_star:
            draw.line([tuple(pair.a.position), tuple(pair.b.position)], fill=CHORD_COLOUR, width=1)
    for points in candidates.values():
        for cand in points:
            x, y = cand.position
            draw.ellipse([x - 2, y - 2, x + 2, y + 2], outline=CANDIDATE_COLOUR)
    return _save_rgb(path, np.asarray(canvas))


def draw_paths_overlay(path: PathLike, img: RasterImage, paths: Sequence[DividingPath]) -> Path:
    rgb = background_rgb(img)
    for p in paths:
        cols, rows = np.array(p.pixels).T
        rgb[rows, cols] = FALLBACK_COLOUR if p.fallback else PATH_COLOUR
    return _save_rgb(path, rgb)


def draw_label_overlay(path: PathLike, img: RasterImage, labels: LabelMask, alpha: float = 0.35) -> Path:
    """Labels blended over the nuclear channel, object outlines in white"""
    gray = select_nuclear_channel(img).data
    coloured = label2rgb(labels.labels, image=gray, alpha=alpha, bg_label=0, bg_color=None)
    outlined = mark_boundaries(coloured, labels.labels, color=(1.0, 1.0, 1.0), mode="inner")
    return _save_rgb(path, to_uint8(outlined))


def segment_outputs(out_dir: PathLike, stem: str) -> Dict[str, Path]:
    """File names written by `segment` for one input"""
    out_dir = Path(out_dir)
    names: Tuple[Tuple[str, str], ...] = (
        ("labels", f"{stem}_labels.png"),
        ("mask", f"{stem}_mask.png"),
        ("diagnostics", f"{stem}_diagnostics.json"),
        ("overlay", f"{stem}_overlay.png"),
        ("contours", f"{stem}_contours"),
        ("pairs", f"{stem}_pairs.json"),
        ("ellipses", f"{stem}_ellipses.png"),
        ("paths_json", f"{stem}_paths.json"),
        ("paths_png", f"{stem}_paths.png"),
    )
    return {key: out_dir / name for key, name in names}
