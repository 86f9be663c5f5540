"""Synthetic court-like scenes with exact ground truth.

Scenes are deliberately simple: a banded background (auditorium strip in
the top fifth, court floor below), persons built from a body rectangle
plus a head ellipse, and a circle ball. Every shape is rasterized at pixel
centers (the same rule as the mask algebra), so analytic areas are valid
oracles and emitted annotations are exact.
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Tuple

import numpy as np
from PIL import Image

from . import mask_ops
from .augment import ViewSide
from .coco_io import AnnotationRecord, CategoryRecord, DatasetDoc, ImageRecord, save_dataset
from .errors import IoFailure
from .rng import derive_rng

PERSON_CATEGORY = CategoryRecord(id=1, name="human")
BALL_CATEGORY = CategoryRecord(id=2, name="ball")

_AUDITORIUM_COLOR = (68, 70, 92)
_COURT_COLOR = (193, 154, 107)
_SKIN_COLOR = (224, 172, 138)
_JERSEY_COLORS = ((200, 40, 40), (40, 60, 180), (240, 230, 60), (30, 160, 90), (245, 245, 245))
_BALL_COLOR = (222, 120, 44)
_BALL_STRIPE = (120, 56, 18)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 1920
    height: int = 1440
    n_persons: int = 3
    n_balls: int = 1
    view: ViewSide = ViewSide.RIGHT
    seed: int = 0
    occlusion_prob: float = 0.0

    def __post_init__(self):
        if self.n_persons < 0 or self.n_balls not in (0, 1):
            raise ValueError("n_persons must be >= 0 and n_balls in {0, 1}")
        if not 0.0 <= self.occlusion_prob <= 1.0:
            raise ValueError("occlusion_prob must be in [0, 1]")


def scene_file_name(image_id: int, view: ViewSide) -> str:
    """A file name whose prefix token encodes the view for infer_view."""
    digit = "0" if view is ViewSide.RIGHT else "1"
    return f"{image_id:04d}{digit}_court.png"


def _circle_mask(w: int, h: int, cx: float, cy: float, r: float) -> np.ndarray:
    ys = np.arange(h)[:, None] + 0.5
    xs = np.arange(w)[None, :] + 0.5
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r


def _ellipse_mask(w: int, h: int, cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    ys = np.arange(h)[:, None] + 0.5
    xs = np.arange(w)[None, :] + 0.5
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _rect_mask(w: int, h: int, x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    ys = np.arange(h)[:, None] + 0.5
    xs = np.arange(w)[None, :] + 0.5
    return (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)


def _person_shape(w, h, cx, cy, body_w, body_h, rng) -> Tuple[np.ndarray, np.ndarray]:
    """Mask plus painted pixels (body rectangle + head ellipse)."""
    body_top = cy - body_h / 2.0
    body = _rect_mask(w, h, cx - body_w / 2.0, body_top, cx + body_w / 2.0, cy + body_h / 2.0)
    head_ry = body_w * 0.45
    head_rx = body_w * 0.38
    head_cy = body_top - head_ry * 0.6
    head = _ellipse_mask(w, h, cx, head_cy, head_rx, head_ry)
    mask = body | head
    paint = np.zeros((h, w, 3), dtype=np.uint8)
    jersey = _JERSEY_COLORS[int(rng.integers(len(_JERSEY_COLORS)))]
    paint[body] = jersey
    paint[head] = _SKIN_COLOR
    return mask, paint


def _ball_shape(w, h, cx, cy, r) -> Tuple[np.ndarray, np.ndarray]:
    mask = _circle_mask(w, h, cx, cy, r)
    paint = np.zeros((h, w, 3), dtype=np.uint8)
    paint[mask] = _BALL_COLOR
    stripe = mask & (np.abs(np.arange(h)[:, None] + 0.5 - cy) < r * 0.18)
    paint[stripe] = _BALL_STRIPE  # two-tone: a "colorful" ball
    return mask, paint


def generate_scene(
    spec: SceneSpec, image_id: int = 1, annotation_id_start: int = 1
) -> Tuple[np.ndarray, DatasetDoc]:
    """Render one scene and its exact single-image annotation document.

    Deterministic in (spec.seed, image_id). Later-drawn objects occlude
    earlier ones; fully hidden objects are dropped from the ground truth.
    The ball, when present, is drawn last and topmost.
    """
    w, h = spec.width, spec.height
    rng = derive_rng(spec.seed, image_id, "synthgen")

    pixels = np.empty((h, w, 3), dtype=np.uint8)
    pixels[:] = _COURT_COLOR
    pixels[: h // 5] = _AUDITORIUM_COLOR

    objects: List[Tuple[int, np.ndarray]] = []  # (category_id, mask)

    def add_object(category_id: int, mask: np.ndarray, paint: np.ndarray):
        for i, (cat, m) in enumerate(objects):
            objects[i] = (cat, m & ~mask)
        objects.append((category_id, mask))
        pixels[mask] = paint[mask]

    prev_center = None
    band_lo, band_hi = h / 2.0 - h / 5.0, h / 2.0 + h / 5.0
    for _ in range(spec.n_persons):
        body_h = float(rng.uniform(0.14, 0.22)) * h
        body_w = body_h * float(rng.uniform(0.28, 0.42))
        cy = float(rng.uniform(band_lo, band_hi))
        if prev_center is not None and float(rng.random()) < spec.occlusion_prob:
            cx = prev_center[0] + float(rng.uniform(-0.6, 0.6)) * body_w
            cy = prev_center[1] + float(rng.uniform(-0.2, 0.2)) * body_h
        else:
            cx = float(rng.uniform(body_w, w - body_w))
        mask, paint = _person_shape(w, h, cx, cy, body_w, body_h, rng)
        if mask.any():
            add_object(PERSON_CATEGORY.id, mask, paint)
            prev_center = (cx, cy)

    for _ in range(spec.n_balls):
        r = float(rng.uniform(0.008, 0.012)) * h
        cx = float(rng.uniform(r + 1, w - r - 1))
        cy = float(rng.uniform(0.30 * h, 0.85 * h))
        mask, paint = _ball_shape(w, h, cx, cy, r)
        if mask.any():
            add_object(BALL_CATEGORY.id, mask, paint)

    annotations = []
    ann_id = annotation_id_start
    for category_id, mask in objects:
        box = mask_ops.mask_bbox(mask)
        if box is None:
            continue
        annotations.append(
            AnnotationRecord(
                id=ann_id,
                image_id=image_id,
                category_id=category_id,
                bbox=(float(box.x_min), float(box.y_min), float(box.width), float(box.height)),
                segmentation=mask_ops.mask_to_rle_segmentation(mask),
                area=mask_ops.mask_area(mask),
            )
        )
        ann_id += 1

    image = ImageRecord(id=image_id, file_name=scene_file_name(image_id, spec.view),
                        width=w, height=h)
    doc = DatasetDoc(images=(image,), annotations=tuple(annotations),
                     categories=(PERSON_CATEGORY, BALL_CATEGORY))
    return pixels, doc


def generate_corpus(
    n_images: int, base_spec: SceneSpec, out_dir, dataset_name: str = "dataset.json"
) -> DatasetDoc:
    """Write ``n_images`` alternating-view scenes plus their combined document.

    Scene i uses view Right when i is even, Left when odd (overriding
    ``base_spec.view``); image ids run 1..n and annotation ids are global.
    Emits lossless PNGs and a COCO JSON into ``out_dir``.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create {out_dir}: {e}") from e

    images: List[ImageRecord] = []
    annotations: List[AnnotationRecord] = []
    ann_id = 1
    for i in range(n_images):
        view = ViewSide.RIGHT if i % 2 == 0 else ViewSide.LEFT
        spec = replace(base_spec, view=view)
        pixels, doc = generate_scene(spec, image_id=i + 1, annotation_id_start=ann_id)
        record = doc.images[0]
        try:
            Image.fromarray(pixels, mode="RGB").save(out_dir / record.file_name)
        except OSError as e:
            raise IoFailure(f"cannot write {record.file_name}: {e}") from e
        images.append(record)
        annotations.extend(doc.annotations)
        ann_id += len(doc.annotations)

    corpus = DatasetDoc(images=tuple(images), annotations=tuple(annotations),
                        categories=(PERSON_CATEGORY, BALL_CATEGORY))
    save_dataset(corpus, out_dir / dataset_name)
    return corpus
