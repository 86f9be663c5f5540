"""Inference-side processing: top cropping with inversion, ball filtering.

Detections are carried in the standard COCO results shape: one record per
detection with image_id, category_id, score, bbox (x, y, w, h) and an RLE
segmentation in the frame the detector saw. Crop transforms are persisted
as a sidecar JSON list so cropping and inversion can run as separate
invocations.
"""

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import mask_ops
from .errors import DimensionMismatch, MalformedDocument
from .mask_ops import Box


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    score: float
    bbox: Tuple[float, float, float, float]
    segmentation: Optional[dict] = None
    extra: Dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))

    @property
    def box(self) -> Box:
        x, y, w, h = self.bbox
        return Box(x, y, x + w, y + h)


@dataclass(frozen=True)
class CropTransform:
    original_height: int
    original_width: int
    top_offset: int
    fraction: float


def crop_top(pixels: np.ndarray, fraction: float) -> Tuple[np.ndarray, CropTransform]:
    """Remove the top ``floor(height * fraction)`` rows of an image."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    h, w = pixels.shape[:2]
    top = int(np.floor(h * fraction))
    transform = CropTransform(original_height=h, original_width=w,
                              top_offset=top, fraction=fraction)
    return pixels[top:], transform


def uncrop_detections(dets: Sequence[Detection], t: CropTransform) -> List[Detection]:
    """Map detections from the cropped frame back into the original frame.

    Bbox y shifts down by the crop offset; masks are re-embedded into an
    original-size canvas with background rows above. Exact: integer offsets,
    no resampling.
    """
    cropped_h = t.original_height - t.top_offset
    out = []
    for det in dets:
        x, y, w, h = det.bbox
        seg = det.segmentation
        if seg is not None:
            size = seg.get("size")
            if size is None or int(size[0]) != cropped_h or int(size[1]) != t.original_width:
                raise DimensionMismatch(
                    f"detection mask size {size} != cropped frame "
                    f"({cropped_h}, {t.original_width})"
                )
            mask = mask_ops.rle_decode(seg["counts"], t.original_width, cropped_h)
            canvas = np.zeros((t.original_height, t.original_width), dtype=bool)
            canvas[t.top_offset :] = mask
            seg = mask_ops.mask_to_rle_segmentation(canvas)
        out.append(replace(det, bbox=(x, y + t.top_offset, w, h), segmentation=seg))
    return out


def ball_size_gate(
    det: Detection, min_dim: float = 10, max_dim: float = 40, mode: str = "both"
) -> bool:
    """Keep/drop rule for ball detections based on bbox side lengths.

    ``mode="both"`` (default) drops a ball only when both sides are small
    (< min_dim) or both are large (> max_dim); ``mode="either"`` drops when
    any side is out of range. Returns True to keep.
    """
    w, h = det.bbox[2], det.bbox[3]
    if mode == "both":
        return not ((w < min_dim and h < min_dim) or (w > max_dim and h > max_dim))
    if mode == "either":
        return not (w < min_dim or h < min_dim or w > max_dim or h > max_dim)
    raise ValueError(f"gate mode must be 'both' or 'either', got {mode!r}")


def max_score_filter(
    dets: Sequence[Detection],
    ball_category: int,
    min_dim: float = 10,
    max_dim: float = 40,
    gate_mode: str = "both",
) -> List[Detection]:
    """Keep one cluster of ball detections anchored at the top score.

    Non-ball detections pass through untouched. Balls are size-gated first;
    among the survivors the maximum-score ball (ties broken by input order)
    is kept, and any other survivor is kept iff its box overlaps the
    anchor's box (IoU > 0). Output preserves input order.
    """
    gated: Dict[int, Detection] = {
        i: d
        for i, d in enumerate(dets)
        if d.category_id == ball_category and ball_size_gate(d, min_dim, max_dim, gate_mode)
    }
    keep_balls: set = set()
    if gated:
        anchor_i = min(gated, key=lambda i: (-gated[i].score, i))
        anchor_box = gated[anchor_i].box
        keep_balls = {
            i for i, d in gated.items()
            if i == anchor_i or mask_ops.box_iou(d.box, anchor_box) > 0.0
        }
    return [
        d for i, d in enumerate(dets)
        if d.category_id != ball_category or i in keep_balls
    ]


def run_tsip(
    pixels: np.ndarray,
    detections_provider: Callable[[np.ndarray], Sequence[Detection]],
    fraction: float,
    ball_category: int,
    **filter_kwargs,
) -> List[Detection]:
    """Crop the top, run the provider, invert coordinates, filter balls."""
    cropped, transform = crop_top(pixels, fraction)
    dets = list(detections_provider(cropped))
    dets = uncrop_detections(dets, transform)
    return max_score_filter(dets, ball_category, **filter_kwargs)


# --- results / sidecar files ------------------------------------------------

def parse_results(raw) -> List[Detection]:
    """Parse a COCO-style detection results JSON array."""
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"results file is not valid JSON: {e}") from e
    if not isinstance(data, list):
        raise MalformedDocument("results file must be a JSON array")
    dets = []
    known = ("image_id", "category_id", "score", "bbox", "segmentation")
    for raw_det in data:
        try:
            dets.append(
                Detection(
                    image_id=int(raw_det["image_id"]),
                    category_id=int(raw_det["category_id"]),
                    score=float(raw_det["score"]),
                    bbox=tuple(float(v) for v in raw_det["bbox"]),
                    segmentation=raw_det.get("segmentation"),
                    extra={k: raw_det[k] for k in raw_det if k not in known},
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedDocument(f"bad detection record: {e}") from e
    return dets


def serialize_results(dets: Sequence[Detection]) -> bytes:
    payload = []
    for d in dets:
        rec = {
            "image_id": d.image_id,
            "category_id": d.category_id,
            "score": d.score,
            "bbox": list(d.bbox),
            "segmentation": d.segmentation,
        }
        rec.update({k: d.extra[k] for k in sorted(d.extra)})
        payload.append(rec)
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def load_results(path) -> List[Detection]:
    with open(path, "rb") as f:
        return parse_results(f.read())


def save_results(dets: Sequence[Detection], path) -> None:
    with open(path, "wb") as f:
        f.write(serialize_results(dets))


def save_crop_transforms(transforms: Dict[int, CropTransform], path) -> None:
    """Persist per-image crop transforms keyed by image id."""
    payload = [
        {
            "image_id": image_id,
            "top_offset": t.top_offset,
            "fraction": t.fraction,
            "original_height": t.original_height,
            "original_width": t.original_width,
        }
        for image_id, t in sorted(transforms.items())
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_crop_transforms(path) -> Dict[int, CropTransform]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    out = {}
    for rec in data:
        if rec.get("image_id") is None:
            raise MalformedDocument("crop transform record without image_id")
        out[int(rec["image_id"])] = CropTransform(
            original_height=int(rec["original_height"]),
            original_width=int(rec["original_width"]),
            top_offset=int(rec["top_offset"]),
            fraction=float(rec["fraction"]),
        )
    return out
