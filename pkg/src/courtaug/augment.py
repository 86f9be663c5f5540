"""Copy-paste augmentation engine and batch driver.

Pipeline stages, composed in this fixed order by :func:`augment_image`:

1. view inference from the file name,
2. view-constrained copy-paste of persons and balls,
3. person-anchored interaction ball pastes,
4. one random geometric transform (shear / rotate / translate),
5. photometric distortion (brightness, contrast, saturation, hue).

Dataset duplication and the resize-crop-pad used by training loaders are
exposed as separate operations. All randomness flows through generators
derived from (config.seed, image_id, stage), so re-running any stage with
the same inputs is bit-identical, in serial or parallel execution.
"""

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import cv2
import numpy as np
from PIL import Image

from . import mask_ops
from .coco_io import AnnotationRecord, DatasetDoc, ImageRecord, reindex
from .config import AugmentConfig, PaletteEntry
from .errors import (
    BrokenReference,
    EmptyAfterClip,
    EmptyBank,
    ImageLoadFailure,
    SamplingExhausted,
)
from .mask_ops import Box
from .object_bank import ObjectPatch
from .rng import derive_rng


class ViewSide(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class CategoryPair(NamedTuple):
    person: int
    ball: int


@dataclass(frozen=True)
class PasteEvent:
    """One pasted patch: which, where, and the annotation it produced."""

    stage: str  # "view" or "interaction"
    category_id: int
    bank_index: int
    source_annotation_id: int
    x_min: float
    y_min: float
    annotation_id: int


def infer_view(file_name: str) -> ViewSide:
    """Classify an image as left- or right-view from its file name.

    The stem's prefix token (substring before the first underscore) decides:
    a token ending in '0' means right view, anything else left view.
    """
    stem = Path(file_name).stem
    token = stem.split("_", 1)[0]
    if token and token[-1] == "0":
        return ViewSide.RIGHT
    return ViewSide.LEFT


def resolve_categories(doc: DatasetDoc, config: AugmentConfig) -> CategoryPair:
    """Map the configured person/ball category names to ids in a document."""
    by_name = {c.name: c.id for c in doc.categories}
    for name in (config.person_category, config.ball_category):
        if name not in by_name:
            raise BrokenReference(f"category '{name}' not present in document")
    return CategoryPair(person=by_name[config.person_category],
                        ball=by_name[config.ball_category])


def sample_view_paste_location(
    view: ViewSide,
    w: int,
    h: int,
    patch_size: Tuple[int, int],
    rng: np.random.Generator,
    max_attempts: int = 25,
) -> Tuple[float, float]:
    """Draw a paste anchor satisfying the view-specific location constraints.

    Right view: x_min in [w/5, w]; left view: x_min in [0, w - w/5]; both
    views: y_min in [h/2 - h/5, h/2 + h/5]. Intervals are real-valued. A
    draw whose floored anchor would leave the patch rectangle entirely
    off-canvas is rejected and redrawn, up to ``max_attempts``.
    """
    pw, ph = patch_size
    if w <= 0 or h <= 0 or pw <= 0 or ph <= 0:
        raise ValueError("canvas and patch dimensions must be positive")
    if view is ViewSide.RIGHT:
        x_lo, x_hi = w / 5.0, float(w)
    else:
        x_lo, x_hi = 0.0, w - w / 5.0
    y_lo, y_hi = h / 2.0 - h / 5.0, h / 2.0 + h / 5.0
    for _ in range(max_attempts):
        x = float(rng.uniform(x_lo, x_hi))
        y = float(rng.uniform(y_lo, y_hi))
        ax, ay = math.floor(x), math.floor(y)
        if ax < w and ay < h and ax + pw > 0 and ay + ph > 0:
            return x, y
    raise SamplingExhausted(
        f"no visible paste anchor in {max_attempts} draws for view {view.value}"
    )


def sample_interaction_location(person_box: Box, rng: np.random.Generator) -> Tuple[float, float]:
    """Draw a ball anchor uniformly inside a person's bounding box."""
    x = float(rng.uniform(person_box.x_min, person_box.x_max))
    y = float(rng.uniform(person_box.y_min, person_box.y_max))
    return x, y


def recolor_pure_ball(
    patch: ObjectPatch, palette_entry: PaletteEntry, rng: np.random.Generator
) -> ObjectPatch:
    """Flatten the masked pixels to one random color from the palette entry.

    One (R, G, B) triple is drawn per patch, each channel uniform over its
    inclusive range; pixels outside the mask and the mask itself are
    untouched.
    """
    r = int(rng.integers(palette_entry.r[0], palette_entry.r[1] + 1))
    g = int(rng.integers(palette_entry.g[0], palette_entry.g[1] + 1))
    b = int(rng.integers(palette_entry.b[0], palette_entry.b[1] + 1))
    pixels = patch.pixels.copy()
    pixels[patch.mask] = (r, g, b)
    return replace(patch, pixels=pixels)


def _decode_masks(annotations: Sequence[AnnotationRecord], width: int, height: int) -> List[np.ndarray]:
    return [mask_ops.decode_segmentation(a.segmentation, width, height) for a in annotations]


def _rebuild_record(ann: AnnotationRecord, mask: np.ndarray) -> AnnotationRecord:
    """Recompute segmentation (RLE), bbox and area from the dense mask."""
    box = mask_ops.mask_bbox(mask)
    return AnnotationRecord(
        id=ann.id,
        image_id=ann.image_id,
        category_id=ann.category_id,
        bbox=(float(box.x_min), float(box.y_min), float(box.width), float(box.height)),
        segmentation=mask_ops.mask_to_rle_segmentation(mask),
        area=mask_ops.mask_area(mask),
        iscrowd=ann.iscrowd,
        extra=dict(ann.extra),
    )


def _paint_patch(pixels: np.ndarray, patch: ObjectPatch, x0: int, y0: int) -> None:
    h, w = pixels.shape[:2]
    ph, pw = patch.mask.shape
    px0, py0 = max(0, -x0), max(0, -y0)
    px1, py1 = min(pw, w - x0), min(ph, h - y0)
    region = pixels[y0 + py0 : y0 + py1, x0 + px0 : x0 + px1]
    visible = patch.mask[py0:py1, px0:px1]
    region[visible] = patch.pixels[py0:py1, px0:px1][visible]


def _paste_one(
    pixels: np.ndarray,
    anns: List[AnnotationRecord],
    masks: List[np.ndarray],
    patch: ObjectPatch,
    sample_fn: Callable[[np.random.Generator], Tuple[float, float]],
    rng: np.random.Generator,
    max_attempts: int,
    image_id: int,
    next_id: int,
) -> Tuple[float, float, int]:
    """Sample a position, composite, paint pixels, update annotation state.

    Mutates ``pixels``, ``anns`` and ``masks`` in place; returns the sampled
    (x, y) and the new annotation id.
    """
    w, h = pixels.shape[1], pixels.shape[0]
    for _ in range(max_attempts):
        x, y = sample_fn(rng)
        try:
            updated, pasted, removed = mask_ops.composite_paste(
                masks, patch.mask, (math.floor(x), math.floor(y)), (w, h)
            )
        except EmptyAfterClip:
            continue
        break
    else:
        raise SamplingExhausted(f"no paste position with visible foreground in {max_attempts} tries")

    masks[:] = updated
    for i in reversed(removed):
        del anns[i]
        del masks[i]
    _paint_patch(pixels, patch, math.floor(x), math.floor(y))
    new_ann = AnnotationRecord(
        id=next_id,
        image_id=image_id,
        category_id=patch.category_id,
        bbox=(0.0, 0.0, 0.0, 0.0),  # rebuilt from the mask at stage end
        segmentation=mask_ops.mask_to_rle_segmentation(pasted),
        area=mask_ops.mask_area(pasted),
        iscrowd=0,
    )
    anns.append(new_ann)
    masks.append(pasted)
    return x, y, next_id


def _maybe_recolor_ball(
    patch: ObjectPatch, config: AugmentConfig, rng: np.random.Generator
) -> ObjectPatch:
    if config.pure_ball_palette and rng.random() < config.pure_ball_prob:
        entry = config.pure_ball_palette[int(rng.integers(len(config.pure_ball_palette)))]
        return recolor_pure_ball(patch, entry, rng)
    return patch


def paste_objects(
    pixels: np.ndarray,
    annotations: Sequence[AnnotationRecord],
    bank: Sequence[ObjectPatch],
    view: ViewSide,
    config: AugmentConfig,
    rng: np.random.Generator,
    *,
    image_id: int,
    categories: CategoryPair,
) -> Tuple[np.ndarray, List[AnnotationRecord], List[PasteEvent]]:
    """View-constrained copy-paste of persons and balls onto one image.

    Draws paste counts from the configured ranges, then for every paste
    picks a uniform bank patch of the right category (balls recolored with
    probability ``pure_ball_prob``), samples a location under the view
    constraints and composites it topmost. Occluded annotations are updated
    or dropped; every output annotation carries a recomputed RLE mask, bbox
    and area.
    """
    h, w = pixels.shape[:2]
    n_persons = int(rng.integers(config.persons_per_image[0], config.persons_per_image[1] + 1))
    n_balls = int(rng.integers(config.balls_per_image[0], config.balls_per_image[1] + 1))
    if n_persons == 0 and n_balls == 0:
        return pixels, list(annotations), []

    person_bank = [i for i, p in enumerate(bank) if p.category_id == categories.person]
    ball_bank = [i for i, p in enumerate(bank) if p.category_id == categories.ball]
    if n_persons > 0 and not person_bank:
        raise EmptyBank(f"no person patches (category {categories.person}) in bank")
    if n_balls > 0 and not ball_bank:
        raise EmptyBank(f"no ball patches (category {categories.ball}) in bank")

    pixels = pixels.copy()
    anns = list(annotations)
    masks = _decode_masks(anns, w, h)
    next_id = max((a.id for a in anns), default=0) + 1
    log: List[PasteEvent] = []

    jobs = [(categories.person, person_bank)] * n_persons + [(categories.ball, ball_bank)] * n_balls
    for category_id, pool in jobs:
        bank_index = pool[int(rng.integers(len(pool)))]
        patch = bank[bank_index]
        if category_id == categories.ball:
            patch = _maybe_recolor_ball(patch, config, rng)

        def sample(r, _pw=patch.width, _ph=patch.height):
            return sample_view_paste_location(
                view, w, h, (_pw, _ph), r, max_attempts=config.max_resample_attempts
            )

        x, y, ann_id = _paste_one(
            pixels, anns, masks, patch, sample, rng,
            config.max_resample_attempts, image_id, next_id,
        )
        next_id += 1
        log.append(PasteEvent("view", category_id, bank_index,
                              patch.source_annotation_id, x, y, ann_id))

    anns = [_rebuild_record(a, m) for a, m in zip(anns, masks)]
    return pixels, anns, log


def paste_interaction_balls(
    pixels: np.ndarray,
    annotations: Sequence[AnnotationRecord],
    bank: Sequence[ObjectPatch],
    config: AugmentConfig,
    rng: np.random.Generator,
    *,
    image_id: int,
    categories: CategoryPair,
) -> Tuple[np.ndarray, List[AnnotationRecord], List[PasteEvent]]:
    """Paste one ball inside each of several selected persons' boxes.

    A no-op when the image has no person annotations. Selected person boxes
    are fixed up front; the number of selections is drawn from
    ``interaction_persons`` and clipped to the persons available.
    """
    person_indices = [i for i, a in enumerate(annotations) if a.category_id == categories.person]
    if not person_indices:
        return pixels, list(annotations), []
    k = int(rng.integers(config.interaction_persons[0], config.interaction_persons[1] + 1))
    k = min(k, len(person_indices))
    if k == 0:
        return pixels, list(annotations), []

    ball_bank = [i for i, p in enumerate(bank) if p.category_id == categories.ball]
    if not ball_bank:
        raise EmptyBank(f"no ball patches (category {categories.ball}) in bank")

    chosen = rng.choice(len(person_indices), size=k, replace=False)
    anchor_boxes = []
    for j in chosen:
        bx, by, bw, bh = annotations[person_indices[int(j)]].bbox
        anchor_boxes.append(Box(bx, by, bx + bw, by + bh))

    h, w = pixels.shape[:2]
    pixels = pixels.copy()
    anns = list(annotations)
    masks = _decode_masks(anns, w, h)
    next_id = max((a.id for a in anns), default=0) + 1
    log: List[PasteEvent] = []

    for box in anchor_boxes:
        bank_index = ball_bank[int(rng.integers(len(ball_bank)))]
        patch = _maybe_recolor_ball(bank[bank_index], config, rng)

        def sample(r, _box=box):
            return sample_interaction_location(_box, r)

        x, y, ann_id = _paste_one(
            pixels, anns, masks, patch, sample, rng,
            config.max_resample_attempts, image_id, next_id,
        )
        next_id += 1
        log.append(PasteEvent("interaction", categories.ball, bank_index,
                              patch.source_annotation_id, x, y, ann_id))

    anns = [_rebuild_record(a, m) for a, m in zip(anns, masks)]
    return pixels, anns, log


_GEOMETRIC_KINDS = ("shear", "rotate", "translate")


def _geometric_matrix(
    kind: str, w: int, h: int, config: AugmentConfig, rng: np.random.Generator
) -> np.ndarray:
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    g = config.geometric
    if kind == "rotate":
        angle = float(rng.uniform(*g.rotate_deg))
        return cv2.getRotationMatrix2D((cx, cy), angle, 1.0)
    if kind == "shear":
        axis = int(rng.integers(2))
        s = float(rng.uniform(*g.shear))
        if axis == 0:  # x' = x + s * (y - cy)
            return np.array([[1.0, s, -s * cy], [0.0, 1.0, 0.0]], dtype=np.float64)
        return np.array([[1.0, 0.0, 0.0], [s, 1.0, -s * cx]], dtype=np.float64)
    if kind == "translate":
        dx = float(rng.uniform(*g.translate_frac)) * w
        dy = float(rng.uniform(*g.translate_frac)) * h
        return np.array([[1.0, 0.0, dx], [0.0, 1.0, dy]], dtype=np.float64)
    raise ValueError(f"unknown geometric kind {kind!r}")


def apply_geometric(
    pixels: np.ndarray,
    annotations: Sequence[AnnotationRecord],
    config: AugmentConfig,
    rng: np.random.Generator,
    kind: Optional[str] = None,
) -> Tuple[np.ndarray, List[AnnotationRecord]]:
    """Apply one randomly chosen affine transform to pixels and masks.

    Pixels are warped bilinearly with black border fill, masks with
    nearest-neighbor; bboxes and areas are recomputed and annotations whose
    mask vanished are dropped. ``kind`` forces the transform choice (tests).
    """
    if kind is None:
        kind = _GEOMETRIC_KINDS[int(rng.integers(len(_GEOMETRIC_KINDS)))]
    h, w = pixels.shape[:2]
    m = _geometric_matrix(kind, w, h, config, rng)

    out_pixels = cv2.warpAffine(
        pixels, m, (w, h), flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT, borderValue=(0, 0, 0),
    )
    out_anns: List[AnnotationRecord] = []
    for ann, mask in zip(annotations, _decode_masks(annotations, w, h)):
        warped = cv2.warpAffine(
            mask.astype(np.uint8), m, (w, h), flags=cv2.INTER_NEAREST,
            borderMode=cv2.BORDER_CONSTANT, borderValue=0,
        ).astype(bool)
        if warped.any():
            out_anns.append(_rebuild_record(ann, warped))
    return out_pixels, out_anns


def apply_photometric(
    pixels: np.ndarray, config: AugmentConfig, rng: np.random.Generator
) -> np.ndarray:
    """Brightness, contrast, saturation and hue jitter, in that order.

    Channel math runs in float32 and clamps to [0, 255]; annotations are
    unaffected. Identity parameters reproduce the input exactly.
    """
    p = config.photometric
    delta = float(rng.uniform(*p.brightness_delta))
    contrast = float(rng.uniform(*p.contrast))
    saturation = float(rng.uniform(*p.saturation))
    hue = float(rng.uniform(*p.hue_deg))

    img = pixels.astype(np.float32)
    img = np.clip(img + delta, 0.0, 255.0)
    img = np.clip(img * contrast, 0.0, 255.0)
    if saturation != 1.0 or hue != 0.0:
        hsv = cv2.cvtColor(img / 255.0, cv2.COLOR_RGB2HSV)
        hsv[..., 1] = np.clip(hsv[..., 1] * saturation, 0.0, 1.0)
        hsv[..., 0] = np.mod(hsv[..., 0] + hue, 360.0)
        img = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB) * 255.0
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def compute_resize_scale(width: int, height: int, short_target: int, long_side_max: int) -> float:
    """Isotropic scale hitting the short-side target, capped by the long side."""
    short, long = min(width, height), max(width, height)
    return min(short_target / short, long_side_max / long)


def resize_crop_pad(
    pixels: np.ndarray,
    annotations: Sequence[AnnotationRecord],
    config: AugmentConfig,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, List[AnnotationRecord]]:
    """Random isotropic rescale, then random crop, then pad to the target.

    The short side is drawn from ``resize.short_side``; the scale factor is
    capped so the long side never exceeds ``resize.long_side_max``. The crop
    window is placed uniformly; when the scaled image is smaller than the
    target in a dimension it is padded with black, anchored top-left, to
    exactly ``resize.target``.
    """
    h0, w0 = pixels.shape[:2]
    r = config.resize
    s = int(rng.integers(r.short_side[0], r.short_side[1] + 1))
    scale = compute_resize_scale(w0, h0, s, r.long_side_max)
    new_w, new_h = max(1, round(w0 * scale)), max(1, round(h0 * scale))

    masks = _decode_masks(annotations, w0, h0)
    if (new_w, new_h) != (w0, h0):
        pixels = cv2.resize(pixels, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
        masks = [
            cv2.resize(m.astype(np.uint8), (new_w, new_h),
                       interpolation=cv2.INTER_NEAREST).astype(bool)
            for m in masks
        ]

    tw, th = r.target
    cw, ch = min(new_w, tw), min(new_h, th)
    ox = int(rng.integers(0, new_w - cw + 1))
    oy = int(rng.integers(0, new_h - ch + 1))

    out_pixels = np.zeros((th, tw, 3), dtype=pixels.dtype)
    out_pixels[:ch, :cw] = pixels[oy : oy + ch, ox : ox + cw]
    out_anns: List[AnnotationRecord] = []
    for ann, mask in zip(annotations, masks):
        out_mask = np.zeros((th, tw), dtype=bool)
        out_mask[:ch, :cw] = mask[oy : oy + ch, ox : ox + cw]
        if out_mask.any():
            out_anns.append(_rebuild_record(ann, out_mask))
    return out_pixels, out_anns


def duplicate_dataset(doc: DatasetDoc, factor: int) -> DatasetDoc:
    """Concatenate ``factor`` reindexed copies of every image and annotation.

    File names are preserved, so all copies reference the same pixels; ids
    are shifted per copy to stay unique.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    img_span = max((im.id for im in doc.images), default=0) + 1
    ann_span = max((a.id for a in doc.annotations), default=0) + 1
    images: List[ImageRecord] = []
    annotations: List[AnnotationRecord] = []
    for k in range(factor):
        copy = reindex(doc, k * img_span, k * ann_span)
        images.extend(copy.images)
        annotations.extend(copy.annotations)
    return DatasetDoc(images=tuple(images), annotations=tuple(annotations),
                      categories=doc.categories, extra=dict(doc.extra))


def augment_image(
    pixels: np.ndarray,
    annotations: Sequence[AnnotationRecord],
    image: ImageRecord,
    bank: Sequence[ObjectPatch],
    config: AugmentConfig,
    categories: CategoryPair,
) -> Tuple[np.ndarray, List[AnnotationRecord]]:
    """Full augmentation of one image: pastes, then base transforms.

    Deterministic in (pixels, annotations, bank, config, image.id).
    """
    view = infer_view(image.file_name)
    pixels, anns, _ = paste_objects(
        pixels, annotations, bank, view, config,
        derive_rng(config.seed, image.id, "view_paste"),
        image_id=image.id, categories=categories,
    )
    pixels, anns, _ = paste_interaction_balls(
        pixels, anns, bank, config,
        derive_rng(config.seed, image.id, "interaction_paste"),
        image_id=image.id, categories=categories,
    )
    pixels, anns = apply_geometric(
        pixels, anns, config, derive_rng(config.seed, image.id, "geometric")
    )
    pixels = apply_photometric(
        pixels, config, derive_rng(config.seed, image.id, "photometric")
    )
    return pixels, anns


class ImageDirLoader:
    """Load image pixels for a record from a directory of files (picklable)."""

    def __init__(self, images_dir):
        self.images_dir = Path(images_dir)

    def __call__(self, image: ImageRecord) -> np.ndarray:
        path = self.images_dir / image.file_name
        try:
            with Image.open(path) as im:
                return np.asarray(im.convert("RGB"))
        except OSError as e:
            raise ImageLoadFailure(f"{path}: {e}") from e

    def by_id(self, doc: DatasetDoc) -> Callable[[int], np.ndarray]:
        return lambda image_id: self(doc.image_by_id(image_id))


_WORKER: dict = {}


def _init_worker(loader, bank, config, categories, out_dir):
    _WORKER.update(loader=loader, bank=bank, config=config,
                   categories=categories, out_dir=Path(out_dir))


def _augment_task(args):
    image, anns = args
    loader = _WORKER["loader"]
    pixels = loader(image)
    if pixels.shape[:2] != (image.height, image.width):
        raise ImageLoadFailure(
            f"image {image.id}: declared {image.width}x{image.height}, "
            f"file is {pixels.shape[1]}x{pixels.shape[0]}"
        )
    out_pixels, out_anns = augment_image(
        pixels, anns, image, _WORKER["bank"], _WORKER["config"], _WORKER["categories"]
    )
    file_name = f"{image.id:012d}.png"
    Image.fromarray(out_pixels, mode="RGB").save(_WORKER["out_dir"] / file_name)
    return image.id, file_name, out_anns


def augment_dataset(
    doc: DatasetDoc,
    bank: Sequence[ObjectPatch],
    config: AugmentConfig,
    loader: Callable[[ImageRecord], np.ndarray],
    out_images_dir,
    jobs: int = 1,
) -> DatasetDoc:
    """Duplicate, augment and re-id a whole dataset; writes augmented PNGs.

    Output image files are named by image id, and annotation ids are
    renumbered in (image order, per-image order), so results do not depend
    on worker scheduling: any ``jobs`` value produces identical bytes.
    """
    out_dir = Path(out_images_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    expanded = duplicate_dataset(doc, config.duplication_factor)
    categories = resolve_categories(expanded, config)

    by_image: dict = {im.id: [] for im in expanded.images}
    for ann in expanded.annotations:
        by_image[ann.image_id].append(ann)
    tasks = [(im, by_image[im.id]) for im in expanded.images]

    if jobs <= 1:
        _init_worker(loader, bank, config, categories, out_dir)
        results = [_augment_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_init_worker,
            initargs=(loader, bank, config, categories, out_dir),
        ) as pool:
            results = list(pool.map(_augment_task, tasks, chunksize=1))

    by_id = {image_id: (file_name, anns) for image_id, file_name, anns in results}
    images: List[ImageRecord] = []
    annotations: List[AnnotationRecord] = []
    next_ann_id = 1
    for im in expanded.images:
        file_name, anns = by_id[im.id]
        images.append(ImageRecord(im.id, file_name, im.width, im.height, dict(im.extra)))
        for ann in anns:
            annotations.append(replace(ann, id=next_ann_id))
            next_ann_id += 1
    return DatasetDoc(images=tuple(images), annotations=tuple(annotations),
                      categories=expanded.categories, extra=dict(expanded.extra))
