"""Harvest annotated objects into a reusable bank of paste patches.

A bank directory holds one lossless RGB image and one lossless 1-bit mask
image per patch, plus ``bank_manifest.json`` describing every entry with
paths relative to the manifest.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence

import numpy as np
from PIL import Image

from . import mask_ops
from .coco_io import DatasetDoc
from .errors import CorruptEntry, DimensionMismatch, ImageLoadFailure, ManifestMissing

MANIFEST_NAME = "bank_manifest.json"


@dataclass(frozen=True)
class ObjectPatch:
    """A tight crop of one annotated object: pixels plus its mask."""

    category_id: int
    pixels: np.ndarray  # (h, w, 3) uint8
    mask: np.ndarray  # (h, w) bool
    source_image_id: int
    source_annotation_id: int

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class BankEntry:
    patch_file: str
    mask_file: str
    category_id: int
    source_image_id: int
    source_annotation_id: int
    width: int
    height: int


@dataclass(frozen=True)
class BankManifest:
    entries: List[BankEntry] = field(default_factory=list)


def extract_bank(doc: DatasetDoc, image_loader: Callable[[int], np.ndarray]) -> List[ObjectPatch]:
    """Crop every nonzero-area annotation to its mask's tight bbox.

    ``image_loader`` maps an image id to an (h, w, 3) uint8 array; each image
    is loaded once. Patch order follows annotation order in the document.
    """
    cache: Dict[int, np.ndarray] = {}
    patches: List[ObjectPatch] = []
    for ann in doc.annotations:
        im = doc.image_by_id(ann.image_id)
        if im.id not in cache:
            try:
                pixels = np.asarray(image_loader(im.id))
            except Exception as e:
                raise ImageLoadFailure(f"image {im.id} ({im.file_name}): {e}") from e
            if pixels.shape[:2] != (im.height, im.width):
                raise DimensionMismatch(
                    f"image {im.id}: declared {im.width}x{im.height}, "
                    f"loaded {pixels.shape[1]}x{pixels.shape[0]}"
                )
            cache[im.id] = pixels
        pixels = cache[im.id]
        mask = mask_ops.decode_segmentation(ann.segmentation, im.width, im.height)
        box = mask_ops.mask_bbox(mask)
        if box is None:
            continue
        x0, y0, x1, y1 = (int(v) for v in box)
        patches.append(
            ObjectPatch(
                category_id=ann.category_id,
                pixels=np.ascontiguousarray(pixels[y0:y1, x0:x1]),
                mask=np.ascontiguousarray(mask[y0:y1, x0:x1]),
                source_image_id=ann.image_id,
                source_annotation_id=ann.id,
            )
        )
    return patches


def save_bank(patches: Sequence[ObjectPatch], directory) -> BankManifest:
    """Write patches losslessly (PNG) and return the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, patch in enumerate(patches):
        patch_file = f"patch_{i:05d}.png"
        mask_file = f"mask_{i:05d}.png"
        Image.fromarray(patch.pixels, mode="RGB").save(directory / patch_file)
        Image.fromarray(patch.mask.astype(np.uint8) * 255, mode="L").save(directory / mask_file)
        entries.append(
            BankEntry(
                patch_file=patch_file,
                mask_file=mask_file,
                category_id=patch.category_id,
                source_image_id=patch.source_image_id,
                source_annotation_id=patch.source_annotation_id,
                width=patch.width,
                height=patch.height,
            )
        )
    manifest = BankManifest(entries=entries)
    payload = {"entries": [dict(vars(e)) for e in entries]}
    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    return manifest


def load_bank(directory) -> List[ObjectPatch]:
    """Load a saved bank; round-trips save_bank bit-exactly."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ManifestMissing(f"no {MANIFEST_NAME} in {directory}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    patches = []
    for raw in payload.get("entries", []):
        entry = BankEntry(**raw)
        try:
            pixels = np.asarray(Image.open(directory / entry.patch_file).convert("RGB"))
            mask = np.asarray(Image.open(directory / entry.mask_file).convert("L")) > 127
        except Exception as e:
            raise CorruptEntry(f"entry {entry.patch_file}: {e}") from e
        if pixels.shape[:2] != (entry.height, entry.width) or mask.shape != (entry.height, entry.width):
            raise CorruptEntry(
                f"entry {entry.patch_file}: decoded dimensions disagree with manifest"
            )
        patches.append(
            ObjectPatch(
                category_id=entry.category_id,
                pixels=pixels,
                mask=mask,
                source_image_id=entry.source_image_id,
                source_annotation_id=entry.source_annotation_id,
            )
        )
    return patches
