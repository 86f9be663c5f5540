"""COCO-style annotation documents: parsing, validation, serialization.

The document model mirrors the standard COCO instance-segmentation layout
(``images``, ``annotations``, ``categories``). Unknown keys, top-level and
per-record, are carried through opaquely so third-party files survive a
round trip. Serialization is deterministic: the same document always
produces the same bytes.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from . import mask_ops
from .errors import BrokenReference, GeometryError, IdOverflow, MalformedDocument

_ID_MAX = 2**63 - 1

# 1e-6 slack for float bboxes; masks are integer-grid so areas compare exactly.
BBOX_TOL = 1e-6


@dataclass(frozen=True)
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class CategoryRecord:
    id: int
    name: str
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AnnotationRecord:
    id: int
    image_id: int
    category_id: int
    bbox: Tuple[float, float, float, float]
    segmentation: Union[list, dict]
    area: float
    iscrowd: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))


@dataclass(frozen=True)
class DatasetDoc:
    images: Tuple[ImageRecord, ...]
    annotations: Tuple[AnnotationRecord, ...]
    categories: Tuple[CategoryRecord, ...]
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(self, "categories", tuple(self.categories))

    def image_by_id(self, image_id: int) -> ImageRecord:
        try:
            return self._image_index[image_id]
        except KeyError:
            raise BrokenReference(f"no image with id {image_id}")

    @property
    def _image_index(self) -> Dict[int, ImageRecord]:
        idx = self.__dict__.get("_image_index_cache")
        if idx is None:
            idx = {im.id: im for im in self.images}
            self.__dict__["_image_index_cache"] = idx
        return idx


@dataclass(frozen=True)
class Violation:
    rule: str
    record: str
    record_id: Optional[int]
    message: str


def _require(cond: bool, exc_cls, msg: str):
    if not cond:
        raise exc_cls(msg)


def _pick(raw: dict, known: Sequence[str]) -> Dict[str, Any]:
    return {k: raw[k] for k in raw if k not in known}


def parse_dataset(raw: Union[bytes, str]) -> DatasetDoc:
    """Parse a COCO-style JSON document.

    Raises MalformedDocument for structural problems (invalid JSON, missing
    arrays, bad field types, duplicate ids), BrokenReference for dangling
    image/category ids, GeometryError for negative bbox extents.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"not valid JSON: {e}") from e
    _require(isinstance(data, dict), MalformedDocument, "top-level value must be an object")
    for key in ("images", "annotations", "categories"):
        _require(isinstance(data.get(key), list), MalformedDocument, f"missing '{key}' array")

    images = []
    for raw_im in data["images"]:
        try:
            rec = ImageRecord(
                id=int(raw_im["id"]),
                file_name=str(raw_im["file_name"]),
                width=int(raw_im["width"]),
                height=int(raw_im["height"]),
                extra=_pick(raw_im, ("id", "file_name", "width", "height")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedDocument(f"bad image record: {e}") from e
        if rec.width < 1 or rec.height < 1:
            raise GeometryError(f"image {rec.id}: non-positive dimensions")
        images.append(rec)

    categories = []
    for raw_cat in data["categories"]:
        try:
            categories.append(
                CategoryRecord(
                    id=int(raw_cat["id"]),
                    name=str(raw_cat["name"]),
                    extra=_pick(raw_cat, ("id", "name")),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedDocument(f"bad category record: {e}") from e

    image_ids = {im.id for im in images}
    category_ids = {c.id for c in categories}
    _require(len(image_ids) == len(images), MalformedDocument, "duplicate image ids")
    _require(len(category_ids) == len(categories), MalformedDocument, "duplicate category ids")

    annotations = []
    known = ("id", "image_id", "category_id", "bbox", "segmentation", "area", "iscrowd")
    for raw_ann in data["annotations"]:
        try:
            rec = AnnotationRecord(
                id=int(raw_ann["id"]),
                image_id=int(raw_ann["image_id"]),
                category_id=int(raw_ann["category_id"]),
                bbox=tuple(float(v) for v in raw_ann["bbox"]),
                segmentation=raw_ann["segmentation"],
                area=raw_ann["area"],
                iscrowd=int(raw_ann.get("iscrowd", 0)),
                extra=_pick(raw_ann, known),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedDocument(f"bad annotation record: {e}") from e
        if len(rec.bbox) != 4:
            raise MalformedDocument(f"annotation {rec.id}: bbox must have 4 entries")
        if rec.bbox[2] < 0 or rec.bbox[3] < 0:
            raise GeometryError(f"annotation {rec.id}: negative bbox size")
        if rec.image_id not in image_ids:
            raise BrokenReference(f"annotation {rec.id}: image {rec.image_id} not found")
        if rec.category_id not in category_ids:
            raise BrokenReference(f"annotation {rec.id}: category {rec.category_id} not found")
        annotations.append(rec)

    ann_ids = {a.id for a in annotations}
    _require(len(ann_ids) == len(annotations), MalformedDocument, "duplicate annotation ids")

    extra = _pick(data, ("images", "annotations", "categories"))
    return DatasetDoc(images=tuple(images), annotations=tuple(annotations),
                      categories=tuple(categories), extra=extra)


def _image_payload(im: ImageRecord) -> dict:
    out = {"id": im.id, "file_name": im.file_name, "width": im.width, "height": im.height}
    out.update({k: im.extra[k] for k in sorted(im.extra)})
    return out


def _category_payload(c: CategoryRecord) -> dict:
    out = {"id": c.id, "name": c.name}
    out.update({k: c.extra[k] for k in sorted(c.extra)})
    return out


def _annotation_payload(a: AnnotationRecord) -> dict:
    out = {
        "id": a.id,
        "image_id": a.image_id,
        "category_id": a.category_id,
        "bbox": list(a.bbox),
        "segmentation": a.segmentation,
        "area": a.area,
        "iscrowd": a.iscrowd,
    }
    out.update({k: a.extra[k] for k in sorted(a.extra)})
    return out


def serialize_dataset(doc: DatasetDoc) -> bytes:
    """Deterministic UTF-8 JSON bytes; parse(serialize(doc)) == doc."""
    payload = {
        "images": [_image_payload(im) for im in doc.images],
        "annotations": [_annotation_payload(a) for a in doc.annotations],
        "categories": [_category_payload(c) for c in doc.categories],
    }
    payload.update({k: doc.extra[k] for k in sorted(doc.extra)})
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def load_dataset(path) -> DatasetDoc:
    with open(path, "rb") as f:
        return parse_dataset(f.read())


def save_dataset(doc: DatasetDoc, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize_dataset(doc))


def validate_dataset(doc: DatasetDoc) -> List[Violation]:
    """Check every document invariant; returns violations, never raises.

    Rules reported: duplicate ids, dangling references, image geometry, bbox
    extent and bounds (1e-6 slack), decodable segmentation, positive area,
    and area equal to the decoded mask's pixel count.
    """
    out: List[Violation] = []

    def bad(rule, record, record_id, message):
        out.append(Violation(rule, record, record_id, message))

    seen = set()
    for im in doc.images:
        if im.id in seen:
            bad("id.duplicate", "image", im.id, "duplicate image id")
        seen.add(im.id)
        if im.width < 1 or im.height < 1:
            bad("image.dimensions", "image", im.id, f"{im.width}x{im.height}")

    seen = set()
    for c in doc.categories:
        if c.id in seen:
            bad("id.duplicate", "category", c.id, "duplicate category id")
        seen.add(c.id)

    image_index = {im.id: im for im in doc.images}
    category_ids = {c.id for c in doc.categories}
    seen = set()
    for a in doc.annotations:
        if a.id in seen:
            bad("id.duplicate", "annotation", a.id, "duplicate annotation id")
        seen.add(a.id)
        if a.image_id not in image_index:
            bad("ref.image", "annotation", a.id, f"image {a.image_id} not found")
            continue
        if a.category_id not in category_ids:
            bad("ref.category", "annotation", a.id, f"category {a.category_id} not found")
        im = image_index[a.image_id]
        x, y, w, h = a.bbox
        if w < 0 or h < 0:
            bad("bbox.extent", "annotation", a.id, f"negative size ({w}, {h})")
            continue
        if x < -BBOX_TOL or y < -BBOX_TOL or x + w > im.width + BBOX_TOL or y + h > im.height + BBOX_TOL:
            bad("bbox.bounds", "annotation", a.id,
                f"bbox {a.bbox} outside image {im.width}x{im.height}")
        if a.iscrowd not in (0, 1):
            bad("iscrowd.flag", "annotation", a.id, f"iscrowd={a.iscrowd}")
        try:
            mask = mask_ops.decode_segmentation(a.segmentation, im.width, im.height)
        except Exception as e:  # undecodable segmentation is a violation, not a crash
            bad("segmentation.invalid", "annotation", a.id, str(e))
            continue
        pixels = mask_ops.mask_area(mask)
        if not a.area > 0:
            bad("area.positive", "annotation", a.id, f"area={a.area}")
        elif pixels != a.area:
            bad("area.mismatch", "annotation", a.id,
                f"area field {a.area} != mask pixel count {pixels}")
    return out


def reindex(doc: DatasetDoc, image_id_offset: int, annotation_id_offset: int) -> DatasetDoc:
    """Shift all image and annotation ids; category ids are left alone."""
    if image_id_offset < 0 or annotation_id_offset < 0:
        raise ValueError("offsets must be >= 0")
    for im in doc.images:
        if im.id + image_id_offset > _ID_MAX:
            raise IdOverflow(f"image id {im.id} + {image_id_offset} overflows")
    for a in doc.annotations:
        if a.id + annotation_id_offset > _ID_MAX:
            raise IdOverflow(f"annotation id {a.id} + {annotation_id_offset} overflows")

    images = tuple(
        ImageRecord(im.id + image_id_offset, im.file_name, im.width, im.height, dict(im.extra))
        for im in doc.images
    )
    annotations = tuple(
        AnnotationRecord(
            id=a.id + annotation_id_offset,
            image_id=a.image_id + image_id_offset,
            category_id=a.category_id,
            bbox=a.bbox,
            segmentation=a.segmentation,
            area=a.area,
            iscrowd=a.iscrowd,
            extra=dict(a.extra),
        )
        for a in doc.annotations
    )
    return DatasetDoc(images=images, annotations=annotations,
                      categories=doc.categories, extra=dict(doc.extra))
