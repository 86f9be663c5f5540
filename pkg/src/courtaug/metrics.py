"""Mask-IoU average precision at desk scale.

AP follows the COCO convention: greedy score-ordered matching per image,
101-point interpolated precision-recall area, thresholds 0.50:0.05:0.95
averaged per category, then categories (with at least one ground truth)
averaged into the overall number. Crowd ground truths are "ignore" regions:
they are never matchable targets and detections overlapping them are
excluded rather than counted as false positives.
"""

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import mask_ops
from .coco_io import DatasetDoc
from .errors import BrokenReference, DimensionMismatch
from .inference import Detection

IOU_THRESHOLDS = tuple(t / 100.0 for t in range(50, 100, 5))
_RECALL_POINTS = np.linspace(0.0, 1.0, 101)


class GtInstance(NamedTuple):
    image_id: int
    category_id: int
    mask: np.ndarray


class DetInstance(NamedTuple):
    image_id: int
    category_id: int
    score: float
    mask: np.ndarray


@dataclass(frozen=True)
class EvalResult:
    per_category_ap: Dict[int, float]
    per_threshold_ap: Dict[Tuple[int, float], float]
    map_overall: float

    def to_dict(self) -> dict:
        return {
            "map_overall": self.map_overall,
            "per_category_ap": {str(k): v for k, v in sorted(self.per_category_ap.items())},
            "per_threshold_ap": {
                f"{cat}@{thr:.2f}": ap
                for (cat, thr), ap in sorted(self.per_threshold_ap.items())
            },
        }

    def table(self, category_names: Optional[Dict[int, str]] = None) -> str:
        names = category_names or {}
        lines = [f"{'category':<16} {'AP@[.50:.95]':>12}"]
        for cat, ap in sorted(self.per_category_ap.items()):
            label = names.get(cat, str(cat))
            lines.append(f"{label:<16} {ap:>12.3f}")
        lines.append(f"{'mAP':<16} {self.map_overall:>12.3f}")
        return "\n".join(lines)


def match_at_threshold(
    gts: Sequence[GtInstance],
    dets: Sequence[DetInstance],
    iou_threshold: float,
) -> List[Tuple[int, Optional[int]]]:
    """Greedy score-ordered matching of detections to ground truths.

    Detections are processed in descending score (ties by input index) and
    matched within their image to the unmatched same-category ground truth
    of highest mask IoU >= threshold (IoU ties go to the lower gt index).
    Returns (det index, gt index or None) pairs in processing order.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched_gt: set = set()
    results: List[Tuple[int, Optional[int]]] = []
    iou_cache: Dict[Tuple[int, int], float] = {}

    for di in order:
        det = dets[di]
        best_gt, best_iou = None, 0.0
        for gi, gt in enumerate(gts):
            if gi in matched_gt:
                continue
            if gt.image_id != det.image_id or gt.category_id != det.category_id:
                continue
            key = (di, gi)
            if key not in iou_cache:
                if gt.mask.shape != det.mask.shape:
                    raise DimensionMismatch(
                        f"gt {gi} and det {di} masks differ: {gt.mask.shape} vs {det.mask.shape}"
                    )
                iou_cache[key] = mask_ops.mask_iou(det.mask, gt.mask)
            iou = iou_cache[key]
            if iou >= iou_threshold and iou > best_iou:
                best_gt, best_iou = gi, iou
        if best_gt is not None:
            matched_gt.add(best_gt)
        results.append((di, best_gt))
    return results


def _interpolated_ap(tp_flags: Sequence[bool], n_gt: int) -> float:
    """101-point interpolated AP from score-ordered true-positive flags."""
    if n_gt == 0:
        return 0.0
    if not tp_flags:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
    fp = np.cumsum(~np.asarray(tp_flags, dtype=bool))
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1e-12)
    # precision envelope: best precision at any recall >= r
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    for r in _RECALL_POINTS:
        idx = np.searchsorted(recall, r, side="left")
        ap += envelope[idx] if idx < len(envelope) else 0.0
    return float(ap / _RECALL_POINTS.size)


def ap_at_threshold(
    gts: Sequence[GtInstance],
    dets: Sequence[DetInstance],
    iou_threshold: float,
    ignore: Sequence[GtInstance] = (),
) -> float:
    """AP at one mask-IoU threshold; 0.0 when there are no ground truths.

    ``ignore`` regions (crowds) absorb detections that would otherwise be
    false positives: an unmatched detection overlapping an ignore region of
    its category at >= threshold is excluded from the curve.
    """
    if not gts:
        return 0.0
    matches = dict(match_at_threshold(gts, dets, iou_threshold))
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    tp_flags: List[bool] = []
    for di in order:
        if matches.get(di) is not None:
            tp_flags.append(True)
            continue
        det = dets[di]
        absorbed = any(
            ig.image_id == det.image_id
            and ig.category_id == det.category_id
            and mask_ops.mask_iou(det.mask, ig.mask) >= iou_threshold
            for ig in ignore
        )
        if not absorbed:
            tp_flags.append(False)
    return _interpolated_ap(tp_flags, len(gts))


def ap_range(
    gts: Sequence[GtInstance],
    dets: Sequence[DetInstance],
    ignore: Sequence[GtInstance] = (),
) -> float:
    """Mean AP over the ten thresholds 0.50, 0.55, ..., 0.95."""
    aps = [ap_at_threshold(gts, dets, t, ignore) for t in IOU_THRESHOLDS]
    return float(np.mean(aps))


def evaluate(gt_doc: DatasetDoc, results: Sequence[Detection]) -> EvalResult:
    """Score a detections list against ground truth, per category.

    Detections must reference images present in the document; their masks
    must be in the image frame. Categories with no ground truth are
    excluded from the overall mean.
    """
    gt_by_cat: Dict[int, List[GtInstance]] = {c.id: [] for c in gt_doc.categories}
    ignore_by_cat: Dict[int, List[GtInstance]] = {c.id: [] for c in gt_doc.categories}
    for ann in gt_doc.annotations:
        im = gt_doc.image_by_id(ann.image_id)
        mask = mask_ops.decode_segmentation(ann.segmentation, im.width, im.height)
        inst = GtInstance(ann.image_id, ann.category_id, mask)
        if ann.iscrowd:
            ignore_by_cat.setdefault(ann.category_id, []).append(inst)
        else:
            gt_by_cat.setdefault(ann.category_id, []).append(inst)

    det_by_cat: Dict[int, List[DetInstance]] = {c.id: [] for c in gt_doc.categories}
    for det in results:
        im = gt_doc.image_by_id(det.image_id)  # raises BrokenReference
        if det.segmentation is None:
            raise BrokenReference(f"detection on image {det.image_id} has no segmentation")
        mask = mask_ops.decode_segmentation(det.segmentation, im.width, im.height)
        det_by_cat.setdefault(det.category_id, []).append(
            DetInstance(det.image_id, det.category_id, float(det.score), mask)
        )

    per_threshold: Dict[Tuple[int, float], float] = {}
    per_category: Dict[int, float] = {}
    scored_categories = []
    for cat in sorted(gt_by_cat):
        gts = gt_by_cat[cat]
        dets = det_by_cat.get(cat, [])
        for thr in IOU_THRESHOLDS:
            per_threshold[(cat, thr)] = ap_at_threshold(gts, dets, thr, ignore_by_cat.get(cat, ()))
        per_category[cat] = float(np.mean([per_threshold[(cat, t)] for t in IOU_THRESHOLDS]))
        if gts:
            scored_categories.append(cat)

    overall = float(np.mean([per_category[c] for c in scored_categories])) if scored_categories else 0.0
    return EvalResult(per_category_ap=per_category, per_threshold_ap=per_threshold,
                      map_overall=overall)
