import numpy as np
import pytest

from courtaug import coco_io, mask_ops
from courtaug.errors import BrokenReference
from courtaug.inference import Detection
from courtaug.metrics import (
    IOU_THRESHOLDS,
    DetInstance,
    GtInstance,
    ap_at_threshold,
    ap_range,
    evaluate,
    match_at_threshold,
)
from courtaug.synthgen import SceneSpec, generate_corpus

from conftest import make_doc, rect_mask


def strip_mask(cols, width=12, height=1):
    m = np.zeros((height, width), dtype=bool)
    m[:, cols[0]:cols[1]] = True
    return m


# --- independent oracle: greedy matching written from the rules ---------------------

def brute_pixel_iou(a, b):
    inter = union = 0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j] and b[i, j]:
                inter += 1
            if a[i, j] or b[i, j]:
                union += 1
    return inter / union if union else 0.0


def oracle_match(gts, dets, threshold):
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = set()
    result = {}
    for di in order:
        best = None
        best_iou = 0.0
        for gi in range(len(gts)):
            if gi in taken:
                continue
            if gts[gi].image_id != dets[di].image_id:
                continue
            if gts[gi].category_id != dets[di].category_id:
                continue
            iou = brute_pixel_iou(gts[gi].mask, dets[di].mask)
            if iou >= threshold and iou > best_iou:
                best, best_iou = gi, iou
        result[di] = best
        if best is not None:
            taken.add(best)
    return result


# --- matching ------------------------------------------------------------------------

def test_match_perfect_pair():
    m = strip_mask((0, 8))
    gts = [GtInstance(1, 1, m)]
    dets = [DetInstance(1, 1, 0.9, m.copy())]
    assert match_at_threshold(gts, dets, 0.5) == [(0, 0)]


def test_match_greedy_prefers_higher_score():
    m = strip_mask((0, 8))
    gts = [GtInstance(1, 1, m)]
    dets = [DetInstance(1, 1, 0.3, m.copy()), DetInstance(1, 1, 0.8, m.copy())]
    matches = dict(match_at_threshold(gts, dets, 0.5))
    assert matches[1] == 0
    assert matches[0] is None


def test_match_respects_category_and_image():
    m = strip_mask((0, 8))
    gts = [GtInstance(1, 1, m), GtInstance(2, 1, m)]
    dets = [DetInstance(1, 2, 0.9, m.copy()), DetInstance(2, 1, 0.8, m.copy())]
    matches = dict(match_at_threshold(gts, dets, 0.5))
    assert matches[0] is None  # wrong category
    assert matches[1] == 1  # right image


def test_match_randomized_vs_oracle():
    rng = np.random.default_rng(17)
    for _ in range(120):
        n_gt = int(rng.integers(0, 5))
        n_det = int(rng.integers(0, 5))
        gts = [GtInstance(int(rng.integers(1, 3)), int(rng.integers(1, 3)),
                          rng.random((6, 6)) < 0.5) for _ in range(n_gt)]
        dets = [DetInstance(int(rng.integers(1, 3)), int(rng.integers(1, 3)),
                            float(rng.random()), rng.random((6, 6)) < 0.5)
                for _ in range(n_det)]
        thr = float(rng.choice([0.1, 0.3, 0.5, 0.75]))
        assert dict(match_at_threshold(gts, dets, thr)) == oracle_match(gts, dets, thr)


# --- ap ------------------------------------------------------------------------------

def test_ap_perfect_single_detection():
    m = strip_mask((0, 8))
    assert ap_at_threshold([GtInstance(1, 1, m)], [DetInstance(1, 1, 0.9, m.copy())], 0.5) == 1.0


def test_ap_no_detections():
    m = strip_mask((0, 8))
    assert ap_at_threshold([GtInstance(1, 1, m)], [], 0.5) == 0.0


def test_ap_no_ground_truth_is_zero():
    m = strip_mask((0, 8))
    assert ap_at_threshold([], [DetInstance(1, 1, 0.9, m)], 0.5) == 0.0


def iou_06_fixture():
    # gt covers columns 0..8, det covers 2..10: intersection 6, union 10
    gt = strip_mask((0, 8), width=12)
    dt = strip_mask((2, 10), width=12)
    assert brute_pixel_iou(gt, dt) == 0.6
    return [GtInstance(1, 1, gt)], [DetInstance(1, 1, 0.9, dt)]


def test_ap_threshold_sweep_at_iou_06():
    gts, dets = iou_06_fixture()
    for thr in (0.50, 0.55, 0.60):
        assert ap_at_threshold(gts, dets, thr) == 1.0
    for thr in (0.65, 0.70, 0.95):
        assert ap_at_threshold(gts, dets, thr) == 0.0


def test_ap_range_of_iou_06_fixture():
    gts, dets = iou_06_fixture()
    assert ap_range(gts, dets) == pytest.approx(0.3, abs=1e-12)


def test_ap_range_is_mean_of_thresholds():
    rng = np.random.default_rng(23)
    gts = [GtInstance(1, 1, rng.random((8, 8)) < 0.5) for _ in range(3)]
    dets = [DetInstance(1, 1, float(rng.random()), rng.random((8, 8)) < 0.5)
            for _ in range(4)]
    expected = np.mean([ap_at_threshold(gts, dets, t) for t in IOU_THRESHOLDS])
    assert ap_range(gts, dets) == pytest.approx(float(expected))


def test_ap_monotone_in_threshold():
    rng = np.random.default_rng(29)
    for _ in range(40):
        gts = [GtInstance(1, 1, rng.random((8, 8)) < 0.5)
               for _ in range(int(rng.integers(1, 4)))]
        dets = [DetInstance(1, 1, float(rng.random()), rng.random((8, 8)) < 0.5)
                for _ in range(int(rng.integers(0, 4)))]
        aps = [ap_at_threshold(gts, dets, t) for t in IOU_THRESHOLDS]
        assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))


def test_dropping_true_positive_never_increases_ap():
    rng = np.random.default_rng(31)
    for _ in range(30):
        gts = [GtInstance(1, 1, rng.random((8, 8)) < 0.5) for _ in range(3)]
        dets = [DetInstance(1, 1, float(rng.random()), rng.random((8, 8)) < 0.5)
                for _ in range(4)]
        full = ap_at_threshold(gts, dets, 0.5)
        matches = dict(match_at_threshold(gts, dets, 0.5))
        tp_indices = [i for i, g in matches.items() if g is not None]
        if not tp_indices:
            continue
        reduced = [d for i, d in enumerate(dets) if i != tp_indices[0]]
        assert ap_at_threshold(gts, reduced, 0.5) <= full + 1e-12


# --- evaluate ------------------------------------------------------------------------

def echo_detections(doc):
    return [
        Detection(a.image_id, a.category_id, 1.0, a.bbox, a.segmentation)
        for a in doc.annotations
    ]


def test_evaluate_echo_is_perfect(tmp_path):
    doc = generate_corpus(4, SceneSpec(width=320, height=240, n_persons=2,
                                       n_balls=1, seed=9), tmp_path)
    result = evaluate(doc, echo_detections(doc))
    assert result.map_overall == 1.0
    for ap in result.per_threshold_ap.values():
        assert ap == 1.0


def test_evaluate_category_without_gt_excluded():
    person = rect_mask(64, 64, 10, 10, 30, 30)
    doc = make_doc(image_dims=((64, 64),), ann_specs=((1, 1, person),))
    result = evaluate(doc, echo_detections(doc))
    # ball category has no gt: not counted in the mean
    assert result.map_overall == 1.0
    assert result.per_category_ap[2] == 0.0


def test_evaluate_broken_reference():
    person = rect_mask(64, 64, 10, 10, 30, 30)
    doc = make_doc(image_dims=((64, 64),), ann_specs=((1, 1, person),))
    stray = Detection(99, 1, 0.9, (0, 0, 5, 5),
                      mask_ops.mask_to_rle_segmentation(person))
    with pytest.raises(BrokenReference):
        evaluate(doc, [stray])


def test_evaluate_crowd_regions_ignored():
    w = h = 64
    crowd_mask = rect_mask(w, h, 0, 0, 32, 32)
    real_mask = rect_mask(w, h, 40, 40, 60, 60)
    doc = make_doc(image_dims=((w, h),), ann_specs=((1, 1, real_mask),))
    crowd = coco_io.AnnotationRecord(
        id=50, image_id=1, category_id=1, bbox=(0.0, 0.0, 32.0, 32.0),
        segmentation=mask_ops.mask_to_rle_segmentation(crowd_mask),
        area=mask_ops.mask_area(crowd_mask), iscrowd=1,
    )
    doc = coco_io.DatasetDoc(images=doc.images,
                             annotations=doc.annotations + (crowd,),
                             categories=doc.categories)
    dets = [
        Detection(1, 1, 0.9, (40, 40, 20, 20), mask_ops.mask_to_rle_segmentation(real_mask)),
        # a detection inside the crowd region: absorbed, not a false positive
        Detection(1, 1, 0.8, (0, 0, 32, 32), mask_ops.mask_to_rle_segmentation(crowd_mask)),
    ]
    result = evaluate(doc, dets)
    assert result.per_category_ap[1] == 1.0
