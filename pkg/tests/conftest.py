import numpy as np
import pytest

from courtaug import coco_io, mask_ops


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {status}: {name}")


def make_doc(image_dims=((1920, 1440),), ann_specs=(), categories=((1, "human"), (2, "ball"))):
    """Small dataset builder: ann_specs are (image_id, category_id, mask)."""
    images = tuple(
        coco_io.ImageRecord(id=i + 1, file_name=f"{i + 1:04d}0_court.png", width=w, height=h)
        for i, (w, h) in enumerate(image_dims)
    )
    cats = tuple(coco_io.CategoryRecord(id=cid, name=name) for cid, name in categories)
    anns = []
    for k, (image_id, category_id, mask) in enumerate(ann_specs):
        box = mask_ops.mask_bbox(mask)
        anns.append(
            coco_io.AnnotationRecord(
                id=k + 1,
                image_id=image_id,
                category_id=category_id,
                bbox=(float(box.x_min), float(box.y_min), float(box.width), float(box.height)),
                segmentation=mask_ops.mask_to_rle_segmentation(mask),
                area=mask_ops.mask_area(mask),
            )
        )
    return coco_io.DatasetDoc(images=images, annotations=tuple(anns), categories=cats)


def rect_mask(w, h, x0, y0, x1, y1):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1, x0:x1] = True
    return m


@pytest.fixture
def small_doc():
    mask = rect_mask(1920, 1440, 100, 500, 160, 700)
    ball = rect_mask(1920, 1440, 900, 800, 925, 825)
    return make_doc(ann_specs=((1, 1, mask), (1, 2, ball)))
