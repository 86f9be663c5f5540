import math

import numpy as np
import pytest

from courtaug import coco_io, mask_ops, object_bank
from courtaug.augment import ViewSide, infer_view
from courtaug.inference import Detection
from courtaug.metrics import evaluate
from courtaug.synthgen import SceneSpec, generate_corpus, generate_scene


def test_empty_scene():
    pixels, doc = generate_scene(SceneSpec(width=320, height=240, n_persons=0,
                                           n_balls=0, seed=1))
    assert pixels.shape == (240, 320, 3)
    assert doc.annotations == ()
    # auditorium band occupies the top fifth with a distinct color
    assert not np.array_equal(pixels[0, 0], pixels[-1, -1])
    assert (pixels[: 240 // 5] == pixels[0, 0]).all()


def test_ball_area_close_to_analytic():
    # large frame so the ball is big enough for the 2% bound
    spec = SceneSpec(width=1920, height=1440, n_persons=0, n_balls=1, seed=2)
    pixels, doc = generate_scene(spec)
    assert len(doc.annotations) == 1
    ann = doc.annotations[0]
    # radius back from the bbox: the tight box spans ~2r in both dimensions
    r = (ann.bbox[2] + ann.bbox[3]) / 4.0
    analytic = math.pi * r * r
    assert abs(ann.area - analytic) <= 0.02 * analytic


def test_scene_deterministic():
    spec = SceneSpec(width=320, height=240, n_persons=3, n_balls=1, seed=5,
                     occlusion_prob=0.5)
    a_px, a_doc = generate_scene(spec, image_id=4)
    b_px, b_doc = generate_scene(spec, image_id=4)
    assert np.array_equal(a_px, b_px)
    assert a_doc == b_doc


def test_scene_masks_are_exact_and_valid():
    spec = SceneSpec(width=480, height=360, n_persons=3, n_balls=1, seed=6,
                     occlusion_prob=0.8)
    pixels, doc = generate_scene(spec)
    assert coco_io.validate_dataset(doc) == []
    for ann in doc.annotations:
        mask = mask_ops.decode_segmentation(ann.segmentation, 480, 360)
        box = mask_ops.mask_bbox(mask)
        assert ann.bbox == (box.x_min, box.y_min, box.width, box.height)


def test_person_centers_follow_court_band():
    # persons' mask centers must lie near the central band; verify y extent
    spec = SceneSpec(width=1920, height=1440, n_persons=4, n_balls=0, seed=7)
    pixels, doc = generate_scene(spec)
    for ann in doc.annotations:
        y_center = ann.bbox[1] + ann.bbox[3] / 2
        # body center drawn in [h/2 - h/5, h/2 + h/5]; head shifts the mask
        # center up by less than a quarter of the body height
        assert 1440 / 2 - 1440 / 5 - ann.bbox[3] / 2 <= y_center <= 1440 / 2 + 1440 / 5 + 1


def test_corpus_basics(tmp_path):
    spec = SceneSpec(width=320, height=240, n_persons=2, n_balls=1, seed=8)
    doc = generate_corpus(10, spec, tmp_path)
    assert len(doc.images) == 10
    assert coco_io.validate_dataset(doc) == []
    for im in doc.images:
        assert (tmp_path / im.file_name).is_file()
    assert (tmp_path / "dataset.json").is_file()
    assert coco_io.load_dataset(tmp_path / "dataset.json") == doc


def test_corpus_views_alternate_and_match_names(tmp_path):
    spec = SceneSpec(width=320, height=240, n_persons=1, n_balls=0, seed=9)
    doc = generate_corpus(6, spec, tmp_path)
    views = [infer_view(im.file_name) for im in doc.images]
    assert views == [ViewSide.RIGHT, ViewSide.LEFT] * 3


def test_corpus_bank_cardinality(tmp_path):
    spec = SceneSpec(width=320, height=240, n_persons=2, n_balls=1, seed=10)
    doc = generate_corpus(5, spec, tmp_path)
    from courtaug.augment import ImageDirLoader

    loader = ImageDirLoader(tmp_path)
    bank = object_bank.extract_bank(doc, loader.by_id(doc))
    assert len(bank) == len(doc.annotations)


def test_corpus_self_evaluates_to_one(tmp_path):
    spec = SceneSpec(width=320, height=240, n_persons=2, n_balls=1, seed=11)
    doc = generate_corpus(4, spec, tmp_path)
    dets = [Detection(a.image_id, a.category_id, 1.0, a.bbox, a.segmentation)
            for a in doc.annotations]
    assert evaluate(doc, dets).map_overall == 1.0


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(n_balls=2)
    with pytest.raises(ValueError):
        SceneSpec(occlusion_prob=1.5)
