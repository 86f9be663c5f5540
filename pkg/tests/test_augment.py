import math

import numpy as np
import pytest

from courtaug import coco_io, mask_ops, object_bank
from courtaug.augment import (
    CategoryPair,
    ViewSide,
    apply_geometric,
    apply_photometric,
    augment_image,
    compute_resize_scale,
    duplicate_dataset,
    infer_view,
    paste_interaction_balls,
    paste_objects,
    recolor_pure_ball,
    resize_crop_pad,
    resolve_categories,
    sample_interaction_location,
    sample_view_paste_location,
)
from courtaug.config import (
    AugmentConfig,
    GeometricConfig,
    PaletteEntry,
    PhotometricConfig,
    ResizeConfig,
    identity_photometric,
)
from courtaug.errors import EmptyBank, SamplingExhausted
from courtaug.mask_ops import Box
from courtaug.object_bank import ObjectPatch
from courtaug.rng import derive_rng
from courtaug.synthgen import SceneSpec, generate_scene

from conftest import make_doc, rect_mask

CATS = CategoryPair(person=1, ball=2)
BROWN = PaletteEntry("brown", (80, 90), (50, 60), (50, 60))


def rng(n=0):
    return np.random.default_rng(n)


def ball_patch(d=12, seed=1):
    gen = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:d, 0:d]
    mask = (xs + 0.5 - d / 2) ** 2 + (ys + 0.5 - d / 2) ** 2 <= (d / 2) ** 2
    pixels = gen.integers(0, 256, size=(d, d, 3), dtype=np.uint8)
    pixels[~mask] = 0
    return ObjectPatch(category_id=2, pixels=pixels, mask=mask,
                       source_image_id=1, source_annotation_id=1)


def person_patch(w=20, h=50, seed=2):
    gen = np.random.default_rng(seed)
    mask = np.ones((h, w), dtype=bool)
    pixels = gen.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    return ObjectPatch(category_id=1, pixels=pixels, mask=mask,
                       source_image_id=1, source_annotation_id=2)


# --- view inference -------------------------------------------------------------

def test_infer_view_right_prefix():
    assert infer_view("1640_03_02.png") is ViewSide.RIGHT


def test_infer_view_left_prefix():
    assert infer_view("1641_03_02.png") is ViewSide.LEFT


def test_infer_view_default_left():
    assert infer_view("a.png") is ViewSide.LEFT


def test_infer_view_no_underscore():
    assert infer_view("500.png") is ViewSide.RIGHT
    assert infer_view("501.png") is ViewSide.LEFT


# --- location samplers ----------------------------------------------------------

def test_view_sampler_right_bounds():
    gen = rng(1)
    for _ in range(2000):
        x, y = sample_view_paste_location(ViewSide.RIGHT, 1920, 1440, (12, 12), gen)
        assert 384.0 <= x <= 1920.0
        assert 432.0 <= y <= 1008.0


def test_view_sampler_left_bounds():
    gen = rng(2)
    for _ in range(2000):
        x, y = sample_view_paste_location(ViewSide.LEFT, 1920, 1440, (12, 12), gen)
        assert 0.0 <= x <= 1536.0
        assert 432.0 <= y <= 1008.0


def test_view_sampler_exhaustion():
    # canvas of width 1: right-view interval is [0.2, 1.0]; floor(x) is almost
    # always >= 1 only when x == 1.0, so visibility passes; force failure with
    # an impossible canvas instead
    class AlwaysMax:
        def uniform(self, lo, hi):
            return hi

    with pytest.raises(SamplingExhausted):
        sample_view_paste_location(ViewSide.RIGHT, 10, 10, (3, 3), AlwaysMax(), max_attempts=5)


def test_interaction_sampler_bounds():
    box = Box(100, 200, 150, 400)
    gen = rng(3)
    for _ in range(2000):
        x, y = sample_interaction_location(box, gen)
        assert 100.0 <= x <= 150.0
        assert 200.0 <= y <= 400.0


def test_interaction_sampler_degenerate_width():
    box = Box(120, 200, 120, 300)
    gen = rng(4)
    for _ in range(50):
        x, _ = sample_interaction_location(box, gen)
        assert x == 120.0


# --- pure-ball recoloring --------------------------------------------------------

def test_recolor_pure_ball_channel_ranges():
    patch = ball_patch()
    out = recolor_pure_ball(patch, BROWN, rng(5))
    masked = out.pixels[out.mask]
    assert masked[:, 0].min() >= 80 and masked[:, 0].max() <= 90
    assert masked[:, 1].min() >= 50 and masked[:, 1].max() <= 60
    assert masked[:, 2].min() >= 50 and masked[:, 2].max() <= 60
    # one flat color per patch
    assert len(np.unique(masked, axis=0)) == 1


def test_recolor_mask_unchanged():
    patch = ball_patch()
    out = recolor_pure_ball(patch, BROWN, rng(6))
    assert np.array_equal(patch.mask, out.mask)


def test_recolor_unmasked_pixels_unchanged():
    patch = ball_patch()
    out = recolor_pure_ball(patch, BROWN, rng(7))
    assert np.array_equal(out.pixels[~out.mask], patch.pixels[~patch.mask])
    assert out.pixels[0, 0].tolist() == patch.pixels[0, 0].tolist()


# --- paste stages ----------------------------------------------------------------

def zero_paste_config():
    return AugmentConfig(persons_per_image=(0, 0), balls_per_image=(0, 0),
                         interaction_persons=(0, 0))


def scene_640():
    spec = SceneSpec(width=640, height=480, n_persons=2, n_balls=1, seed=3)
    return generate_scene(spec, image_id=1)


def test_paste_objects_zero_counts_identity():
    pixels, doc = scene_640()
    out_px, out_anns, log = paste_objects(
        pixels, list(doc.annotations), [ball_patch()], ViewSide.RIGHT,
        zero_paste_config(), rng(8), image_id=1, categories=CATS,
    )
    assert np.array_equal(out_px, pixels)
    assert out_anns == list(doc.annotations)
    assert log == []


def test_paste_one_ball_on_empty_scene_respects_constraints():
    cfg = AugmentConfig(persons_per_image=(0, 0), balls_per_image=(1, 1), pure_ball_prob=0.0)
    w, h = 1920, 1440
    pixels = np.zeros((h, w, 3), dtype=np.uint8)
    for seed in range(40):
        out_px, out_anns, log = paste_objects(
            pixels, [], [ball_patch()], ViewSide.RIGHT, cfg, rng(seed),
            image_id=1, categories=CATS,
        )
        assert len(out_anns) == 1
        assert len(log) == 1
        x, y = out_anns[0].bbox[0], out_anns[0].bbox[1]
        assert w / 5 <= log[0].x_min <= w
        assert h / 2 - h / 5 <= log[0].y_min <= h / 2 + h / 5
        # annotation anchor equals the floored sampled anchor while on canvas
        assert x == math.floor(log[0].x_min)
        assert y == math.floor(log[0].y_min)


def test_paste_full_occlusion_removes_annotation():
    w, h = 200, 200
    # left-view anchors satisfy x <= 160, y <= 140, so a 200x200 patch always
    # covers columns >= 160 and rows >= 140; put the square there
    small = rect_mask(w, h, 170, 150, 174, 154)
    doc = make_doc(image_dims=((w, h),), ann_specs=((1, 1, small),))
    pixels = np.zeros((h, w, 3), dtype=np.uint8)
    big = ObjectPatch(category_id=1, pixels=np.zeros((200, 200, 3), dtype=np.uint8),
                      mask=np.ones((200, 200), dtype=bool),
                      source_image_id=9, source_annotation_id=9)
    cfg = AugmentConfig(persons_per_image=(1, 1), balls_per_image=(0, 0))
    for seed in range(10):
        out_px, out_anns, log = paste_objects(
            pixels, list(doc.annotations), [big], ViewSide.LEFT, cfg, rng(seed),
            image_id=1, categories=CATS,
        )
        ids = [a.id for a in out_anns]
        assert doc.annotations[0].id not in ids
        assert len(out_anns) == 1  # only the pasted person survives


def test_paste_objects_empty_bank():
    pixels = np.zeros((100, 100, 3), dtype=np.uint8)
    cfg = AugmentConfig(persons_per_image=(1, 1), balls_per_image=(0, 0))
    with pytest.raises(EmptyBank):
        paste_objects(pixels, [], [ball_patch()], ViewSide.LEFT, cfg, rng(1),
                      image_id=1, categories=CATS)


def test_paste_interaction_no_persons_is_noop():
    pixels = np.zeros((100, 100, 3), dtype=np.uint8)
    out_px, out_anns, log = paste_interaction_balls(
        pixels, [], [ball_patch()], AugmentConfig(), rng(2), image_id=1, categories=CATS,
    )
    assert np.array_equal(out_px, pixels) and out_anns == [] and log == []


def test_paste_interaction_ball_lands_in_person_box():
    w, h = 1920, 1440
    person = rect_mask(w, h, 100, 200, 150, 400)
    doc = make_doc(ann_specs=((1, 1, person),))
    pixels = np.zeros((h, w, 3), dtype=np.uint8)
    cfg = AugmentConfig(interaction_persons=(1, 1), pure_ball_prob=0.0)
    for seed in range(30):
        out_px, out_anns, log = paste_interaction_balls(
            pixels, list(doc.annotations), [ball_patch()], cfg, rng(seed),
            image_id=1, categories=CATS,
        )
        assert len(log) == 1
        assert 100.0 <= log[0].x_min <= 150.0
        assert 200.0 <= log[0].y_min <= 400.0
        balls = [a for a in out_anns if a.category_id == 2]
        assert len(balls) == 1
        assert balls[0].bbox[0] == math.floor(log[0].x_min)
        assert balls[0].bbox[1] == math.floor(log[0].y_min)


def test_paste_interaction_deterministic_log():
    pixels, doc = scene_640()
    cfg = AugmentConfig(interaction_persons=(1, 2))
    a = paste_interaction_balls(pixels, list(doc.annotations), [ball_patch()], cfg,
                                derive_rng(5, 1, "x"), image_id=1, categories=CATS)
    b = paste_interaction_balls(pixels, list(doc.annotations), [ball_patch()], cfg,
                                derive_rng(5, 1, "x"), image_id=1, categories=CATS)
    assert a[2] == b[2]
    assert a[1] == b[1]


def test_paste_interaction_empty_ball_bank():
    pixels, doc = scene_640()
    cfg = AugmentConfig(interaction_persons=(1, 1))
    with pytest.raises(EmptyBank):
        paste_interaction_balls(pixels, list(doc.annotations), [person_patch()], cfg,
                                rng(1), image_id=1, categories=CATS)


def test_paste_occlusion_disjointness():
    pixels, doc = scene_640()
    bank = [ball_patch(), person_patch()]
    cfg = AugmentConfig(persons_per_image=(2, 2), balls_per_image=(1, 1))
    out_px, out_anns, log = paste_objects(
        pixels, list(doc.annotations), bank, ViewSide.RIGHT, cfg, rng(17),
        image_id=1, categories=CATS,
    )
    masks = [mask_ops.decode_segmentation(a.segmentation, 640, 480) for a in out_anns]
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            assert not (masks[i] & masks[j]).any()


# --- geometric -------------------------------------------------------------------

def test_geometric_translate_zero_identity():
    pixels, doc = scene_640()
    cfg = AugmentConfig(geometric=GeometricConfig(translate_frac=(0.0, 0.0)))
    out_px, out_anns = apply_geometric(pixels, list(doc.annotations), cfg, rng(1),
                                       kind="translate")
    assert np.array_equal(out_px, pixels)
    for before, after in zip(doc.annotations, out_anns):
        m0 = mask_ops.decode_segmentation(before.segmentation, 640, 480)
        m1 = mask_ops.decode_segmentation(after.segmentation, 640, 480)
        assert np.array_equal(m0, m1)


def test_geometric_rotate_90_preserves_area():
    w = h = 400
    square = rect_mask(w, h, 150, 150, 250, 250)
    doc = make_doc(image_dims=((w, h),), ann_specs=((1, 1, square),))
    pixels = np.zeros((h, w, 3), dtype=np.uint8)
    cfg = AugmentConfig(geometric=GeometricConfig(rotate_deg=(90.0, 90.0)))
    _, out_anns = apply_geometric(pixels, list(doc.annotations), cfg, rng(2), kind="rotate")
    assert len(out_anns) == 1
    area0 = doc.annotations[0].area
    assert abs(out_anns[0].area - area0) <= 0.02 * area0


def test_geometric_bbox_consistency_any_transform():
    pixels, doc = scene_640()
    for seed in range(6):
        _, out_anns = apply_geometric(pixels, list(doc.annotations), AugmentConfig(), rng(seed))
        for ann in out_anns:
            mask = mask_ops.decode_segmentation(ann.segmentation, 640, 480)
            box = mask_ops.mask_bbox(mask)
            assert ann.bbox == (box.x_min, box.y_min, box.width, box.height)
            assert ann.area == mask_ops.mask_area(mask)


# --- photometric -----------------------------------------------------------------

def test_photometric_identity_parameters():
    pixels, _ = scene_640()
    cfg = AugmentConfig(photometric=identity_photometric())
    out = apply_photometric(pixels, cfg, rng(3))
    assert np.array_equal(out, pixels)


def test_photometric_brightness_additive():
    gray = np.full((10, 10, 3), 100, dtype=np.uint8)
    cfg = AugmentConfig(photometric=PhotometricConfig(
        brightness_delta=(10.0, 10.0), contrast=(1.0, 1.0),
        saturation=(1.0, 1.0), hue_deg=(0.0, 0.0)))
    out = apply_photometric(gray, cfg, rng(4))
    assert (out == 110).all()


def test_photometric_output_in_range_fuzz():
    gen = rng(5)
    pixels = gen.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    for seed in range(40):
        out = apply_photometric(pixels, AugmentConfig(), rng(seed))
        assert out.dtype == np.uint8
        assert out.min() >= 0 and out.max() <= 255


# --- resize-crop-pad -------------------------------------------------------------

def test_resize_crop_pad_fixed_point():
    pixels, doc = generate_scene(SceneSpec(seed=4), image_id=1)  # 1920x1440
    cfg = AugmentConfig(resize=ResizeConfig(short_side=(1440, 1440)))
    out_px, out_anns = resize_crop_pad(pixels, list(doc.annotations), cfg, rng(6))
    assert np.array_equal(out_px, pixels)
    assert [a.area for a in out_anns] == [a.area for a in doc.annotations]


def test_resize_crop_pad_always_target_dims():
    gen = rng(7)
    for seed in range(8):
        w = int(gen.integers(200, 900))
        h = int(gen.integers(200, 900))
        pixels = np.zeros((h, w, 3), dtype=np.uint8)
        cfg = AugmentConfig(resize=ResizeConfig(short_side=(300, 2000), target=(1920, 1440)))
        out_px, _ = resize_crop_pad(pixels, [], cfg, rng(seed))
        assert out_px.shape == (1440, 1920, 3)


def test_resize_scale_long_side_cap_fuzz():
    gen = rng(8)
    for _ in range(1000):
        w = int(gen.integers(100, 4000))
        h = int(gen.integers(100, 4000))
        s = int(gen.integers(820, 3081))
        scale = compute_resize_scale(w, h, s, 3680)
        assert round(max(w, h) * scale) <= 3680


def test_resize_crop_pad_masks_consistent():
    pixels, doc = scene_640()
    cfg = AugmentConfig(resize=ResizeConfig(short_side=(900, 1200), target=(800, 600)))
    out_px, out_anns = resize_crop_pad(pixels, list(doc.annotations), cfg, rng(9))
    assert out_px.shape == (600, 800, 3)
    for ann in out_anns:
        mask = mask_ops.decode_segmentation(ann.segmentation, 800, 600)
        box = mask_ops.mask_bbox(mask)
        assert ann.bbox == (box.x_min, box.y_min, box.width, box.height)
        assert ann.area == mask_ops.mask_area(mask) > 0


# --- duplication -----------------------------------------------------------------

def test_duplicate_factor_one_identity(small_doc):
    assert duplicate_dataset(small_doc, 1) == small_doc


def test_duplicate_246_images_by_10():
    mask = rect_mask(32, 32, 2, 2, 6, 6)
    doc = make_doc(image_dims=tuple((32, 32) for _ in range(246)),
                   ann_specs=tuple((i + 1, 1, mask) for i in range(246)))
    out = duplicate_dataset(doc, 10)
    assert len(out.images) == 2460
    assert len(out.annotations) == 2460
    assert coco_io.validate_dataset(out) == []
    # file names preserved: copies reference the same pixels
    names = {im.file_name for im in out.images}
    assert names == {im.file_name for im in doc.images}


def test_duplicate_annotation_count_scales(small_doc):
    for factor in (2, 5):
        out = duplicate_dataset(small_doc, factor)
        assert len(out.annotations) == factor * len(small_doc.annotations)
        assert len({a.id for a in out.annotations}) == len(out.annotations)


# --- full pipeline ---------------------------------------------------------------

def test_augment_image_degenerate_equals_base_transform():
    pixels, doc = scene_640()
    cfg = AugmentConfig(seed=5, persons_per_image=(0, 0), balls_per_image=(0, 0),
                        interaction_persons=(0, 0))
    out_px, out_anns = augment_image(pixels, list(doc.annotations), doc.images[0],
                                     [], cfg, CATS)
    # same thing by hand: geometric then photometric with the same streams
    px2, anns2 = apply_geometric(pixels, list(doc.annotations), cfg,
                                 derive_rng(cfg.seed, doc.images[0].id, "geometric"))
    px2 = apply_photometric(px2, cfg, derive_rng(cfg.seed, doc.images[0].id, "photometric"))
    assert np.array_equal(out_px, px2)
    assert out_anns == anns2


def test_augment_image_deterministic():
    pixels, doc = scene_640()
    bank = object_bank.extract_bank(doc, lambda image_id: pixels)
    cfg = AugmentConfig(seed=9)
    a = augment_image(pixels, list(doc.annotations), doc.images[0], bank, cfg, CATS)
    b = augment_image(pixels, list(doc.annotations), doc.images[0], bank, cfg, CATS)
    assert np.array_equal(a[0], b[0])
    assert a[1] == b[1]
    for x, y in zip(a[1], b[1]):
        assert x.segmentation["counts"] == y.segmentation["counts"]


def test_augment_image_output_validates():
    pixels, doc = scene_640()
    bank = object_bank.extract_bank(doc, lambda image_id: pixels)
    cfg = AugmentConfig(seed=10)
    out_px, out_anns = augment_image(pixels, list(doc.annotations), doc.images[0],
                                     bank, cfg, CATS)
    wrapped = coco_io.DatasetDoc(images=doc.images, annotations=tuple(out_anns),
                                 categories=doc.categories)
    assert coco_io.validate_dataset(wrapped) == []


def test_resolve_categories(small_doc):
    pair = resolve_categories(small_doc, AugmentConfig())
    assert pair == CategoryPair(person=1, ball=2)
