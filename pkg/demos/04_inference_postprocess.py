"""
Inference-side processing: crop the auditorium, keep one ball cluster
=====================================================================

Two priors apply at test time. First, the top fifth of every frame is
auditorium, so the image is cropped before the detector runs and the
detections are shifted back afterwards, exactly, with no resampling.
Second, a court holds at most one ball: among size-plausible ball
detections the top score wins and only overlapping boxes survive with it.
"""

from courtaug import mask_ops
from courtaug.inference import (
    Detection,
    ball_size_gate,
    crop_top,
    max_score_filter,
    run_tsip,
    uncrop_detections,
)
from courtaug.synthgen import SceneSpec, generate_scene

spec = SceneSpec(width=1920, height=1440, n_persons=2, n_balls=1, seed=33)
pixels, doc = generate_scene(spec, image_id=1)

cropped, t = crop_top(pixels, 1 / 5)
print(f"cropped {t.original_height} -> {cropped.shape[0]} rows (offset {t.top_offset})")

# A stand-in detector: it "finds" the ground truth in whatever frame it sees.
def fake_detector(frame):
    top = t.original_height - frame.shape[0]
    dets = []
    for ann in doc.annotations:
        full = mask_ops.decode_segmentation(ann.segmentation, 1920, 1440)
        visible = full[top:]
        if not visible.any():
            continue
        box = mask_ops.mask_bbox(visible)
        dets.append(Detection(1, ann.category_id, 0.95,
                              (box.x_min, box.y_min, box.width, box.height),
                              mask_ops.mask_to_rle_segmentation(visible)))
    return dets

dets = fake_detector(cropped)
restored = uncrop_detections(dets, t)
print("bbox y before/after uncropping:",
      [(round(a.bbox[1]), round(b.bbox[1])) for a, b in zip(dets, restored)])

# Size gate: balls outside [10, 40] px on both sides are implausible.
tiny = Detection(1, 2, 0.99, (5, 5, 6, 6))
huge = Detection(1, 2, 0.99, (5, 5, 80, 90))
print("\ngate keeps 6x6 ball?", ball_size_gate(tiny), "| 80x90 ball?", ball_size_gate(huge))

# Max-score filtering: three balls, one cluster survives.
balls = [
    Detection(1, 2, 0.90, (400, 600, 24, 24)),
    Detection(1, 2, 0.55, (410, 610, 24, 24)),   # overlaps the top score
    Detection(1, 2, 0.70, (1500, 900, 24, 24)),  # stray, disjoint
]
kept = max_score_filter(balls, ball_category=2)
print("ball scores in:", [b.score for b in balls], "-> kept:", [b.score for b in kept])

# End to end: crop -> detect -> uncrop -> filter.
final = run_tsip(pixels, fake_detector, 1 / 5, ball_category=2)
print(f"\nrun_tsip produced {len(final)} detections "
      f"({sum(d.category_id == 2 for d in final)} ball)")
