"""
The augmentation pipeline, stage by stage
=========================================

The camera prior drives paste placement. With image width w and height h:

    right view:  w/5 <= x_min <= w
    left view:   0   <= x_min <= w - w/5
    both views:  h/2 - h/5 <= y_min <= h/2 + h/5

so pasted objects land on the visible court, never in the auditorium. Balls
are additionally pasted inside selected persons' boxes to rehearse
man-ball interaction, and recolored to a flat "pure ball" color with some
probability. Finally each image gets one geometric transform and a
photometric distortion chain.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from courtaug import duplicate_dataset, extract_bank
from courtaug.augment import (
    ImageDirLoader,
    augment_image,
    infer_view,
    paste_interaction_balls,
    paste_objects,
    resolve_categories,
)
from courtaug.config import AugmentConfig
from courtaug.rng import derive_rng
from courtaug.synthgen import SceneSpec, generate_corpus

scenes = Path("demo_output/scenes")
out_dir = Path("demo_output/augmented")
out_dir.mkdir(parents=True, exist_ok=True)

spec = SceneSpec(width=960, height=720, n_persons=3, n_balls=1, seed=7)
doc = generate_corpus(8, spec, scenes)
loader = ImageDirLoader(scenes)
bank = extract_bank(doc, loader.by_id(doc))

config = AugmentConfig(seed=2022)
cats = resolve_categories(doc, config)

image = doc.images[0]
pixels = loader(image)
anns = [a for a in doc.annotations if a.image_id == image.id]
view = infer_view(image.file_name)
print(f"augmenting {image.file_name} ({view.value} view), {len(anns)} objects")

# Stage 1: view-constrained pastes. The log records each anchor.
px, anns1, log = paste_objects(pixels, anns, bank, view, config,
                               derive_rng(config.seed, image.id, "view_paste"),
                               image_id=image.id, categories=cats)
w, h = image.width, image.height
print(f"\npasted {len(log)} objects under the view constraint "
      f"(x in [{w / 5:.0f}, {w}], y in [{h / 2 - h / 5:.0f}, {h / 2 + h / 5:.0f}]):")
for event in log:
    print(f"  category={event.category_id} anchor=({event.x_min:7.1f}, {event.y_min:7.1f})")

# Stage 2: interaction pastes put a ball inside a person's box.
px, anns2, ilog = paste_interaction_balls(px, anns1, bank, config,
                                          derive_rng(config.seed, image.id, "interaction_paste"),
                                          image_id=image.id, categories=cats)
print(f"\ninteraction pastes: {len(ilog)} (each anchored inside a person bbox)")

# The whole pipeline in one call: identical rng derivation, so this is
# reproducible run to run and across parallel workers.
full_px, full_anns = augment_image(loader(image), anns, image, bank, config, cats)
again_px, _ = augment_image(loader(image), anns, image, bank, config, cats)
assert np.array_equal(full_px, again_px)
print(f"\naugment_image: {len(anns)} -> {len(full_anns)} annotations, deterministic")

Image.fromarray(full_px, mode="RGB").save(out_dir / "augmented_example.png")
print("wrote", out_dir / "augmented_example.png")

# Dataset duplication multiplies the corpus before augmentation; each copy
# gets fresh ids and will draw different random streams downstream.
big = duplicate_dataset(doc, 10)
print(f"\nduplicated {len(doc.images)} -> {len(big.images)} images "
      f"({len(big.annotations)} annotations)")
