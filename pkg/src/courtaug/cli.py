"""Command-line entry points: one subcommand per pipeline stage.

Stages compose through files: COCO JSON datasets, bank directories, results
JSON and crop-transform sidecars. Every successful run writes a
run_manifest.json recording the resolved configuration and seed, so any
output can be reproduced byte-identically.

Exit codes: 0 success, 2 input/validation error, 3 I/O error. Errors are
also emitted on stderr as a single JSON line.
"""

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import __version__, coco_io, inference, metrics, object_bank, synthgen
from .augment import ImageDirLoader, augment_dataset
from .config import AugmentConfig
from .errors import (
    BrokenReference,
    CorruptEntry,
    CourtAugError,
    ImageLoadFailure,
    IoFailure,
    ManifestMissing,
)

SEED_ENV_VAR = "COURTAUG_SEED"

_IO_ERRORS = (ImageLoadFailure, ManifestMissing, CorruptEntry, IoFailure, OSError)


class CliFailure(Exception):
    def __init__(self, exit_code: int, kind: str, message: str):
        super().__init__(message)
        self.exit_code = exit_code
        self.kind = kind


def _fail(exc, exit_code) -> "CliFailure":
    return CliFailure(exit_code, type(exc).__name__, str(exc))


def _resolve_seed(flag_seed, config_seed=None) -> int:
    """Priority: --seed flag, then config file, then COURTAUG_SEED, then 0."""
    if flag_seed is not None:
        return int(flag_seed)
    if config_seed is not None:
        return int(config_seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return 0


def _write_manifest(out_path: Path, subcommand: str, config: dict, seed,
                    inputs: dict, outputs: dict, started: float) -> None:
    manifest = {
        "tool_version": __version__,
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "duration_s": round(time.monotonic() - started, 3),
    }
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_doc(path) -> coco_io.DatasetDoc:
    try:
        return coco_io.load_dataset(path)
    except _IO_ERRORS as e:
        raise _fail(e, 3)
    except CourtAugError as e:
        raise _fail(e, 2)


@click.group()
@click.version_option(__version__)
def main():
    """Dataset augmentation and inference post-processing for court scenes."""


def _run(ctx_name, fn):
    try:
        fn()
    except CliFailure as e:
        sys.stderr.write(json.dumps({"error": e.kind, "message": str(e), "command": ctx_name}) + "\n")
        sys.exit(e.exit_code)
    except _IO_ERRORS as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e), "command": ctx_name}) + "\n")
        sys.exit(3)
    except (CourtAugError, ValueError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e), "command": ctx_name}) + "\n")
        sys.exit(2)


@main.command("synth")
@click.option("--images", "n_images", type=int, required=True, help="Number of scenes.")
@click.option("--seed", type=int, default=None, help="Scene seed.")
@click.option("--width", type=int, default=1920, show_default=True)
@click.option("--height", type=int, default=1440, show_default=True)
@click.option("--persons", type=int, default=3, show_default=True)
@click.option("--balls", type=int, default=1, show_default=True)
@click.option("--occlusion-prob", type=float, default=0.0, show_default=True)
@click.argument("out_dir", type=click.Path(file_okay=False))
def cmd_synth(n_images, seed, width, height, persons, balls, occlusion_prob, out_dir):
    """Generate a synthetic scene corpus with exact ground truth."""
    started = time.monotonic()

    def body():
        resolved_seed = _resolve_seed(seed)
        spec = synthgen.SceneSpec(width=width, height=height, n_persons=persons,
                                  n_balls=balls, seed=resolved_seed,
                                  occlusion_prob=occlusion_prob)
        synthgen.generate_corpus(n_images, spec, out_dir)
        _write_manifest(Path(out_dir) / "run_manifest.json", "synth",
                        {"images": n_images, "width": width, "height": height,
                         "persons": persons, "balls": balls,
                         "occlusion_prob": occlusion_prob},
                        resolved_seed, {}, {"out_dir": out_dir}, started)
        click.echo(f"wrote {n_images} scenes to {out_dir}")

    _run("synth", body)


@main.command("extract-bank")
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("images_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
def cmd_extract_bank(dataset_path, images_dir, out_dir):
    """Crop every annotated object into a reusable patch bank."""
    started = time.monotonic()

    def body():
        doc = _load_doc(dataset_path)
        violations = coco_io.validate_dataset(doc)
        if violations:
            raise CliFailure(2, "ValidationFailed",
                             f"{len(violations)} violations, first: {violations[0]}")
        loader = ImageDirLoader(images_dir)
        patches = object_bank.extract_bank(doc, loader.by_id(doc))
        object_bank.save_bank(patches, out_dir)
        _write_manifest(Path(out_dir) / "run_manifest.json", "extract-bank", {}, None,
                        {"dataset": dataset_path, "images_dir": images_dir},
                        {"bank_dir": out_dir}, started)
        click.echo(f"extracted {len(patches)} patches to {out_dir}")

    _run("extract-bank", body)


@main.command("augment")
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("images_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("bank_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Augmentation config JSON; defaults apply if omitted.")
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel workers.")
def cmd_augment(dataset_path, images_dir, bank_dir, out_dir, config_path, seed, jobs):
    """Duplicate and augment a dataset; writes images plus dataset.json."""
    started = time.monotonic()

    def body():
        config = AugmentConfig.load(config_path) if config_path else AugmentConfig()
        config = config.with_seed(_resolve_seed(seed, config.seed if config_path else None))
        doc = _load_doc(dataset_path)
        bank = object_bank.load_bank(bank_dir)
        out = Path(out_dir)
        images_out = out / "images"
        result = augment_dataset(doc, bank, config, ImageDirLoader(images_dir),
                                 images_out, jobs=jobs)
        violations = coco_io.validate_dataset(result)
        if violations:
            raise CliFailure(2, "ValidationFailed",
                             f"augmented dataset failed validation: {violations[0]}")
        coco_io.save_dataset(result, out / "dataset.json")
        _write_manifest(out / "run_manifest.json", "augment", config.to_dict(), config.seed,
                        {"dataset": dataset_path, "images_dir": images_dir, "bank_dir": bank_dir},
                        {"dataset": out / "dataset.json", "images_dir": images_out}, started)
        click.echo(f"augmented {len(result.images)} images into {out_dir}")

    _run("augment", body)


@main.command("crop")
@click.argument("images_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--fraction", type=float, default=0.2, show_default=True,
              help="Fraction of the height removed from the top.")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Dataset JSON used to key transforms by image id.")
def cmd_crop(images_dir, out_dir, fraction, dataset_path):
    """Crop the top of every image, writing a transforms sidecar."""
    started = time.monotonic()

    def body():
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        id_by_name = {}
        if dataset_path:
            doc = _load_doc(dataset_path)
            id_by_name = {im.file_name: im.id for im in doc.images}
        transforms = {}
        names = sorted(p.name for p in Path(images_dir).iterdir() if p.is_file()
                       and p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
        for i, name in enumerate(names):
            with Image.open(Path(images_dir) / name) as im:
                pixels = np.asarray(im.convert("RGB"))
            cropped, t = inference.crop_top(pixels, fraction)
            Image.fromarray(cropped, mode="RGB").save(out / name)
            transforms[id_by_name.get(name, i)] = t
        inference.save_crop_transforms(transforms, out / "crop_transforms.json")
        _write_manifest(out / "run_manifest.json", "crop", {"fraction": fraction}, None,
                        {"images_dir": images_dir, "dataset": dataset_path or ""},
                        {"out_dir": out_dir}, started)
        click.echo(f"cropped {len(names)} images to {out_dir}")

    _run("crop", body)


@main.command("uncrop")
@click.argument("results_path", type=click.Path(dir_okay=False))
@click.argument("transforms_path", type=click.Path(dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
def cmd_uncrop(results_path, transforms_path, out_path):
    """Invert cropped-frame detections back to original coordinates."""
    started = time.monotonic()

    def body():
        for p in (results_path, transforms_path):
            if not Path(p).is_file():
                raise CliFailure(3, "MissingFile", f"{p} does not exist")
        dets = inference.load_results(results_path)
        transforms = inference.load_crop_transforms(transforms_path)
        out = []
        for det in dets:
            if det.image_id not in transforms:
                raise BrokenReference(f"no crop transform for image {det.image_id}")
            out.extend(inference.uncrop_detections([det], transforms[det.image_id]))
        inference.save_results(out, out_path)
        _write_manifest(Path(out_path).with_suffix(".manifest.json"), "uncrop", {}, None,
                        {"results": results_path, "transforms": transforms_path},
                        {"results": out_path}, started)
        click.echo(f"uncropped {len(out)} detections to {out_path}")

    _run("uncrop", body)


@main.command("filter")
@click.argument("results_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--ball-category", type=int, required=True)
@click.option("--min-dim", type=float, default=10, show_default=True)
@click.option("--max-dim", type=float, default=40, show_default=True)
@click.option("--gate-mode", type=click.Choice(["both", "either"]), default="both",
              show_default=True)
def cmd_filter(results_path, out_path, ball_category, min_dim, max_dim, gate_mode):
    """Apply per-image max-score ball filtering to a results file."""
    started = time.monotonic()

    def body():
        dets = inference.load_results(results_path)
        by_image = {}
        order = []
        for det in dets:
            if det.image_id not in by_image:
                by_image[det.image_id] = []
                order.append(det.image_id)
            by_image[det.image_id].append(det)
        out = []
        for image_id in order:
            out.extend(inference.max_score_filter(
                by_image[image_id], ball_category, min_dim, max_dim, gate_mode))
        inference.save_results(out, out_path)
        _write_manifest(Path(out_path).with_suffix(".manifest.json"), "filter",
                        {"ball_category": ball_category, "min_dim": min_dim,
                         "max_dim": max_dim, "gate_mode": gate_mode}, None,
                        {"results": results_path}, {"results": out_path}, started)
        click.echo(f"kept {len(out)} of {len(dets)} detections")

    _run("filter", body)


@main.command("eval")
@click.argument("gt_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("results_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the result as JSON (plus a run manifest).")
def cmd_eval(gt_path, results_path, out_path):
    """Score detections against ground truth; prints the AP table."""
    started = time.monotonic()

    def body():
        doc = _load_doc(gt_path)
        dets = inference.load_results(results_path)
        result = metrics.evaluate(doc, dets)
        names = {c.id: c.name for c in doc.categories}
        click.echo(result.table(names))
        click.echo(f"mAP@[.50:.95] = {result.map_overall:.3f}")
        if out_path:
            with open(out_path, "w", encoding="utf-8") as f:
                json.dump(result.to_dict(), f, indent=2, sort_keys=True)
                f.write("\n")
            _write_manifest(Path(out_path).with_suffix(".manifest.json"), "eval", {}, None,
                            {"gt": gt_path, "results": results_path},
                            {"report": out_path}, started)

    _run("eval", body)


if __name__ == "__main__":
    main()
