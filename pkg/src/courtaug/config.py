"""Augmentation configuration: every pipeline tunable plus the seed.

The on-disk form is a flat JSON document whose top-level keys are exactly
the field names below; nested groups (geometric, photometric, resize) are
objects. Ranges are two-element ``[lo, hi]`` lists, inclusive on both ends.
"""

import json
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Tuple


class PaletteEntry(NamedTuple):
    """A flat recolor target: per-channel inclusive integer ranges."""

    name: str
    r: Tuple[int, int]
    g: Tuple[int, int]
    b: Tuple[int, int]


@dataclass(frozen=True)
class GeometricConfig:
    rotate_deg: Tuple[float, float] = (-10.0, 10.0)
    shear: Tuple[float, float] = (-0.1, 0.1)
    translate_frac: Tuple[float, float] = (-0.1, 0.1)


@dataclass(frozen=True)
class PhotometricConfig:
    brightness_delta: Tuple[float, float] = (-32.0, 32.0)
    contrast: Tuple[float, float] = (0.5, 1.5)
    saturation: Tuple[float, float] = (0.5, 1.5)
    hue_deg: Tuple[float, float] = (-18.0, 18.0)


@dataclass(frozen=True)
class ResizeConfig:
    short_side: Tuple[int, int] = (820, 3080)
    long_side_max: int = 3680
    target: Tuple[int, int] = (1920, 1440)  # (width, height)


@dataclass(frozen=True)
class AugmentConfig:
    seed: int = 0
    persons_per_image: Tuple[int, int] = (1, 3)
    balls_per_image: Tuple[int, int] = (1, 2)
    interaction_persons: Tuple[int, int] = (1, 2)
    pure_ball_prob: float = 0.5
    pure_ball_palette: Tuple[PaletteEntry, ...] = (
        PaletteEntry("brown", (80, 90), (50, 60), (50, 60)),
    )
    geometric: GeometricConfig = field(default_factory=GeometricConfig)
    photometric: PhotometricConfig = field(default_factory=PhotometricConfig)
    resize: ResizeConfig = field(default_factory=ResizeConfig)
    duplication_factor: int = 10
    max_resample_attempts: int = 25
    person_category: str = "human"
    ball_category: str = "ball"

    def __post_init__(self):
        for name in ("persons_per_image", "balls_per_image", "interaction_persons"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name}: invalid range ({lo}, {hi})")
        if not 0.0 <= self.pure_ball_prob <= 1.0:
            raise ValueError(f"pure_ball_prob must be in [0, 1], got {self.pure_ball_prob}")
        if self.duplication_factor < 1:
            raise ValueError("duplication_factor must be >= 1")
        if self.max_resample_attempts < 1:
            raise ValueError("max_resample_attempts must be >= 1")
        lo, hi = self.resize.short_side
        if lo > hi or lo < 1:
            raise ValueError(f"resize.short_side: invalid range ({lo}, {hi})")
        for entry in self.pure_ball_palette:
            for channel in (entry.r, entry.g, entry.b):
                if channel[0] > channel[1]:
                    raise ValueError(f"palette entry '{entry.name}': empty channel range")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pure_ball_palette"] = [
            {"name": e.name, "r": list(e.r), "g": list(e.g), "b": list(e.b)}
            for e in self.pure_ball_palette
        ]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentConfig":
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")

        def pair(v):
            return (v[0], v[1])

        kwargs = {}
        for name in ("seed", "pure_ball_prob", "duplication_factor",
                     "max_resample_attempts", "person_category", "ball_category"):
            if name in data:
                kwargs[name] = data[name]
        for name in ("persons_per_image", "balls_per_image", "interaction_persons"):
            if name in data:
                kwargs[name] = pair(data[name])
        if "pure_ball_palette" in data:
            kwargs["pure_ball_palette"] = tuple(
                PaletteEntry(e["name"], pair(e["r"]), pair(e["g"]), pair(e["b"]))
                for e in data["pure_ball_palette"]
            )
        if "geometric" in data:
            g = data["geometric"]
            kwargs["geometric"] = GeometricConfig(
                rotate_deg=pair(g.get("rotate_deg", (-10.0, 10.0))),
                shear=pair(g.get("shear", (-0.1, 0.1))),
                translate_frac=pair(g.get("translate_frac", (-0.1, 0.1))),
            )
        if "photometric" in data:
            p = data["photometric"]
            kwargs["photometric"] = PhotometricConfig(
                brightness_delta=pair(p.get("brightness_delta", (-32.0, 32.0))),
                contrast=pair(p.get("contrast", (0.5, 1.5))),
                saturation=pair(p.get("saturation", (0.5, 1.5))),
                hue_deg=pair(p.get("hue_deg", (-18.0, 18.0))),
            )
        if "resize" in data:
            r = data["resize"]
            kwargs["resize"] = ResizeConfig(
                short_side=pair(r.get("short_side", (820, 3080))),
                long_side_max=int(r.get("long_side_max", 3680)),
                target=pair(r.get("target", (1920, 1440))),
            )
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "AugmentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    def with_seed(self, seed: int) -> "AugmentConfig":
        return replace(self, seed=int(seed))


def identity_photometric() -> PhotometricConfig:
    """Parameter ranges that make apply_photometric a no-op (test hook)."""
    return PhotometricConfig(
        brightness_delta=(0.0, 0.0), contrast=(1.0, 1.0),
        saturation=(1.0, 1.0), hue_deg=(0.0, 0.0),
    )
