import json

import pytest

from courtaug.config import AugmentConfig, PaletteEntry


def test_defaults_carry_published_constants():
    cfg = AugmentConfig()
    assert cfg.pure_ball_palette[0] == PaletteEntry("brown", (80, 90), (50, 60), (50, 60))
    assert cfg.resize.short_side == (820, 3080)
    assert cfg.resize.long_side_max == 3680
    assert cfg.resize.target == (1920, 1440)
    assert cfg.duplication_factor == 10


def test_round_trip_file(tmp_path):
    cfg = AugmentConfig(seed=42, persons_per_image=(2, 4), pure_ball_prob=0.25)
    cfg.save(tmp_path / "cfg.json")
    assert AugmentConfig.load(tmp_path / "cfg.json") == cfg


def test_partial_file_fills_defaults(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"seed": 9, "duplication_factor": 3}))
    cfg = AugmentConfig.load(tmp_path / "cfg.json")
    assert cfg.seed == 9
    assert cfg.duplication_factor == 3
    assert cfg.persons_per_image == (1, 3)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError):
        AugmentConfig.from_dict({"sneed": 1})


def test_invalid_values_rejected():
    with pytest.raises(ValueError):
        AugmentConfig(pure_ball_prob=1.5)
    with pytest.raises(ValueError):
        AugmentConfig(persons_per_image=(3, 1))
    with pytest.raises(ValueError):
        AugmentConfig(duplication_factor=0)
