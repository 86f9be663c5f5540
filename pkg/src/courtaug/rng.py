"""Deterministic random-stream derivation.

Every random decision in the toolkit comes from a generator derived from
(seed, image_id, stage). Two streams built from the same key produce the
same sequence, which is what makes parallel and serial batch runs
byte-identical.
"""

import hashlib

import numpy as np


def _stage_key(stage: str) -> int:
    # Stable across processes and runs, unlike hash().
    digest = hashlib.blake2b(stage.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_rng(seed: int, image_id: int, stage: str) -> np.random.Generator:
    """Return a PCG64 generator keyed on (seed, image_id, stage)."""
    ss = np.random.SeedSequence(
        [int(seed) & 0xFFFFFFFFFFFFFFFF, int(image_id) & 0xFFFFFFFFFFFFFFFF, _stage_key(stage)]
    )
    return np.random.Generator(np.random.PCG64(ss))
