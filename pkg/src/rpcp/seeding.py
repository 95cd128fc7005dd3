"""Stable derivation of per-image and per-event RNG streams."""

import hashlib

import numpy as np


def _hash64(*parts) -> int:
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def image_stream(seed: int, image_id: str, index: int) -> int:
    """64-bit stream id for one image, salted with its position in the sorted dataset."""
    return _hash64("image", seed, index, image_id)


def event_stream(image_stream_id: int, event_index: int) -> int:
    return _hash64("event", image_stream_id, event_index)


def make_rng(stream_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_id))
