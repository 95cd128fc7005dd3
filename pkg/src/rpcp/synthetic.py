"""Deterministic toy leaf dataset: healthy tissue, lesion ellipses, insect-damage specks.

Used by the test suite and handy for trying the CLI:

    python -m rpcp.synthetic --out toy --count 10 --size 256 --seed 42
"""

import argparse
from pathlib import Path

import numpy as np

from rpcp.dataset_io import write_pair

HEALTHY, LESION, DAMAGE = 0, 1, 2

_COLOURS = {
    HEALTHY: (0.30, 0.55, 0.20),
    LESION: (0.45, 0.33, 0.18),
    DAMAGE: (0.80, 0.78, 0.55),
}


def _blob(rng, label, cls, cy, cx, ry, rx, jitter=0.0):
    H, W = label.shape
    y0, y1 = max(int(cy - ry) - 1, 0), min(int(cy + ry) + 2, H)
    x0, x1 = max(int(cx - rx) - 1, 0), min(int(cx + rx) + 2, W)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
    if jitter:
        d = d + rng.uniform(-jitter, jitter, size=d.shape)
    region = label[y0:y1, x0:x1]
    region[(d <= 1.0) & (region == HEALTHY)] = cls


def make_pair(rng: np.random.Generator, size: int = 256, damage_blobs: int = 2):
    """One (image, label) pair; most of the leaf stays healthy."""
    label = np.full((size, size), HEALTHY, dtype=np.uint8)
    unit = size / 256.0
    for _ in range(int(rng.integers(1, 4))):
        _blob(rng, label, LESION, rng.uniform(0, size), rng.uniform(0, size),
              rng.uniform(8, 24) * unit, rng.uniform(8, 24) * unit)
    for _ in range(damage_blobs):
        _blob(rng, label, DAMAGE, rng.uniform(0, size), rng.uniform(0, size),
              rng.uniform(2.5, 7) * unit, rng.uniform(2.5, 7) * unit, jitter=0.4)

    palette = np.array([_COLOURS[c] for c in (HEALTHY, LESION, DAMAGE)])
    image = palette[label]
    # low-frequency shading plus pixel noise
    ramp = np.linspace(-0.06, 0.06, size)
    image = image + ramp[:, None, None] * rng.uniform(-1, 1) + ramp[None, :, None] * rng.uniform(-1, 1)
    image = image + rng.normal(0.0, 0.03, size=image.shape)
    return np.clip(image, 0.0, 1.0), label


def write_dataset(out_dir, count: int = 10, size: int = 256, seed: int = 42):
    """Write images/ and masks/ under out_dir. Every third image has no damage."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    dirs = (out_dir / "images", out_dir / "masks")
    for i in range(count):
        image, label = make_pair(rng, size, damage_blobs=0 if i % 3 == 2 else int(rng.integers(1, 4)))
        write_pair(image, label, dirs, f"leaf_{i:03d}")
    return dirs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)
    images, masks = write_dataset(args.out, args.count, args.size, args.seed)
    print(f"wrote {args.count} pairs to {images} and {masks}")


if __name__ == "__main__":
    main()
