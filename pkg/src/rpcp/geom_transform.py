"""Random rotation and scaling of patches.

Angles are in degrees, counter-clockwise as the image is displayed (row 0 on
top), so theta=90 matches ``np.rot90(..., k=1)``.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from rpcp.errors import TransformCollapse
from rpcp.patch_bank import Patch


@dataclass(frozen=True)
class AugParams:
    """One paste event: placement (x, y), scale s, rotation theta, and provenance."""

    s: float
    theta: float
    patch_ref: int
    x: Optional[int] = None
    y: Optional[int] = None
    rng_stream: Optional[int] = None

    def placed(self, x: int, y: int) -> "AugParams":
        return replace(self, x=int(x), y=int(y))


def sample_params(rng: np.random.Generator, config, bank_size: int) -> AugParams:
    """Draw patch index, scale and angle, in that order, from rng."""
    if bank_size < 1:
        raise ValueError("cannot sample from an empty patch bank")
    patch_ref = int(rng.integers(bank_size))
    s_min, s_max = config.scale_range
    t_min, t_max = config.rotation_range
    s = float(rng.uniform(s_min, s_max)) if s_max > s_min else float(s_min)
    theta = float(rng.uniform(t_min, t_max)) if t_max > t_min else float(t_min)
    return AugParams(s=s, theta=theta, patch_ref=patch_ref)


def _right_angle_turns(theta: float) -> Optional[int]:
    q = (theta % 360.0) / 90.0
    k = round(q)
    return k % 4 if abs(q - k) < 1e-12 else None


def _bilinear(rgb: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample rgb at fractional pixel-index coordinates, clamping at the edges."""
    h, w = rgb.shape[:2]
    rows = np.clip(rows, 0.0, h - 1.0)
    cols = np.clip(cols, 0.0, w - 1.0)
    r0 = np.minimum(np.floor(rows).astype(np.intp), h - 1)
    c0 = np.minimum(np.floor(cols).astype(np.intp), w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[..., None]
    fc = (cols - c0)[..., None]
    top = rgb[r0, c0] * (1.0 - fc) + rgb[r0, c1] * fc
    bottom = rgb[r1, c0] * (1.0 - fc) + rgb[r1, c1] * fc
    out = top * (1.0 - fr) + bottom * fr
    return np.clip(out, 0.0, 1.0)


def _tight_crop(patch: Patch, rgb: np.ndarray, mask: np.ndarray) -> Patch:
    if not mask.any():
        raise TransformCollapse("transform left the patch mask empty")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    return replace(patch, rgb=np.ascontiguousarray(rgb[r0:r1, c0:c1]), mask=np.ascontiguousarray(mask[r0:r1, c0:c1]))


def transform_patch(patch: Patch, s: float, theta: float) -> Patch:
    """Scale by s and rotate by theta about the patch centre, then crop tight to the mask.

    RGB is resampled bilinearly and the mask by nearest neighbour. Right-angle
    rotations at s=1 are exact pixel permutations.
    """
    if not s > 0:
        raise ValueError(f"scale must be > 0, got {s}")
    turns = _right_angle_turns(theta)
    if s == 1.0 and turns is not None:
        rgb = np.rot90(patch.rgb, turns)
        mask = np.rot90(patch.mask, turns)
        return _tight_crop(patch, rgb, mask)

    h, w = patch.mask.shape
    t = math.radians(theta)
    cos_t, sin_t = math.cos(t), math.sin(t)
    out_w = max(1, math.ceil(s * (w * abs(cos_t) + h * abs(sin_t)) - 1e-9))
    out_h = max(1, math.ceil(s * (w * abs(sin_t) + h * abs(cos_t)) - 1e-9))

    # centre offsets of output pixel centres, mapped back through the inverse rotation
    px = np.arange(out_w) + 0.5 - out_w / 2.0
    py = np.arange(out_h) + 0.5 - out_h / 2.0
    PX, PY = np.meshgrid(px, py)
    src_x = (PX * cos_t - PY * sin_t) / s + w / 2.0
    src_y = (PX * sin_t + PY * cos_t) / s + h / 2.0

    ci = np.floor(src_x).astype(np.intp)
    ri = np.floor(src_y).astype(np.intp)
    inside = (ci >= 0) & (ci < w) & (ri >= 0) & (ri < h)
    mask = np.zeros((out_h, out_w), dtype=bool)
    mask[inside] = patch.mask[ri[inside], ci[inside]]

    rgb = _bilinear(patch.rgb, src_y - 0.5, src_x - 0.5)
    return _tight_crop(patch, rgb, mask)
