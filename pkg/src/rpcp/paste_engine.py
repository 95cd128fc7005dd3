"""Constrained placement and mask compositing of patches into target images."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from rpcp.errors import TransformCollapse
from rpcp.geom_transform import AugParams, sample_params, transform_patch
from rpcp.patch_bank import Patch, PatchBank


@dataclass(frozen=True)
class PlacementConstraints:
    valid_class: int
    margin: int = 0
    max_attempts: int = 100

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    @classmethod
    def from_config(cls, config) -> "PlacementConstraints":
        return cls(config.class_scheme.valid_class, config.margin, config.max_attempts)


@dataclass
class PasteEvent:
    """Outcome of one paste round. full_mask is None unless the round succeeded."""

    params: AugParams
    success: bool
    attempts: int = 0
    area: int = 0
    reason: str = ""
    full_mask: Optional[np.ndarray] = field(default=None, repr=False)

    def to_record(self) -> dict:
        p = self.params
        return {
            "patch_ref": p.patch_ref,
            "x": p.x,
            "y": p.y,
            "s": p.s,
            "theta": p.theta,
            "rng_stream": p.rng_stream,
            "success": self.success,
            "attempts": self.attempts,
            "mask_area": self.area,
            "reason": self.reason,
        }


def _footprint(patch: Patch, margin: int) -> np.ndarray:
    """The patch mask grown by margin pixels (square neighbourhood); shape (h+2m, w+2m)."""
    if margin == 0:
        return patch.mask
    padded = np.pad(patch.mask, margin)
    return ndimage.binary_dilation(padded, structure=np.ones((2 * margin + 1,) * 2, dtype=bool))


def _footprint_ok(target_label: np.ndarray, footprint: np.ndarray, x: int, y: int, margin: int, valid_class: int) -> bool:
    H, W = target_label.shape
    fy0, fx0 = y - margin, x - margin
    y0, x0 = max(fy0, 0), max(fx0, 0)
    y1, x1 = min(fy0 + footprint.shape[0], H), min(fx0 + footprint.shape[1], W)
    fp = footprint[y0 - fy0:y1 - fy0, x0 - fx0:x1 - fx0]
    window = target_label[y0:y1, x0:x1]
    return bool(np.all(window[fp] == valid_class))


def is_valid_placement(target_label: np.ndarray, patch: Patch, x: int, y: int, c: PlacementConstraints) -> bool:
    """Box fully in bounds and every (margin-grown) mask pixel lands on valid_class."""
    H, W = target_label.shape
    if x < 0 or y < 0 or x + patch.width > W or y + patch.height > H:
        return False
    return _footprint_ok(target_label, _footprint(patch, c.margin), x, y, c.margin, c.valid_class)


def find_placement(
    rng: np.random.Generator,
    target_label: np.ndarray,
    patch: Patch,
    c: PlacementConstraints,
) -> Tuple[Optional[Tuple[int, int]], int]:
    """Rejection-sample a top-left (x, y) uniformly over in-bounds positions.

    Returns ((x, y) or None, attempts used). A patch larger than the target
    uses no attempts.
    """
    H, W = target_label.shape
    nx, ny = W - patch.width + 1, H - patch.height + 1
    if nx < 1 or ny < 1:
        return None, 0
    footprint = _footprint(patch, c.margin)
    for attempt in range(1, c.max_attempts + 1):
        x = int(rng.integers(nx))
        y = int(rng.integers(ny))
        if _footprint_ok(target_label, footprint, x, y, c.margin, c.valid_class):
            return (x, y), attempt
    return None, c.max_attempts


def _composite_inplace(image, label, patch: Patch, x: int, y: int) -> np.ndarray:
    H, W = label.shape
    full_mask = np.zeros((H, W), dtype=bool)
    full_mask[y:y + patch.height, x:x + patch.width] = patch.mask
    img_view = image[y:y + patch.height, x:x + patch.width]
    lbl_view = label[y:y + patch.height, x:x + patch.width]
    img_view[patch.mask] = patch.rgb[patch.mask]
    lbl_view[patch.mask] = patch.class_id
    return full_mask


def composite(
    image: np.ndarray,
    label: np.ndarray,
    patch: Patch,
    x: int,
    y: int,
    constraints: Optional[PlacementConstraints] = None,
):
    """I' = M*P + (1-M)*I and Y' = M*Y_P + (1-M)*Y with M the patch mask placed at (x, y).

    Returns new (image, label, full_mask); the inputs are not modified.
    """
    H, W = label.shape
    if x < 0 or y < 0 or x + patch.width > W or y + patch.height > H:
        raise ValueError(f"patch {patch.width}x{patch.height} at ({x}, {y}) leaves the {W}x{H} image")
    if constraints is not None and not is_valid_placement(label, patch, x, y, constraints):
        raise ValueError(f"placement ({x}, {y}) violates the paste constraints")
    image, label = image.copy(), label.copy()
    full_mask = _composite_inplace(image, label, patch, x, y)
    return image, label, full_mask


def paste_k(
    rng: np.random.Generator,
    image: np.ndarray,
    label: np.ndarray,
    bank: PatchBank,
    config,
    k: Optional[int] = None,
):
    """Run up to k sample -> transform -> place -> composite rounds.

    The label map is updated after each paste, so later rounds see earlier
    pastes as non-valid ground. Failed rounds are recorded, not raised.
    Returns (image, label, events).
    """
    k = config.patches_per_image if k is None else k
    image, label = image.copy(), label.copy()
    events: List[PasteEvent] = []
    if k == 0:
        return image, label, events
    constraints = PlacementConstraints.from_config(config)
    for _ in range(k):
        if len(bank) == 0:
            events.append(PasteEvent(AugParams(s=1.0, theta=0.0, patch_ref=-1), False, reason="empty_bank"))
            continue
        params = sample_params(rng, config, len(bank))
        try:
            patch = transform_patch(bank[params.patch_ref], params.s, params.theta)
        except TransformCollapse:
            events.append(PasteEvent(params, False, reason="collapse"))
            continue
        pos, attempts = find_placement(rng, label, patch, constraints)
        if pos is None:
            events.append(PasteEvent(params, False, attempts, reason="no_placement"))
            continue
        x, y = pos
        full_mask = _composite_inplace(image, label, patch, x, y)
        events.append(PasteEvent(params.placed(x, y), True, attempts, patch.area, full_mask=full_mask))
    return image, label, events
