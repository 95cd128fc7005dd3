"""Random-projection refinement of pasted regions.

A Gaussian h x w x 3 x 3 filter is drawn per paste event, the composited
image is convolved with it around the pasted region, and the result is
alpha-blended back in under the pasted mask only.
"""

from dataclasses import dataclass

import numpy as np

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class RpConfig:
    h: int = 3
    w: int = 3
    sigma: float = 0.20
    alpha: float = 0.8
    restandardize: bool = True

    def __post_init__(self):
        for name in ("h", "w"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1 or v % 2 == 0:
                raise ValueError(f"filter {name} must be an odd integer >= 1, got {v!r}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")


@dataclass(frozen=True)
class RpFilter:
    weights: np.ndarray  # (h, w, c_in, c_out)

    def __post_init__(self):
        wt = self.weights
        if wt.ndim != 4 or wt.shape[2:] != (3, 3) or wt.shape[0] % 2 == 0 or wt.shape[1] % 2 == 0:
            raise ValueError(f"filter weights must have shape (odd h, odd w, 3, 3), got {wt.shape}")

    @property
    def radius(self):
        return self.weights.shape[0] // 2, self.weights.shape[1] // 2


def sample_filter(rng: np.random.Generator, cfg: RpConfig) -> RpFilter:
    """Draw every weight i.i.d. from Normal(0, sigma^2)."""
    weights = rng.normal(0.0, 1.0, size=(cfg.h, cfg.w, 3, 3)) * cfg.sigma
    return RpFilter(weights)


def convolve(image: np.ndarray, filt: RpFilter) -> np.ndarray:
    """Cross-channel correlation with reflect padding; output has the input's shape.

    out[y, x, co] = sum_{dy, dx, ci} W[dy, dx, ci, co] * img[y + dy - h//2, x + dx - w//2, ci]
    """
    h, w = filt.weights.shape[:2]
    ry, rx = h // 2, w // 2
    H, W = image.shape[:2]
    padded = np.pad(image, ((ry, ry), (rx, rx), (0, 0)), mode="reflect") if (ry or rx) else image
    out = np.zeros((H, W, 3), dtype=np.float64)
    # explicit per-channel accumulation keeps the summation order fixed (no BLAS)
    for dy in range(h):
        for dx in range(w):
            window = padded[dy:dy + H, dx:dx + W]
            for ci in range(3):
                out += window[:, :, ci:ci + 1] * filt.weights[dy, dx, ci]
    return out


def restandardize(raw: np.ndarray, reference: np.ndarray, mask: np.ndarray, clip: bool = True) -> np.ndarray:
    """Affinely match raw's per-channel masked mean/std to the reference's.

    Falls back to a mean shift when raw is flat under the mask.
    """
    mask = mask.astype(bool)
    if not mask.any():
        raise ValueError("restandardize needs at least one masked pixel")
    r = raw[mask]
    ref = reference[mask]
    r_mean, r_std = r.mean(axis=0), r.std(axis=0)
    ref_mean, ref_std = ref.mean(axis=0), ref.std(axis=0)
    out = np.empty_like(raw, dtype=np.float64)
    for c in range(3):
        if r_std[c] < STD_FLOOR:
            out[..., c] = raw[..., c] - r_mean[c] + ref_mean[c]
        else:
            out[..., c] = (raw[..., c] - r_mean[c]) * (ref_std[c] / r_std[c]) + ref_mean[c]
    if clip:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def _expanded_box(mask: np.ndarray, ry: int, rx: int):
    ys, xs = np.nonzero(mask)
    H, W = mask.shape
    y0, y1 = max(ys.min() - ry, 0), min(ys.max() + 1 + ry, H)
    x0, x1 = max(xs.min() - rx, 0), min(xs.max() + 1 + rx, W)
    return y0, y1, x0, x1


def perturb_region(image: np.ndarray, mask: np.ndarray, filt: RpFilter, restandardize_output: bool = True):
    """Return (box, X) where X is the perturbed image restricted to the mask's
    bounding box grown by the filter radius (clipped to the image).

    Inside the mask this matches a whole-image convolve(); the crop only differs
    from the full image where reflection would not reach a masked pixel anyway.
    """
    ry, rx = filt.radius
    y0, y1, x0, x1 = _expanded_box(mask, ry, rx)
    crop = image[y0:y1, x0:x1]
    x_raw = convolve(crop, filt)
    if restandardize_output:
        x_raw = restandardize(x_raw, crop, mask[y0:y1, x0:x1])
    return (y0, y1, x0, x1), x_raw


def blend(image: np.ndarray, perturbed: np.ndarray, mask: np.ndarray, alpha: float) -> np.ndarray:
    """alpha * X + (1 - alpha) * I inside mask, I elsewhere. No clipping."""
    out = image.copy()
    m = mask.astype(bool)
    out[m] = alpha * perturbed[m] + (1.0 - alpha) * image[m]
    return out


def refine(image: np.ndarray, full_mask: np.ndarray, cfg: RpConfig, rng: np.random.Generator) -> np.ndarray:
    """Refine the pixels under full_mask. sigma == 0 disables refinement entirely."""
    if full_mask.shape != image.shape[:2]:
        raise ValueError(f"mask shape {full_mask.shape} does not match image {image.shape[:2]}")
    mask = full_mask.astype(bool)
    if cfg.sigma == 0 or cfg.alpha == 0 or not mask.any():
        return image.copy()
    filt = sample_filter(rng, cfg)
    (y0, y1, x0, x1), x_pert = perturb_region(image, mask, filt, cfg.restandardize)
    out = image.copy()
    sub = mask[y0:y1, x0:x1]
    region = blend(image[y0:y1, x0:x1], x_pert, sub, cfg.alpha)
    np.clip(region, 0.0, 1.0, out=region)
    out[y0:y1, x0:x1][sub] = region[sub]
    return out
