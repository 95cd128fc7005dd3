"""Loading, validating, pairing and writing image/mask PNGs, plus run configuration."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image

from rpcp.errors import ConfigError, DataMismatchError, DatasetIOError
from rpcp.random_projection import RpConfig

PNG_SUFFIX = ".png"
PNG_COMPRESS_LEVEL = 3


@dataclass(frozen=True)
class ClassScheme:
    class_count: int = 3
    names: Tuple[str, ...] = ("healthy_leaf", "necrotic_lesion", "insect_damage")
    source_class: int = 2
    valid_class: int = 0
    excluded_classes: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.class_count < 2 or self.class_count > 256:
            raise ValueError(f"class count must lie in [2, 256], got {self.class_count}")
        if len(self.names) != self.class_count:
            raise ValueError(f"expected {self.class_count} class names, got {len(self.names)}")
        for name, cid in (("source_class", self.source_class), ("valid_class", self.valid_class)):
            if not 0 <= cid < self.class_count:
                raise ValueError(f"{name} {cid} outside [0, {self.class_count})")
        if self.source_class == self.valid_class:
            raise ValueError("source_class and valid_class must differ")
        for cid in self.excluded_classes:
            if not 0 <= cid < self.class_count:
                raise ValueError(f"excluded class {cid} outside [0, {self.class_count})")

    @property
    def included_classes(self) -> List[int]:
        return [c for c in range(self.class_count) if c not in self.excluded_classes]


@dataclass(frozen=True)
class AugConfig:
    seed: int = 0
    patches_per_image: int = 1
    scale_range: Tuple[float, float] = (0.8, 1.2)
    rotation_range: Tuple[float, float] = (0.0, 360.0)
    rp: RpConfig = field(default_factory=RpConfig)
    min_patch_area: int = 16
    max_attempts: int = 100
    margin: int = 0
    connectivity: int = 8
    class_scheme: ClassScheme = field(default_factory=ClassScheme)

    def __post_init__(self):
        s_min, s_max = self.scale_range
        if not (s_min > 0 and s_max > 0 and s_min <= s_max):
            raise ValueError(f"scale_range must satisfy 0 < s_min <= s_max, got {list(self.scale_range)}")
        t_min, t_max = self.rotation_range
        if not (0 <= t_min <= t_max <= 360):
            raise ValueError(f"rotation_range must lie within [0, 360] with min <= max, got {list(self.rotation_range)}")
        if self.patches_per_image < 0:
            raise ValueError("patches_per_image must be >= 0")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.min_patch_area < 1:
            raise ValueError("min_patch_area must be >= 1")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        """Config as a document that parse_config accepts back unchanged."""
        cs = self.class_scheme
        return {
            "seed": self.seed,
            "patches_per_image": self.patches_per_image,
            "scale_range": list(self.scale_range),
            "rotation_range": list(self.rotation_range),
            "filter_size": [self.rp.h, self.rp.w],
            "sigma": self.rp.sigma,
            "alpha": self.rp.alpha,
            "restandardize": self.rp.restandardize,
            "min_patch_area": self.min_patch_area,
            "max_attempts": self.max_attempts,
            "margin": self.margin,
            "connectivity": self.connectivity,
            "classes": {
                "count": cs.class_count,
                "names": list(cs.names),
                "source_class": cs.source_class,
                "valid_class": cs.valid_class,
                "excluded": list(cs.excluded_classes),
            },
        }


@dataclass(frozen=True)
class PairDescriptor:
    image_path: Path
    mask_path: Path
    id: str


# --------------------------------------------------------------------------- config

_TOP_KEYS = {
    "seed", "patches_per_image", "scale_range", "rotation_range", "filter_size", "sigma",
    "alpha", "min_patch_area", "max_attempts", "margin", "classes", "connectivity", "restandardize",
}
_CLASS_KEYS = {"count", "names", "source_class", "valid_class", "excluded"}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _get_int(doc, key, default, lo=None, hi=None):
    v = doc.get(key, default)
    if not _is_int(v):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{key}: {v} out of range [{lo}, {hi if hi is not None else 'inf'}]")
    return v


def _get_num(doc, key, default, lo=None, hi=None):
    v = doc.get(key, default)
    if not _is_num(v):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{key}: {v} out of range [{lo}, {hi if hi is not None else 'inf'}]")
    return float(v)


def _get_pair(doc, key, default):
    v = doc.get(key, default)
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(_is_num(x) for x in v)):
        raise ConfigError(f"{key}: expected a list of two numbers, got {v!r}")
    return float(v[0]), float(v[1])


def _parse_classes(doc) -> ClassScheme:
    if not isinstance(doc, dict):
        raise ConfigError(f"classes: expected an object, got {doc!r}")
    unknown = sorted(set(doc) - _CLASS_KEYS)
    if unknown:
        raise ConfigError(f"classes.{unknown[0]}: unknown key")
    base = ClassScheme()
    count = _get_int(doc, "count", base.class_count, 2, 256)
    default_names = base.names if count == base.class_count else tuple(f"class_{i}" for i in range(count))
    names = doc.get("names", list(default_names))
    if not (isinstance(names, list) and all(isinstance(n, str) for n in names)):
        raise ConfigError(f"classes.names: expected a list of strings, got {names!r}")
    excluded = doc.get("excluded", [])
    if not (isinstance(excluded, list) and all(_is_int(e) for e in excluded)):
        raise ConfigError(f"classes.excluded: expected a list of integers, got {excluded!r}")
    try:
        return ClassScheme(
            class_count=count,
            names=tuple(names),
            source_class=_get_int(doc, "source_class", base.source_class),
            valid_class=_get_int(doc, "valid_class", base.valid_class),
            excluded_classes=tuple(sorted(set(excluded))),
        )
    except ValueError as exc:
        raise ConfigError(f"classes: {exc}") from None


def parse_config(text: str) -> AugConfig:
    """Parse a JSON config document; absent keys take the defaults.

    Defaults: one patch per image, 3x3 filter, sigma 0.20, alpha 0.8.
    Unknown keys are rejected.
    """
    text = text.strip()
    if not text:
        doc = {}
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")

    d = AugConfig()
    fs = doc.get("filter_size", [d.rp.h, d.rp.w])
    if _is_int(fs):
        fs = [fs, fs]
    if not (isinstance(fs, list) and len(fs) == 2 and all(_is_int(v) and v >= 1 and v % 2 == 1 for v in fs)):
        raise ConfigError(f"filter_size: expected an odd integer or [odd h, odd w], got {doc.get('filter_size')!r}")
    restd = doc.get("restandardize", d.rp.restandardize)
    if not isinstance(restd, bool):
        raise ConfigError(f"restandardize: expected a boolean, got {restd!r}")
    rp = RpConfig(
        h=fs[0],
        w=fs[1],
        sigma=_get_num(doc, "sigma", d.rp.sigma, 0.0),
        alpha=_get_num(doc, "alpha", d.rp.alpha, 0.0, 1.0),
        restandardize=restd,
    )
    scale = _get_pair(doc, "scale_range", d.scale_range)
    if not (scale[0] > 0 and scale[1] > 0):
        raise ConfigError(f"scale_range: values must be > 0, got {list(scale)}")
    if scale[0] > scale[1]:
        raise ConfigError(f"scale_range: s_min {scale[0]} > s_max {scale[1]}")
    rot = _get_pair(doc, "rotation_range", d.rotation_range)
    if not (0 <= rot[0] <= rot[1] <= 360):
        raise ConfigError(f"rotation_range: must lie within [0, 360] with min <= max, got {list(rot)}")
    connectivity = _get_int(doc, "connectivity", d.connectivity)
    if connectivity not in (4, 8):
        raise ConfigError(f"connectivity: must be 4 or 8, got {connectivity}")
    try:
        return AugConfig(
            seed=_get_int(doc, "seed", d.seed, 0, 2**64 - 1),
            patches_per_image=_get_int(doc, "patches_per_image", d.patches_per_image, 0),
            scale_range=scale,
            rotation_range=rot,
            rp=rp,
            min_patch_area=_get_int(doc, "min_patch_area", d.min_patch_area, 1),
            max_attempts=_get_int(doc, "max_attempts", d.max_attempts, 1),
            margin=_get_int(doc, "margin", d.margin, 0),
            connectivity=connectivity,
            class_scheme=_parse_classes(doc.get("classes", {})),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: Optional[Path]) -> AugConfig:
    if path is None:
        return parse_config("")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


# --------------------------------------------------------------------------- pairing

def _png_stems(directory: Path) -> dict:
    return {p.stem: p for p in directory.iterdir() if p.is_file() and p.suffix.lower() == PNG_SUFFIX}


def scan_dataset(image_dir, mask_dir) -> List[PairDescriptor]:
    """Pair images with masks by filename stem, sorted by id.

    Any unpaired file on either side is an error naming every orphan.
    """
    image_dir, mask_dir = Path(image_dir), Path(mask_dir)
    for d in (image_dir, mask_dir):
        if not d.is_dir():
            raise DatasetIOError(f"not a directory: {d}")
    images, masks = _png_stems(image_dir), _png_stems(mask_dir)
    no_mask = sorted(set(images) - set(masks))
    no_image = sorted(set(masks) - set(images))
    if no_mask or no_image:
        parts = [f"{s} (no mask)" for s in no_mask] + [f"{s} (no image)" for s in no_image]
        err = DataMismatchError("unpaired files: " + ", ".join(parts))
        err.no_mask, err.no_image = no_mask, no_image
        raise err
    return [PairDescriptor(images[s], masks[s], s) for s in sorted(images)]


# --------------------------------------------------------------------------- rasters

def read_mask(path) -> np.ndarray:
    """Decode a single-channel 8-bit (grayscale or palette-index) PNG into uint8 ids."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "P"):
                raise DataMismatchError(f"{path}: mask must be single-channel 8-bit, got mode {im.mode}")
            return np.asarray(im, dtype=np.uint8).copy()
    except (OSError, SyntaxError) as exc:
        raise DatasetIOError(f"cannot decode {path}: {exc}") from None


def read_image(path) -> np.ndarray:
    """Decode an 8-bit RGB PNG into float64 intensities in [0, 1]."""
    try:
        with Image.open(path) as im:
            if im.mode != "RGB":
                raise DataMismatchError(f"{path}: image must be 8-bit RGB, got mode {im.mode}")
            data = np.asarray(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise DatasetIOError(f"cannot decode {path}: {exc}") from None
    return data / 255.0


def check_label(label: np.ndarray, scheme: ClassScheme, where="") -> None:
    bad = label >= scheme.class_count
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        y, x = divmod(idx, label.shape[1])
        raise DataMismatchError(
            f"{where}label value {int(label.flat[idx])} at pixel {idx} (x={x}, y={y}) "
            f"is not in the class scheme (count {scheme.class_count})"
        )


def load_pair(desc: PairDescriptor, scheme: ClassScheme):
    image = read_image(desc.image_path)
    label = read_mask(desc.mask_path)
    if image.shape[:2] != label.shape:
        raise DataMismatchError(
            f"{desc.id}: image is {image.shape[1]}x{image.shape[0]} but mask is {label.shape[1]}x{label.shape[0]}"
        )
    check_label(label, scheme, where=f"{desc.id}: ")
    return image, label


def to_bytes(image: np.ndarray) -> np.ndarray:
    """[0, 1] floats to uint8 with round-half-up."""
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_png(array: np.ndarray, path: Path) -> None:
    try:
        Image.fromarray(array).save(path, format="PNG", compress_level=PNG_COMPRESS_LEVEL)
    except OSError as exc:
        raise DatasetIOError(f"cannot write {path}: {exc}") from None


def write_pair(image: np.ndarray, label: np.ndarray, out_dirs, id: str) -> Tuple[Path, Path]:
    """Write image and mask as <id>.png into (image_dir, mask_dir)."""
    if not id:
        raise ValueError("pair id must be a non-empty string")
    if image.shape[:2] != label.shape:
        raise DataMismatchError(f"{id}: image and label dimensions differ")
    image_dir, mask_dir = (Path(d) for d in out_dirs)
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
        mask_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"cannot create output directory: {exc}") from None
    image_path = image_dir / f"{id}{PNG_SUFFIX}"
    mask_path = mask_dir / f"{id}{PNG_SUFFIX}"
    save_png(to_bytes(image), image_path)
    save_png(np.ascontiguousarray(label, dtype=np.uint8), mask_path)
    return image_path, mask_path
