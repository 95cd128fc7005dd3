"""Rare-class region extraction and the patch bank pasted from."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from rpcp.dataset_io import (
    ClassScheme,
    PairDescriptor,
    check_label,
    load_pair,
    read_image,
    read_mask,
    save_png,
    to_bytes,
)
from rpcp.errors import DataMismatchError, DatasetIOError, RpcpError

logger = logging.getLogger(__name__)

BBox = Tuple[int, int, int, int]  # (x0, y0, w, h)

_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True, eq=False)
class Region:
    """One connected component of a class, stored as a box-local boolean mask."""

    source_id: str
    class_id: int
    bounding_box: BBox
    mask: np.ndarray  # (h, w) bool, True on member pixels

    @property
    def pixel_count(self) -> int:
        return int(self.mask.sum())

    @property
    def pixels(self) -> np.ndarray:
        """Absolute (y, x) coordinates of member pixels, raster order."""
        x0, y0, _, _ = self.bounding_box
        ys, xs = np.nonzero(self.mask)
        return np.stack([ys + y0, xs + x0], axis=1)


@dataclass(frozen=True, eq=False)
class Patch:
    rgb: np.ndarray  # (h, w, 3) float in [0, 1]
    mask: np.ndarray  # (h, w) bool
    class_id: int
    source_id: str = ""
    bounding_box: BBox = (0, 0, 0, 0)  # box in the source image

    def __post_init__(self):
        if self.rgb.shape[:2] != self.mask.shape:
            raise ValueError(f"patch rgb {self.rgb.shape[:2]} and mask {self.mask.shape} differ")
        if not self.mask.any():
            raise ValueError("patch mask has no set pixels")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass
class PatchBank:
    patches: List[Patch] = field(default_factory=list)

    def __post_init__(self):
        self.patches.sort(key=lambda p: (p.source_id, p.bounding_box))
        self.index: Dict[str, List[int]] = {}
        for i, p in enumerate(self.patches):
            self.index.setdefault(p.source_id, []).append(i)

    def __len__(self):
        return len(self.patches)

    def __getitem__(self, i) -> Patch:
        return self.patches[i]

    def summary(self) -> dict:
        """Patch count and a power-of-two area histogram ("16-31": n, ...)."""
        hist: Dict[str, int] = {}
        for p in self.patches:
            lo = 1 << (p.area.bit_length() - 1)
            key = f"{lo}-{2 * lo - 1}"
            hist[key] = hist.get(key, 0) + 1
        order = sorted(hist, key=lambda k: int(k.split("-")[0]))
        return {
            "patch_count": len(self.patches),
            "source_images": len(self.index),
            "area_histogram": {k: hist[k] for k in order},
        }


def extract_components(
    label: np.ndarray,
    class_id: int,
    connectivity: int = 8,
    min_area: int = 1,
    source_id: str = "",
) -> List[Region]:
    """Maximal connected components of ``label == class_id`` with at least min_area pixels.

    Regions come back in raster order of their first pixel.
    """
    if connectivity not in _STRUCTURE:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    members = label == class_id
    if not members.any():
        return []
    labelled, n = ndimage.label(members, structure=_STRUCTURE[connectivity])
    regions = []
    for i, sl in enumerate(ndimage.find_objects(labelled), start=1):
        if sl is None:
            continue
        local = labelled[sl] == i
        if local.sum() < min_area:
            continue
        ys, xs = sl
        bbox = (xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start)
        regions.append(Region(source_id, int(class_id), bbox, local))
    return regions


def crop_patch(image: np.ndarray, label: np.ndarray, region: Region) -> Patch:
    x0, y0, w, h = region.bounding_box
    H, W = label.shape
    if x0 < 0 or y0 < 0 or w < 1 or h < 1 or x0 + w > W or y0 + h > H:
        raise ValueError(f"region box {region.bounding_box} outside {W}x{H} image")
    if region.mask.shape != (h, w):
        raise ValueError("region mask does not match its bounding box")
    return Patch(
        rgb=image[y0:y0 + h, x0:x0 + w].copy(),
        mask=region.mask.copy(),
        class_id=region.class_id,
        source_id=region.source_id,
        bounding_box=region.bounding_box,
    )


def _extract_pair(desc: PairDescriptor, scheme: ClassScheme, min_area: int, connectivity: int) -> List[Patch]:
    try:
        label = read_mask(desc.mask_path)
        check_label(label, scheme, where=f"{desc.id}: ")
        regions = extract_components(label, scheme.source_class, connectivity, min_area, desc.id)
        if not regions:
            return []
        image, label = load_pair(desc, scheme)
    except RpcpError as exc:
        raise type(exc)(f"[{desc.id}] {exc}") from None
    return [crop_patch(image, label, r) for r in regions]


def build_bank(
    pairs: Sequence[PairDescriptor],
    scheme: ClassScheme,
    min_area: int = 16,
    connectivity: int = 8,
    jobs: int = 1,
) -> PatchBank:
    """Crop every qualifying source-class component from every pair."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_pair = list(pool.map(lambda d: _extract_pair(d, scheme, min_area, connectivity), pairs))
    else:
        per_pair = [_extract_pair(d, scheme, min_area, connectivity) for d in pairs]
    bank = PatchBank([p for patches in per_pair for p in patches])
    if len(bank) == 0:
        logger.warning(
            "no %r regions of at least %d px found in %d pairs; bank is empty",
            scheme.names[scheme.source_class], min_area, len(pairs),
        )
    return bank


# --------------------------------------------------------------------------- archive

INDEX_NAME = "index.json"


def save_bank(bank: PatchBank, out_dir) -> Path:
    """Write per-patch rgb/mask PNGs and a JSON index. RGB is quantised to 8 bits."""
    out_dir = Path(out_dir)
    patch_dir = out_dir / "patches"
    try:
        patch_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"cannot create {patch_dir}: {exc}") from None
    entries = []
    for i, p in enumerate(bank.patches):
        rgb_name, mask_name = f"{i:06d}_rgb.png", f"{i:06d}_mask.png"
        save_png(to_bytes(p.rgb), patch_dir / rgb_name)
        save_png(p.mask.astype(np.uint8) * 255, patch_dir / mask_name)
        entries.append({
            "rgb": f"patches/{rgb_name}",
            "mask": f"patches/{mask_name}",
            "source_id": p.source_id,
            "bounding_box": list(p.bounding_box),
            "class_id": p.class_id,
            "area": p.area,
        })
    index_path = out_dir / INDEX_NAME
    doc = {"summary": bank.summary(), "patches": entries}
    try:
        index_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot write {index_path}: {exc}") from None
    return index_path


def load_bank(bank_dir) -> PatchBank:
    bank_dir = Path(bank_dir)
    index_path = bank_dir / INDEX_NAME
    try:
        doc = json.loads(index_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetIOError(f"cannot read bank index {index_path}: {exc}") from None
    patches = []
    for e in doc["patches"]:
        rgb = read_image(bank_dir / e["rgb"])
        mask = read_mask(bank_dir / e["mask"]) > 0
        if rgb.shape[:2] != mask.shape:
            raise DataMismatchError(f"bank entry {e['rgb']}: rgb and mask sizes differ")
        patches.append(Patch(rgb, mask, int(e["class_id"]), e["source_id"], tuple(e["bounding_box"])))
    return PatchBank(patches)
