"""Per-class IoU / accuracy, class pixel distributions and pixel-sample export."""

import csv
import json
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from rpcp.dataset_io import ClassScheme, PairDescriptor, check_label, load_pair, read_mask
from rpcp.errors import DataMismatchError


@dataclass
class ConfusionCounts:
    tp: np.ndarray  # int64, one entry per class
    fp: np.ndarray
    fn: np.ndarray

    @classmethod
    def zeros(cls, n_classes: int) -> "ConfusionCounts":
        z = lambda: np.zeros(n_classes, dtype=np.int64)  # noqa: E731
        return cls(z(), z(), z())

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def evaluated_pixels(self) -> int:
        return int(self.tp.sum() + self.fn.sum())


@dataclass(frozen=True)
class ClassMetric:
    iou: float
    acc: Optional[float]  # None when the class never occurs in ground truth


@dataclass
class MetricReport:
    names: Tuple[str, ...]
    per_class: List[Optional[ClassMetric]]  # None for absent or excluded classes
    miou: float
    macc: float
    evaluated_pixel_count: int

    def to_dict(self) -> dict:
        rows = []
        for cid, (name, m) in enumerate(zip(self.names, self.per_class)):
            rows.append({
                "class_id": cid,
                "name": name,
                "iou": None if m is None else m.iou,
                "acc": None if m is None else m.acc,
                "absent": m is None,
            })
        return {
            "classes": rows,
            "miou": self.miou,
            "macc": self.macc,
            "evaluated_pixel_count": self.evaluated_pixel_count,
        }

    def to_text(self) -> str:
        width = max(len("class"), *(len(n) for n in self.names))
        lines = [f"{'class':<{width}}  {'IoU':>7}  {'Acc':>7}"]
        fmt = lambda v: "      -" if v is None else f"{100 * v:7.2f}"  # noqa: E731
        for name, m in zip(self.names, self.per_class):
            if m is None:
                lines.append(f"{name:<{width}}  {'absent':>7}  {'':>7}")
            else:
                lines.append(f"{name:<{width}}  {fmt(m.iou)}  {fmt(m.acc)}")
        lines.append(f"{'mean':<{width}}  {fmt(self.miou)}  {fmt(self.macc)}")
        lines.append(f"evaluated pixels: {self.evaluated_pixel_count}")
        return "\n".join(lines) + "\n"


def confusion(pred: np.ndarray, gt: np.ndarray, scheme: ClassScheme) -> ConfusionCounts:
    """Per-class TP/FP/FN pixel counts, skipping pixels whose ground truth is excluded."""
    if pred.shape != gt.shape:
        raise DataMismatchError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    n = scheme.class_count
    gt = gt.astype(np.int64).ravel()
    pred = pred.astype(np.int64).ravel()
    if gt.size and (gt.max() >= n or pred.max() >= n or gt.min() < 0 or pred.min() < 0):
        raise DataMismatchError(f"label values outside [0, {n})")
    keep = ~np.isin(gt, scheme.excluded_classes) if scheme.excluded_classes else slice(None)
    cm = np.bincount(gt[keep] * n + pred[keep], minlength=n * n).reshape(n, n)
    tp = np.diag(cm).astype(np.int64)
    return ConfusionCounts(tp=tp, fp=cm.sum(axis=0) - tp, fn=cm.sum(axis=1) - tp)


def class_metrics(counts: ConfusionCounts) -> List[Optional[ClassMetric]]:
    """IoU = tp/(tp+fp+fn), Acc = tp/(tp+fn). Classes with tp+fp+fn = 0 are None."""
    out = []
    for tp, fp, fn in zip(counts.tp.tolist(), counts.fp.tolist(), counts.fn.tolist()):
        union = tp + fp + fn
        if union == 0:
            out.append(None)
            continue
        acc = tp / (tp + fn) if tp + fn else None
        out.append(ClassMetric(iou=tp / union, acc=acc))
    return out


def mean_metrics(per_class: Sequence[Optional[ClassMetric]], excluded: Iterable[int] = ()) -> Tuple[float, float]:
    """Unweighted means over present, non-excluded classes."""
    excluded = set(excluded)
    present = [m for c, m in enumerate(per_class) if m is not None and c not in excluded]
    if not present:
        raise ValueError("no present classes to average")
    ious = [m.iou for m in present]
    accs = [m.acc for m in present if m.acc is not None]
    miou = sum(ious) / len(ious)
    macc = sum(accs) / len(accs) if accs else float("nan")
    return miou, macc


def report(counts: ConfusionCounts, scheme: ClassScheme) -> MetricReport:
    per_class = class_metrics(counts)
    per_class = [None if c in scheme.excluded_classes else m for c, m in enumerate(per_class)]
    miou, macc = mean_metrics(per_class)
    return MetricReport(tuple(scheme.names), per_class, miou, macc, counts.evaluated_pixels)


def evaluate(pairs: Iterable[Tuple[np.ndarray, np.ndarray]], scheme: ClassScheme) -> MetricReport:
    """Accumulate confusion over (pred, gt) pairs and report."""
    total = ConfusionCounts.zeros(scheme.class_count)
    for pred, gt in pairs:
        total = total + confusion(pred, gt, scheme)
    return report(total, scheme)


# --------------------------------------------------------------------------- distributions

@dataclass
class PixelDistribution:
    counts: np.ndarray  # int64 per class
    names: Tuple[str, ...]
    included: Tuple[int, ...]

    @property
    def fractions(self) -> List[Optional[float]]:
        total = int(self.counts[list(self.included)].sum()) if self.included else 0
        return [
            (int(self.counts[c]) / total if total else 0.0) if c in self.included else None
            for c in range(len(self.counts))
        ]

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"class_id": c, "name": n, "pixels": int(self.counts[c]), "fraction": f}
                for c, (n, f) in enumerate(zip(self.names, self.fractions))
            ],
            "total_pixels": int(self.counts.sum()),
        }

    def to_text(self) -> str:
        width = max(len("class"), *(len(n) for n in self.names))
        lines = [f"{'class':<{width}}  {'pixels':>14}  {'fraction':>9}"]
        for c, (n, f) in enumerate(zip(self.names, self.fractions)):
            frac = "excluded" if f is None else f"{f:9.6f}"
            lines.append(f"{n:<{width}}  {int(self.counts[c]):>14}  {frac:>9}")
        return "\n".join(lines) + "\n"


def label_histogram(label: np.ndarray, n_classes: int) -> np.ndarray:
    return np.bincount(label.ravel(), minlength=n_classes)[:n_classes].astype(np.int64)


def pixel_distribution(labels: Iterable[np.ndarray], scheme: ClassScheme) -> PixelDistribution:
    counts = np.zeros(scheme.class_count, dtype=np.int64)
    for label in labels:
        counts += label_histogram(label, scheme.class_count)
    return PixelDistribution(counts, tuple(scheme.names), tuple(scheme.included_classes))


# --------------------------------------------------------------------------- pixel samples

SAMPLE_HEADER = ("class_id", "r", "g", "b", "source_id", "x", "y")


def sample_pixels(
    pairs: Sequence[PairDescriptor],
    scheme: ClassScheme,
    n_per_class: int,
    rng: np.random.Generator,
) -> List[tuple]:
    """Uniform without-replacement sample of up to n_per_class pixels per class.

    Two passes over the pairs: count class pixels, then fetch the chosen ones.
    Rows are (class_id, r, g, b, source_id, x, y), sorted by class then position.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    n = scheme.class_count
    per_image = np.zeros((len(pairs), n), dtype=np.int64)
    for i, desc in enumerate(pairs):
        label = read_mask(desc.mask_path)
        check_label(label, scheme, where=f"{desc.id}: ")
        per_image[i] = label_histogram(label, n)
    offsets = np.vstack([np.zeros((1, n), dtype=np.int64), np.cumsum(per_image, axis=0)])
    chosen = {}
    for c in scheme.included_classes:
        total = int(offsets[-1, c])
        if total == 0:
            continue
        take = min(n_per_class, total)
        chosen[c] = np.sort(rng.choice(total, size=take, replace=False))

    rows = []
    for i, desc in enumerate(pairs):
        picks = {}
        for c, idx in chosen.items():
            lo, hi = offsets[i, c], offsets[i + 1, c]
            sel = idx[(idx >= lo) & (idx < hi)] - lo
            if sel.size:
                picks[c] = sel
        if not picks:
            continue
        image, label = load_pair(desc, scheme)
        W = label.shape[1]
        for c, sel in picks.items():
            flat = np.flatnonzero(label.ravel() == c)[sel]
            for f in flat.tolist():
                y, x = divmod(f, W)
                r, g, b = image[y, x]
                rows.append((c, float(r), float(g), float(b), desc.id, x, y))
    rows.sort(key=lambda row: (row[0], row[4], row[6], row[5]))
    return rows


def write_samples_csv(rows: Sequence[tuple], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SAMPLE_HEADER)
    for c, r, g, b, sid, x, y in rows:
        writer.writerow([c, f"{r:.6f}", f"{g:.6f}", f"{b:.6f}", sid, x, y])


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
