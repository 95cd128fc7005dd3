"""Command-line front end: extract, augment, stats, eval.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 data mismatch.
"""

import argparse
import csv
import dataclasses
import json
import logging
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from rpcp import __version__
from rpcp.dataset_io import (
    AugConfig,
    PairDescriptor,
    check_label,
    load_config,
    load_pair,
    read_mask,
    scan_dataset,
    write_pair,
)
from rpcp.errors import ConfigError, DataMismatchError, DatasetIOError, RpcpError
from rpcp.metrics_stats import (
    ClassMetric,
    ConfusionCounts,
    PixelDistribution,
    confusion,
    dumps_json,
    label_histogram,
    mean_metrics,
    pixel_distribution,
    report,
    sample_pixels,
    write_samples_csv,
)
from rpcp.patch_bank import PatchBank, build_bank, load_bank, save_bank
from rpcp.paste_engine import paste_k
from rpcp.random_projection import refine
from rpcp.seeding import event_stream, image_stream, make_rng

logger = logging.getLogger("rpcp")

AUG_SUFFIX = "_aug"
MANIFEST_NAME = "manifest.jsonl"
SUMMARY_NAME = "summary.json"


def _config(args) -> AugConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"seed: {args.seed} is not an unsigned 64-bit integer")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot write {path}: {exc}") from None


def _scan_nonempty(images, masks) -> List[PairDescriptor]:
    pairs = scan_dataset(images, masks)
    if not pairs:
        raise DatasetIOError(f"no PNG pairs found under {images} and {masks}")
    return pairs


# --------------------------------------------------------------------------- extract

def cmd_extract(args) -> int:
    cfg = _config(args)
    pairs = _scan_nonempty(args.images, args.masks)
    scheme = cfg.class_scheme
    bank = build_bank(pairs, scheme, cfg.min_patch_area, cfg.connectivity, jobs=args.jobs)
    index = save_bank(bank, args.out)
    summary = bank.summary()
    if not len(bank):
        print(f"warning: no {scheme.names[scheme.source_class]!r} regions found; bank is empty", file=sys.stderr)
    print(f"extracted {summary['patch_count']} patches from {summary['source_images']} of {len(pairs)} images -> {index}")
    for bucket, n in summary["area_histogram"].items():
        print(f"  area {bucket:>12} px: {n}")
    return 0


# --------------------------------------------------------------------------- augment

def augment_one(index: int, desc: PairDescriptor, bank: PatchBank, cfg: AugConfig, out_dir: Path) -> dict:
    """Augment a single pair and write originals plus the _aug copy. Returns its manifest record."""
    scheme = cfg.class_scheme
    stream = image_stream(cfg.seed, desc.id, index)
    record = {"id": desc.id, "index": index, "image_stream": stream}
    try:
        image, label = load_pair(desc, scheme)
        rng = make_rng(stream)
        before = label_histogram(label, scheme.class_count)
        out_img, out_lbl, events = paste_k(rng, image, label, bank, cfg)
        for j, ev in enumerate(events):
            if not ev.success:
                continue
            es = event_stream(stream, j)
            ev.params = dataclasses.replace(ev.params, rng_stream=es)
            out_img = refine(out_img, ev.full_mask, cfg.rp, make_rng(es))
        after = label_histogram(out_lbl, scheme.class_count)

        image_dir, mask_dir = out_dir / "images", out_dir / "masks"
        aug_id = desc.id + AUG_SUFFIX
        write_pair(out_img, out_lbl, (image_dir, mask_dir), aug_id)
        try:
            shutil.copyfile(desc.image_path, image_dir / f"{desc.id}.png")
            shutil.copyfile(desc.mask_path, mask_dir / f"{desc.id}.png")
        except OSError as exc:
            raise DatasetIOError(f"cannot copy originals of {desc.id}: {exc}") from None
    except RpcpError as exc:
        record.update({"error": f"{type(exc).__name__}: {exc}", "events": [], "outputs": []})
        return record

    record.update({
        "error": None,
        "events": [ev.to_record() for ev in events],
        "pastes_succeeded": sum(ev.success for ev in events),
        "pastes_failed": sum(not ev.success for ev in events),
        "pasted_pixels": int(sum(ev.area for ev in events if ev.success)),
        "class_pixels_before": before.tolist(),
        "class_pixels_after": after.tolist(),
        "outputs": [
            f"images/{desc.id}.png",
            f"masks/{desc.id}.png",
            f"images/{aug_id}.png",
            f"masks/{aug_id}.png",
        ],
    })
    return record


def run_augment(cfg: AugConfig, images, masks, out_dir, jobs: int = 1, bank_dir=None) -> dict:
    """Augment a whole dataset into out_dir; returns the summary document."""
    pairs = _scan_nonempty(images, masks)
    clash = sorted({p.id for p in pairs} & {p.id + AUG_SUFFIX for p in pairs})
    if clash:
        raise DataMismatchError(f"input ids collide with augmented names: {', '.join(clash)}")
    out_dir = Path(out_dir)
    if bank_dir is not None:
        bank = load_bank(bank_dir)
    else:
        bank = build_bank(pairs, cfg.class_scheme, cfg.min_patch_area, cfg.connectivity, jobs=jobs)

    work = list(enumerate(pairs))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda t: augment_one(t[0], t[1], bank, cfg, out_dir), work))
    else:
        records = [augment_one(i, d, bank, cfg, out_dir) for i, d in work]

    n = cfg.class_scheme.class_count
    ok = [r for r in records if r["error"] is None]
    before = np.sum([r["class_pixels_before"] for r in ok], axis=0, dtype=np.int64) if ok else np.zeros(n, np.int64)
    after = np.sum([r["class_pixels_after"] for r in ok], axis=0, dtype=np.int64) if ok else np.zeros(n, np.int64)
    scheme = cfg.class_scheme
    included = tuple(scheme.included_classes)
    dist_before = PixelDistribution(before, tuple(scheme.names), included)
    dist_after = PixelDistribution(after, tuple(scheme.names), included)
    summary = {
        "tool": "rpcp",
        "version": __version__,
        "config": cfg.to_dict(),
        "bank": bank.summary(),
        "images_processed": len(ok),
        "images_failed": len(records) - len(ok),
        "pastes_succeeded": sum(r["pastes_succeeded"] for r in ok),
        "pastes_failed": sum(r["pastes_failed"] for r in ok),
        "pasted_pixels": sum(r["pasted_pixels"] for r in ok),
        "distribution_before": dist_before.to_dict(),
        "distribution_after": dist_after.to_dict(),
    }
    manifest = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    _write_text(out_dir / MANIFEST_NAME, manifest)
    _write_text(out_dir / SUMMARY_NAME, dumps_json(summary))
    for r in records:
        if r["error"]:
            logger.warning("%s: %s", r["id"], r["error"])
    return summary


def cmd_augment(args) -> int:
    cfg = _config(args)
    summary = run_augment(cfg, args.images, args.masks, args.out, jobs=args.jobs, bank_dir=args.bank)
    print(
        f"augmented {summary['images_processed']} images "
        f"({summary['pastes_succeeded']} pastes, {summary['pastes_failed']} skipped, "
        f"{summary['pasted_pixels']} px) -> {args.out}"
    )
    if summary["images_failed"]:
        print(f"{summary['images_failed']} images failed; see {MANIFEST_NAME}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------- stats

def cmd_stats(args) -> int:
    cfg = _config(args)
    scheme = cfg.class_scheme
    pairs = _scan_nonempty(args.images, args.masks)

    def labels():
        for d in pairs:
            lbl = read_mask(d.mask_path)
            check_label(lbl, scheme, where=f"{d.id}: ")
            yield lbl

    dist = pixel_distribution(labels(), scheme)
    sys.stdout.write(dist.to_text())
    out = Path(args.out) if args.out else None
    if out is not None:
        _write_text(out / "distribution.json", dumps_json(dist.to_dict()))
    if args.sample_pixels is not None:
        if args.sample_pixels < 1:
            raise ConfigError("--sample-pixels must be >= 1")
        rows = sample_pixels(pairs, scheme, args.sample_pixels, make_rng(cfg.seed))
        path = (out or Path(".")) / "pixel_samples.csv"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                write_samples_csv(rows, fh)
        except OSError as exc:
            raise DatasetIOError(f"cannot write {path}: {exc}") from None
        print(f"wrote {len(rows)} pixel samples to {path}")
    return 0


# --------------------------------------------------------------------------- eval

def aggregate_table(path) -> List[dict]:
    """Read a CSV of per-class IoU/Acc rows (columns method, iou_*, acc_*) and average each row."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DatasetIOError(f"cannot read {path}: {exc}") from None
    out = []
    for row in rows:
        iou_keys = sorted(k for k in row if k.startswith("iou_"))
        if not iou_keys:
            raise DataMismatchError(f"{path}: no iou_* columns")
        try:
            per_class = [ClassMetric(float(row[k]), float(row["acc_" + k[4:]])) for k in iou_keys]
        except (KeyError, ValueError) as exc:
            raise DataMismatchError(f"{path}: bad row {row.get('method')!r}: {exc}") from None
        miou, macc = mean_metrics(per_class)
        out.append({"method": row.get("method", ""), "miou": miou, "macc": macc})
    return out


def cmd_eval(args) -> int:
    if args.aggregate:
        results = aggregate_table(args.aggregate)
        width = max([len("method")] + [len(r["method"]) for r in results])
        print(f"{'method':<{width}}  {'mIoU':>7}  {'mAcc':>7}")
        for r in results:
            print(f"{r['method']:<{width}}  {r['miou']:7.2f}  {r['macc']:7.2f}")
        return 0
    if not (args.pred and args.gt):
        raise ConfigError("eval needs --pred and --gt (or --aggregate)")
    cfg = _config(args)
    scheme = cfg.class_scheme
    pairs = _scan_nonempty(args.pred, args.gt)
    total = ConfusionCounts.zeros(scheme.class_count)
    for d in pairs:
        pred, gt = read_mask(d.image_path), read_mask(d.mask_path)
        if pred.shape != gt.shape:
            raise DataMismatchError(
                f"{d.id}: prediction is {pred.shape[1]}x{pred.shape[0]} but ground truth is {gt.shape[1]}x{gt.shape[0]}"
            )
        check_label(pred, scheme, where=f"{d.id} (pred): ")
        check_label(gt, scheme, where=f"{d.id} (gt): ")
        total = total + confusion(pred, gt, scheme)
    try:
        rep = report(total, scheme)
    except ValueError as exc:
        raise DataMismatchError(str(exc)) from None
    sys.stdout.write(rep.to_text())
    if args.out:
        out = Path(args.out)
        _write_text(out / "metrics.json", dumps_json(rep.to_dict()))
        _write_text(out / "metrics.txt", rep.to_text())
    return 0


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rpcp", description="Random projected copy-and-paste augmentation.")
    ap.add_argument("--version", action="version", version=f"rpcp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", type=Path, help="JSON config document")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
        if data:
            p.add_argument("--images", type=Path, required=True)
            p.add_argument("--masks", type=Path, required=True)

    p = sub.add_parser("extract", help="build a rare-class patch bank archive")
    common(p)
    p.add_argument("--out", type=Path, required=True, help="bank archive directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("augment", help="paste, refine and write an augmented dataset")
    common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--bank", type=Path, help="reuse a bank archive instead of re-extracting")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("stats", help="class pixel distribution and optional pixel samples")
    common(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--sample-pixels", type=int, metavar="N")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="IoU / accuracy of predicted masks against ground truth")
    common(p, data=False)
    p.add_argument("--pred", type=Path)
    p.add_argument("--gt", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--aggregate", type=Path, metavar="CSV",
                   help="average per-class IoU/Acc rows from a table instead of reading masks")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except RpcpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
