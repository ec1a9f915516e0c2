"""Pixel-level detection metrics and directory evaluation."""

import os
from dataclasses import dataclass

import numpy as np

from .binio import atomic_write_text
from .maskgen import load_binary_mask, load_class_mask


@dataclass(frozen=True)
class EvalMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "EvalMetrics":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(tp=int(tp), fp=int(fp), fn=int(fn), precision=precision, recall=recall, f1=f1)


def binary_metrics(pred: np.ndarray, truth: np.ndarray) -> EvalMetrics:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    return EvalMetrics.from_counts(tp, fp, fn)


def three_class_metrics(pred_labels: np.ndarray, truth_labels: np.ndarray) -> dict:
    """Per-class one-vs-rest metrics plus their unweighted macro average."""
    pred_labels = np.asarray(pred_labels)
    truth_labels = np.asarray(truth_labels)
    out = {}
    for value, name in ((0, "background"), (1, "source"), (2, "target")):
        out[name] = binary_metrics(pred_labels == value, truth_labels == value)
    out["average"] = mean_metrics([out["background"], out["source"], out["target"]])
    return out


def mean_metrics(items) -> EvalMetrics:
    """Unweighted mean of precision/recall/f1; counts are summed."""
    items = list(items)
    if not items:
        return EvalMetrics(0, 0, 0, 0.0, 0.0, 0.0)
    return EvalMetrics(
        tp=sum(m.tp for m in items),
        fp=sum(m.fp for m in items),
        fn=sum(m.fn for m in items),
        precision=float(np.mean([m.precision for m in items])),
        recall=float(np.mean([m.recall for m in items])),
        f1=float(np.mean([m.f1 for m in items])),
    )


_STRIP_SUFFIXES = ("_mask", "_truth", "_forged", "_gt")


def canonical_stem(filename: str) -> str:
    """Filename key for pairing predictions with truth rasters."""
    stem = os.path.splitext(os.path.basename(filename))[0]
    changed = True
    while changed:
        changed = False
        for suffix in _STRIP_SUFFIXES:
            if stem.endswith(suffix):
                stem = stem[: -len(suffix)]
                changed = True
    return stem


def evaluate_dirs(pred_dir, truth_dir):
    """Per-image metrics for filename-paired masks, then the unweighted mean.

    Returns ``(rows, summary, missing)``: rows are ``(stem, EvalMetrics)``
    sorted by stem, ``missing`` lists truth stems without a prediction
    (excluded from the aggregate).
    """
    def is_truth(name):
        return "_truth" in name or "_gt" in name

    preds = {}
    for f in sorted(os.listdir(pred_dir)):
        if f.lower().endswith(".png") and not is_truth(f):
            preds[canonical_stem(f)] = os.path.join(pred_dir, f)
    truth_files = [f for f in sorted(os.listdir(truth_dir)) if f.lower().endswith(".png")]
    tagged = [f for f in truth_files if is_truth(f)]
    if tagged:
        truth_files = tagged  # corpus dirs mix forged images with *_truth rasters
    else:
        truth_files = [f for f in truth_files if "_forged" not in f and "_mask" not in f]
    rows = []
    missing = []
    for f in truth_files:
        stem = canonical_stem(f)
        pred_path = preds.get(stem)
        if pred_path is None:
            missing.append(stem)
            continue
        truth = load_class_mask(os.path.join(truth_dir, f)).binary()
        pred = load_binary_mask(pred_path)
        rows.append((stem, binary_metrics(pred, truth)))
    rows.sort(key=lambda r: r[0])
    summary = mean_metrics([m for _, m in rows])
    return rows, summary, sorted(missing)


def format_eval_table(rows, summary, missing=()) -> str:
    lines = [f"{'image':<28} {'precision':>10} {'recall':>10} {'f1':>10}"]
    for stem, m in rows:
        lines.append(f"{stem:<28} {m.precision:>10.4f} {m.recall:>10.4f} {m.f1:>10.4f}")
    lines.append(f"{'mean (' + str(len(rows)) + ' images)':<28} {summary.precision:>10.4f} {summary.recall:>10.4f} {summary.f1:>10.4f}")
    for stem in missing:
        lines.append(f"missing prediction for {stem} (excluded)")
    return "\n".join(lines)


def write_eval_tsv(path, rows, summary) -> None:
    """Line-delimited records: image, tp, fp, fn, precision, recall, f1."""
    lines = ["image\ttp\tfp\tfn\tprecision\trecall\tf1"]
    for stem, m in rows:
        lines.append(f"{stem}\t{m.tp}\t{m.fp}\t{m.fn}\t{m.precision:.6f}\t{m.recall:.6f}\t{m.f1:.6f}")
    lines.append(
        f"mean\t{summary.tp}\t{summary.fp}\t{summary.fn}"
        f"\t{summary.precision:.6f}\t{summary.recall:.6f}\t{summary.f1:.6f}"
    )
    atomic_write_text(path, "\n".join(lines) + "\n")
