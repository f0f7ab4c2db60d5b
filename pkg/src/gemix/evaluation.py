"""Confusion matrices, macro precision/recall/F1, false-negative rate, and
report serialization.

Conventions, fixed for reproducibility:
* predictions are reduced by arg-max with lowest-index tie-break;
* a zero denominator makes the affected precision/recall/F1 equal 0 rather
  than being skipped, so macro means stay well-defined;
* macro P and R are unweighted class means, and the macro F1 is their
  harmonic mean (per-class F1 scores are reported alongside).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REPORT_FORMAT_VERSION = 1

REPORT_FIELDS = ("setup", "backbone", "macro_p", "macro_r", "macro_f1",
                 "per_class", "confusion", "fn_rate", "positive_class")


class ReportSchemaError(RuntimeError):
    """A serialized metrics report is missing required fields."""


@dataclass
class MetricsReport:
    setup: str
    backbone: str
    macro_p: float
    macro_r: float
    macro_f1: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    confusion: list[list[int]]
    fn_rate: float
    positive_class: int
    extras: dict = field(default_factory=dict)


def confusion_matrix(pred_probs, true_labels, num_classes: int | None = None) -> np.ndarray:
    """Count matrix with rows = true class, columns = arg-max predicted class."""
    preds = np.asarray(pred_probs, dtype=np.float64)
    truths = np.asarray(true_labels, dtype=np.int64)
    if preds.ndim != 2:
        raise ValueError(f"pred_probs must be (n, K), got shape {preds.shape}")
    if truths.ndim != 1 or len(preds) != len(truths):
        raise ValueError(f"got {len(preds)} predictions for {len(truths)} true labels")
    k = preds.shape[1] if num_classes is None else num_classes
    if truths.size and (truths.min() < 0 or truths.max() >= k):
        raise ValueError(f"true labels outside [0, {k})")
    decisions = np.argmax(preds, axis=1)  # lowest index wins ties
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (truths, decisions), 1)
    return cm


def per_class_prf(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class precision, recall, and F1 with the zero-denominator -> 0 rule."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    precision = np.where(col > 0, tp / np.where(col > 0, col, 1), 0.0)
    recall = np.where(row > 0, tp / np.where(row > 0, row, 1), 0.0)
    pr = precision + recall
    f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1), 0.0)
    return precision, recall, f1


def macro_prf(cm: np.ndarray) -> tuple[float, float, float]:
    """Macro precision/recall (unweighted class means) and their harmonic-mean F1."""
    cm = np.asarray(cm)
    if cm.size == 0 or cm.sum() == 0:
        raise ValueError("confusion matrix is empty; nothing was evaluated")
    precision, recall, _ = per_class_prf(cm)
    macro_p = float(precision.mean())
    macro_r = float(recall.mean())
    macro_f1 = 0.0 if macro_p + macro_r == 0 else 2.0 * macro_p * macro_r / (macro_p + macro_r)
    return macro_p, macro_r, macro_f1


def false_negative_rate(cm: np.ndarray, positive: int) -> float:
    """FN / (TP + FN) for the designated positive class."""
    cm = np.asarray(cm)
    if not 0 <= positive < cm.shape[0]:
        raise ValueError(f"positive class {positive} outside [0, {cm.shape[0]})")
    row = cm[positive]
    total = int(row.sum())
    if total == 0:
        raise ValueError(f"positive class {positive} has no evaluated samples")
    fn = total - int(cm[positive, positive])
    return fn / total


def build_report(cm: np.ndarray, setup: str, backbone: str, positive_class: int = 0,
                 extras: dict | None = None) -> MetricsReport:
    precision, recall, f1 = per_class_prf(cm)
    macro_p, macro_r, macro_f1 = macro_prf(cm)
    return MetricsReport(
        setup=setup,
        backbone=backbone,
        macro_p=macro_p,
        macro_r=macro_r,
        macro_f1=macro_f1,
        precision=[float(v) for v in precision],
        recall=[float(v) for v in recall],
        f1=[float(v) for v in f1],
        confusion=[[int(v) for v in row] for row in np.asarray(cm)],
        fn_rate=false_negative_rate(cm, positive_class),
        positive_class=int(positive_class),
        extras=dict(extras or {}),
    )


def write_report(report: MetricsReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": REPORT_FORMAT_VERSION,
        "setup": report.setup,
        "backbone": report.backbone,
        "macro_p": report.macro_p,
        "macro_r": report.macro_r,
        "macro_f1": report.macro_f1,
        "per_class": {"precision": report.precision, "recall": report.recall, "f1": report.f1},
        "confusion": report.confusion,
        "fn_rate": report.fn_rate,
        "positive_class": report.positive_class,
        "extras": report.extras,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def read_report(path) -> MetricsReport:
    with open(path) as fh:
        payload = json.load(fh)
    missing = [name for name in REPORT_FIELDS if name not in payload]
    if missing:
        raise ReportSchemaError(f"report {path} is missing fields: {missing}")
    per_class = payload["per_class"]
    for part in ("precision", "recall", "f1"):
        if part not in per_class:
            raise ReportSchemaError(f"report {path} per_class is missing {part!r}")
    return MetricsReport(
        setup=payload["setup"],
        backbone=payload["backbone"],
        macro_p=payload["macro_p"],
        macro_r=payload["macro_r"],
        macro_f1=payload["macro_f1"],
        precision=list(per_class["precision"]),
        recall=list(per_class["recall"]),
        f1=list(per_class["f1"]),
        confusion=[list(row) for row in payload["confusion"]],
        fn_rate=payload["fn_rate"],
        positive_class=payload["positive_class"],
        extras=dict(payload.get("extras", {})),
    )


def render_table_row(report: MetricsReport) -> str:
    """One comparison-table line: setup then macro P, R, F1 at three decimals."""
    return f"{report.setup} {report.macro_p:.3f} {report.macro_r:.3f} {report.macro_f1:.3f}"


def render_comparison(reports: list[MetricsReport]) -> str:
    """Text table of all reports grouped by backbone: Model / Setup / P / R / F1."""
    if not reports:
        raise ValueError("no reports to render")
    setup_width = max(len("Setup"), max(len(r.setup) for r in reports))
    model_width = max(len("Model"), max(len(r.backbone) for r in reports))
    header = f"{'Model':<{model_width}}  {'Setup':<{setup_width}}  {'P':>6}  {'R':>6}  {'F1':>6}"
    lines = [header, "-" * len(header)]
    for report in sorted(reports, key=lambda r: (r.backbone, _setup_rank(r.setup))):
        lines.append(f"{report.backbone:<{model_width}}  {report.setup:<{setup_width}}  "
                     f"{report.macro_p:>6.3f}  {report.macro_r:>6.3f}  {report.macro_f1:>6.3f}")
    return "\n".join(lines) + "\n"


def _setup_rank(tag: str) -> tuple[int, str]:
    order = ("Real", "Mixup", "MMixup", "GeMix", "Real+Mixup", "Real+MMixup",
             "Real+GeMix", "Real+MMixup+GeMix")
    return (order.index(tag), tag) if tag in order else (len(order), tag)
