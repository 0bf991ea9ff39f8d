"""Point-level precision/recall/F1 against ground-truth labels.

A point counts as true positive when both prediction and truth say
'marking'; ratios with empty denominators are reported as absent rather
than forced to a number. Frame reports aggregate by summing counts first
(micro-averaging), matching how multi-frame result tables are built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float | None
    recall: float | None
    f1: float | None
    channel: str = ""
    per_frame: list = field(default_factory=list)

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, channel: str = "") -> "EvalReport":
        precision = tp / (tp + fp) if tp + fp > 0 else None
        recall = tp / (tp + fn) if tp + fn > 0 else None
        if precision is None or recall is None or precision + recall == 0:
            f1 = None
        else:
            f1 = 2 * precision * recall / (precision + recall)
        return cls(tp, fp, fn, precision, recall, f1, channel)


def evaluate(predicted, truth, channel: str = "") -> EvalReport:
    """Count TP/FP/FN between predicted and ground-truth label sequences."""
    pred = np.asarray(predicted, dtype="U7")
    true = np.asarray(truth, dtype="U7")
    if pred.shape != true.shape:
        raise StructuralError(
            f"label length mismatch: predicted {pred.shape[0]}, truth {true.shape[0]}"
        )
    pred_m = pred == "marking"
    true_m = true == "marking"
    tp = int(np.sum(pred_m & true_m))
    fp = int(np.sum(pred_m & ~true_m))
    fn = int(np.sum(~pred_m & true_m))
    return EvalReport.from_counts(tp, fp, fn, channel)


def aggregate(reports) -> EvalReport:
    """Micro-average: sum counts across reports, then recompute the ratios."""
    reports = list(reports)
    if not reports:
        raise StructuralError("cannot aggregate zero reports")
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    channels = {r.channel for r in reports}
    channel = channels.pop() if len(channels) == 1 else ""
    out = EvalReport.from_counts(tp, fp, fn, channel)
    out.per_frame = reports
    return out


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}%"


def format_report_table(rows) -> str:
    """Delimited table with one row per (dataset, channel, report)."""
    lines = ["dataset\tchannel\tprecision\trecall\tf1"]
    for dataset, channel, report in rows:
        lines.append(
            f"{dataset}\t{channel}\t{_fmt(report.precision)}\t"
            f"{_fmt(report.recall)}\t{_fmt(report.f1)}"
        )
    return "\n".join(lines) + "\n"


def report_rows_to_json(rows) -> str:
    payload = []
    for dataset, channel, report in rows:
        payload.append({
            "dataset": dataset,
            "channel": channel,
            "tp": report.tp,
            "fp": report.fp,
            "fn": report.fn,
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
        })
    return json.dumps(payload, indent=2) + "\n"
