"""Confusion-matrix metrics with elephant = +1 as the positive class."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class Metrics:
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def _safe_div(num, den, what):
    if den == 0:
        warnings.warn(f"{what} undefined (zero denominator); reported as 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return num / den


def evaluate(predictions, truth) -> Metrics:
    p = np.asarray(predictions).ravel()
    t = np.asarray(truth).ravel()
    if p.size != t.size:
        raise ShapeError(f"{p.size} predictions vs {t.size} labels")
    if p.size == 0:
        raise ValueError("evaluate needs at least one row")
    pos_p, pos_t = p > 0, t > 0
    tp = int(np.sum(pos_p & pos_t))
    tn = int(np.sum(~pos_p & ~pos_t))
    fp = int(np.sum(pos_p & ~pos_t))
    fn = int(np.sum(~pos_p & pos_t))
    precision = _safe_div(tp, tp + fp, "precision")
    recall = _safe_div(tp, tp + fn, "recall")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(tp, tn, fp, fn, (tp + tn) / p.size, precision, recall, f1)
