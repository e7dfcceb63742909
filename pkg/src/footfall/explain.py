"""Exact Shapley attributions by enumerating every feature coalition."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import FootfallError
from .features import FEATURE_NAMES

MAX_FEATURES = 20


class NonFiniteOutputError(FootfallError, FloatingPointError):
    def __init__(self, coalition):
        super().__init__(f"model output is not finite for coalition {list(coalition)}")
        self.coalition = tuple(coalition)


@dataclass(frozen=True)
class ShapExplanation:
    phi: np.ndarray
    base_value: float
    model_output: float
    feature_names: tuple = FEATURE_NAMES

    def to_dict(self) -> dict:
        return {
            "phi": dict(zip(self.feature_names, map(float, self.phi))),
            "base_value": self.base_value,
            "model_output": self.model_output,
        }


@dataclass(frozen=True)
class ImpactSummary:
    feature_names: tuple
    mean_abs_phi: np.ndarray
    ranking: tuple

    def to_dict(self) -> dict:
        return {
            "mean_abs_phi": dict(zip(self.feature_names, map(float, self.mean_abs_phi))),
            "ranking": list(self.ranking),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "mean_abs_phi"])
        order = {n: i for i, n in enumerate(self.feature_names)}
        for name in self.ranking:
            w.writerow([name, repr(float(self.mean_abs_phi[order[name]]))])
        return buf.getvalue()


def _as_row(v) -> np.ndarray:
    return np.asarray(v.to_array() if hasattr(v, "to_array") else v, dtype=np.float64)


def coalition_weights(d: int) -> np.ndarray:
    """``w[k] = k! (d - k - 1)! / d!`` for coalition sizes k = 0 .. d-1."""
    return np.array(
        [math.factorial(k) * math.factorial(d - k - 1) / math.factorial(d) for k in range(d)]
    )


def coalition_values(predict: Callable, background, instance) -> np.ndarray:
    """Model value for every coalition, indexed by bitmask (bit i set = feature i from ``instance``).

    Features outside the coalition take background values; with several
    background rows the value is averaged over them.
    """
    x = _as_row(instance).ravel()
    bg = np.atleast_2d(_as_row(background))
    d = x.size
    if bg.shape[1] != d:
        raise ValueError(f"background has {bg.shape[1]} features, instance has {d}")
    if d > MAX_FEATURES:
        raise ValueError(f"exact enumeration over {d} features is not supported")
    masks = np.arange(1 << d)
    bits = ((masks[:, None] >> np.arange(d)) & 1).astype(bool)
    total = np.zeros(masks.size)
    for b in bg:
        total += np.asarray(predict(np.where(bits, x, b)), dtype=np.float64).ravel()
    F = total / bg.shape[0]
    bad = np.flatnonzero(~np.isfinite(F))
    if bad.size:
        raise NonFiniteOutputError(np.flatnonzero(bits[bad[0]]))
    return F


def exact_shapley(
    predict: Callable,
    background,
    instance,
    feature_names: Optional[Sequence[str]] = None,
) -> ShapExplanation:
    """Shapley values of ``predict`` at ``instance`` relative to ``background``.

    ``predict`` maps an ``(m, d)`` array to ``m`` scores (SVM decision value,
    ANN probability, or any black box).
    """
    F = coalition_values(predict, background, instance)
    d = int(round(math.log2(F.size)))
    w = coalition_weights(d)
    masks = np.arange(F.size)
    sizes = np.array([bin(m).count("1") for m in masks])
    phi = np.zeros(d)
    for i in range(d):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.sum(w[sizes[without]] * (F[without | bit] - F[without]))
    names = tuple(feature_names) if feature_names is not None else (
        FEATURE_NAMES if d == len(FEATURE_NAMES) else tuple(f"x{i}" for i in range(d))
    )
    return ShapExplanation(phi, float(F[0]), float(F[-1]), names)


def impact_summary(explanations: Sequence[ShapExplanation]) -> ImpactSummary:
    """Mean |phi| per feature, ranked descending (ties keep canonical order)."""
    if not explanations:
        raise ValueError("impact_summary needs at least one explanation")
    names = explanations[0].feature_names
    mean_abs = np.mean([np.abs(e.phi) for e in explanations], axis=0)
    order = np.argsort(-mean_abs, kind="stable")
    return ImpactSummary(tuple(names), mean_abs, tuple(names[i] for i in order))


def scoring_function(model) -> Callable:
    """Raw-feature scoring callable: SVM decision value or ANN probability."""
    if hasattr(model, "predict_proba"):
        return model.predict_proba
    return model.decision_function


def explain_dataset(model, X, background=None) -> List[ShapExplanation]:
    """Explain every row of ``X`` (raw features); background defaults to the column means of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    bg = X.mean(axis=0) if background is None else background
    f = scoring_function(model)
    return [exact_shapley(f, bg, row) for row in X]
