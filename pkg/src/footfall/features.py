"""The nine per-event features and their CSV interchange format."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import DegenerateInputError, ParseError, ShapeError
from .signal import DEFAULT_RATE_HZ, normalize_amplitude, power_spectrum

FEATURE_NAMES = (
    "event_length",
    "zero_crossings",
    "pred_frequency",
    "max_cross_corr",
    "cross_corr_0",
    "mse",
    "dtw",
    "skewness",
    "kurtosis",
)

# column headers of the interchange CSV, in canonical order
FEATURE_HEADERS = (
    "Event Length",
    "Zero Crossings",
    "Pred. Frequency",
    "Max Cross-Corr",
    "Cross-Corr (0)",
    "MSE",
    "DTW",
    "Skewness",
    "Kurtosis",
)
LABEL_HEADER = "Label"


@dataclass(frozen=True)
class ReferencePattern:
    """Amplitude-normalised template footfall."""

    samples: np.ndarray

    def __post_init__(self):
        x = normalize_amplitude(np.asarray(self.samples, dtype=np.float64).ravel())
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @classmethod
    def load(cls, path) -> "ReferencePattern":
        from .signal import load_signal

        return cls(load_signal(path).samples)


@dataclass(frozen=True)
class FeatureVector:
    event_length: float
    zero_crossings: float
    pred_frequency: float
    max_cross_corr: float
    cross_corr_0: float
    mse: float
    dtw: float
    skewness: float
    kurtosis: float

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "FeatureVector":
        a = np.asarray(a, dtype=np.float64).ravel()
        if a.size != len(FEATURE_NAMES):
            raise ShapeError(f"expected {len(FEATURE_NAMES)} features, got {a.size}")
        return cls(*(float(v) for v in a))


def _as1d(x) -> np.ndarray:
    return np.asarray(getattr(x, "samples", x), dtype=np.float64).ravel()


def zero_crossings(ev) -> int:
    x = _as1d(ev)
    if x.size < 2:
        raise ValueError("zero_crossings needs at least 2 samples")
    return int(np.count_nonzero(x[:-1] * x[1:] < 0))


def predominant_frequency(ev, rate: float = DEFAULT_RATE_HZ) -> float:
    """Frequency of the largest non-DC power bin (zero-padded FFT)."""
    x = _as1d(ev)
    if x.size < 2:
        raise ValueError("predominant_frequency needs at least 2 samples")
    if not np.any(x):
        raise DegenerateInputError("predominant frequency of an all-zero event is undefined")
    from .signal import Signal

    return power_spectrum(Signal(x, rate)).peak_hz(exclude_dc=True)


def _check_same_len(x, y):
    if x.size != y.size:
        raise ShapeError(f"length mismatch: event {x.size} vs reference {y.size}")


def cross_correlation_series(ev, ref) -> Tuple[np.ndarray, np.ndarray]:
    """``(lags, R)`` with ``R[tau] = sum_n x[n] * y[n + tau]``, y zero outside its support."""
    x, y = _as1d(ev), _as1d(ref)
    n = x.size
    # np.correlate(y, x, "full")[k] = sum_n y[n + k - (n_x - 1)] * x[n]
    r = np.correlate(y, x, mode="full")
    lags = np.arange(-(n - 1), y.size)
    return lags, r


def cross_correlation(ev, ref) -> Tuple[float, float]:
    """Return ``(max over all lags, value at lag 0)``."""
    x, y = _as1d(ev), _as1d(ref)
    _check_same_len(x, y)
    lags, r = cross_correlation_series(x, y)
    return float(r.max()), float(r[x.size - 1])


def mse(ev, ref) -> float:
    x, y = _as1d(ev), _as1d(ref)
    _check_same_len(x, y)
    return float(np.mean((x - y) ** 2))


def dtw_cost(ev, ref) -> float:
    """Minimal summed |x_i - y_j| over monotone warping paths (steps (1,0), (0,1), (1,1))."""
    x, y = _as1d(ev), _as1d(ref)
    if x.size == 0 or y.size == 0:
        raise ValueError("dtw_cost needs non-empty inputs")
    return kernels.dtw(x, y)


def _central_moments(x):
    if x.size < 2:
        raise ValueError("moments need at least 2 samples")
    d = x - x.mean()
    var = np.mean(d * d)
    if var == 0.0:
        raise DegenerateInputError("standard deviation is zero (constant event)")
    return d, var


def skewness(ev) -> float:
    d, var = _central_moments(_as1d(ev))
    return float(np.mean(d**3) / var**1.5)


def kurtosis(ev) -> float:
    """Population kurtosis (3.0 for a normal distribution, no excess correction)."""
    d, var = _central_moments(_as1d(ev))
    return float(np.mean(d**4) / var**2)


def extract_features(ev, seg, ref: ReferencePattern, rate: float = DEFAULT_RATE_HZ) -> FeatureVector:
    """Feature vector of one extracted event.

    ``seg`` supplies the pre-extraction length; it may be a
    :class:`~footfall.detect.DetectedSegment` or a plain integer length.
    Raises :class:`DegenerateInputError` when any feature is undefined.
    """
    x = normalize_amplitude(_as1d(ev))
    length = seg if isinstance(seg, (int, np.integer)) else seg.end_index - seg.start_index + 1
    rmax, r0 = cross_correlation(x, ref.samples)
    return FeatureVector(
        event_length=float(length),
        zero_crossings=float(zero_crossings(x)),
        pred_frequency=predominant_frequency(x, rate),
        max_cross_corr=rmax,
        cross_corr_0=r0,
        mse=mse(x, ref.samples),
        dtw=dtw_cost(x, ref.samples),
        skewness=skewness(x),
        kurtosis=kurtosis(x),
    )


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def write_feature_csv(path, X: np.ndarray, labels: Sequence[int]) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(FEATURE_HEADERS) + [LABEL_HEADER])
        for row, lab in zip(X, labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def read_feature_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read ``(X, labels)``; labels must be -1 or +1."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty feature file")
    header = [h.strip() for h in rows[0]]
    expected = list(FEATURE_HEADERS) + [LABEL_HEADER]
    if header != expected:
        raise ParseError(f"{path}: header {header} does not match {expected}")
    X, y = [], []
    for row_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise ParseError(f"{path}: row {row_no}: expected {len(expected)} columns, got {len(row)}")
        try:
            vals = [float(c) for c in row[:-1]]
            lab = int(float(row[-1]))
        except ValueError:
            raise ParseError(f"{path}: row {row_no}: non-numeric cell") from None
        if lab not in (-1, 1):
            raise ParseError(f"{path}: row {row_no}: label must be -1 or 1, got {lab}")
        if not np.all(np.isfinite(vals)):
            raise ParseError(f"{path}: row {row_no}: non-finite feature value")
        X.append(vals)
        y.append(lab)
    return np.asarray(X, dtype=np.float64).reshape(-1, len(FEATURE_NAMES)), np.asarray(y, dtype=np.int64)
