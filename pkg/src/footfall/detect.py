"""Energy-ratio event detectors, segmentation, gating and event extraction."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import BoundaryError, ParseError, WindowError
from .signal import DEFAULT_RATE_HZ, Signal

log = logging.getLogger(__name__)

METHODS = ("sta_lta", "mer", "ccw")

# reference footfall length and gate bounds at 880 Hz:
# 190 samples ~ 215.90 ms, 66 samples = 75.00 ms, 312 samples = 354.55 ms
EVENT_LEN = 190
EVENT_LEN_MIN = 66
EVENT_LEN_MAX = 312

DEFAULT_WINDOWS = {
    "sta_lta": (64, 320),
    "mer": (190, 190),
    "ccw": (96, 96),
}


@dataclass(frozen=True)
class DetectorConfig:
    """Parameters of one detector run.

    ``short_len``/``long_len`` are the STA/LTA and CCW windows; MER uses
    ``long_len`` as its single window length L.
    """

    method: str = "sta_lta"
    short_len: int = 64
    long_len: int = 320
    threshold: float = 1.0
    epsilon: float = 1e-12
    bias: int = 0
    event_len: int = EVENT_LEN
    min_len: int = EVENT_LEN_MIN
    max_len: int = EVENT_LEN_MAX

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.short_len < 1:
            raise ValueError("short_len must be >= 1")
        if self.method != "mer" and self.long_len < self.short_len:
            raise ValueError("long_len must be >= short_len")
        if self.long_len < 1:
            raise ValueError("long_len must be >= 1")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.min_len <= self.event_len <= self.max_len:
            raise ValueError("need min_len <= event_len <= max_len")

    @classmethod
    def for_method(cls, method: str, **overrides) -> "DetectorConfig":
        s, l = DEFAULT_WINDOWS[method]
        return cls(method=method, short_len=s, long_len=l, **overrides)

    def with_(self, **changes) -> "DetectorConfig":
        return replace(self, **changes)

    def min_signal_len(self) -> int:
        if self.method == "sta_lta":
            return self.long_len + self.short_len + 1
        if self.method == "mer":
            return 2 * self.long_len + 1
        return 2 * self.long_len + self.short_len + 1


@dataclass(frozen=True)
class RatioSeries:
    values: np.ndarray
    valid_range: Tuple[int, int]
    method: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class DetectedSegment:
    start_index: int
    end_index: int
    method: str = ""

    @property
    def length(self) -> int:
        return self.end_index - self.start_index + 1

    @property
    def poi(self) -> int:
        return (self.start_index + self.end_index) // 2


@dataclass(frozen=True)
class ExtractedEvent:
    samples: np.ndarray
    poi: int
    start: int
    source_segment: DetectedSegment

    def __post_init__(self):
        v = np.array(self.samples, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "samples", v)


def _valid_range(cfg: DetectorConfig, n: int) -> Tuple[int, int]:
    s, l = cfg.short_len, cfg.long_len
    if cfg.method == "sta_lta":
        return s, n - l
    if cfg.method == "mer":
        return l, n - 1 - l
    h = s // 2
    return l + h, n - 1 - h - l


def _check_len(sig: Signal, cfg: DetectorConfig) -> np.ndarray:
    x = sig.samples if isinstance(sig, Signal) else np.asarray(sig, dtype=np.float64)
    if x.size < cfg.min_signal_len():
        raise WindowError(
            f"{cfg.method}: signal of {x.size} samples is shorter than the "
            f"{cfg.min_signal_len()} samples the windows require"
        )
    return x


def sta_lta(sig: Signal, cfg: DetectorConfig) -> RatioSeries:
    """Short leading window [n-s, n) over long trailing window [n, n+l), as mean energies."""
    cfg = cfg if cfg.method == "sta_lta" else cfg.with_(method="sta_lta")
    x = _check_len(sig, cfg)
    vals = kernels.sta_lta(x, cfg.short_len, cfg.long_len, cfg.epsilon)
    return RatioSeries(vals, _valid_range(cfg, x.size), "sta_lta")


def mer(sig: Signal, cfg: DetectorConfig) -> RatioSeries:
    """Modified energy ratio with window ``cfg.long_len``: (er[i] * |x[i]|)**3."""
    cfg = cfg if cfg.method == "mer" else cfg.with_(method="mer")
    x = _check_len(sig, cfg)
    vals = kernels.mer(x, cfg.long_len, cfg.epsilon)
    return RatioSeries(vals, _valid_range(cfg, x.size), "mer")


def ccw(sig: Signal, cfg: DetectorConfig) -> RatioSeries:
    """Centre window energy over the summed energies of two flanking windows."""
    cfg = cfg if cfg.method == "ccw" else cfg.with_(method="ccw")
    x = _check_len(sig, cfg)
    vals = kernels.ccw(x, cfg.short_len, cfg.long_len, cfg.epsilon)
    return RatioSeries(vals, _valid_range(cfg, x.size), "ccw")


_RATIO_FNS = {"sta_lta": sta_lta, "mer": mer, "ccw": ccw}


def ratio_series(sig: Signal, cfg: DetectorConfig) -> RatioSeries:
    return _RATIO_FNS[cfg.method](sig, cfg)


def threshold_segments(rs, cfg: DetectorConfig) -> List[DetectedSegment]:
    """Upward/downward crossing pairs of ``cfg.threshold``.

    The start index is the last sample below threshold before the rise and
    the end index is the last sample at or above it. A run still above
    threshold at the end of the series is dropped.
    """
    values = rs.values if isinstance(rs, RatioSeries) else np.asarray(rs, dtype=np.float64)
    method = rs.method if isinstance(rs, RatioSeries) else cfg.method
    th = cfg.threshold
    above = values >= th
    rises = np.flatnonzero(~above[:-1] & above[1:])
    falls = np.flatnonzero(above[:-1] & ~above[1:])
    segs = []
    # every fall after the first rise pairs with the closest preceding rise
    fi = 0
    for r in rises:
        while fi < falls.size and falls[fi] <= r:
            fi += 1
        if fi >= falls.size:
            break
        segs.append(DetectedSegment(int(r), int(falls[fi]), method))
        fi += 1
    return segs


def gate_by_length(segs: Sequence[DetectedSegment], cfg: DetectorConfig) -> List[DetectedSegment]:
    return [g for g in segs if cfg.min_len <= g.length <= cfg.max_len]


def extraction_window(seg: DetectedSegment, cfg: DetectorConfig) -> Tuple[int, int]:
    """Half-open ``[start, stop)`` of exactly ``event_len`` samples around the biased PoI."""
    centre = seg.poi + cfg.bias
    start = centre - cfg.event_len // 2
    return start, start + cfg.event_len


def extract_event(sig: Signal, seg: DetectedSegment, cfg: DetectorConfig) -> ExtractedEvent:
    x = sig.samples if isinstance(sig, Signal) else np.asarray(sig, dtype=np.float64)
    start, stop = extraction_window(seg, cfg)
    if start < 0 or stop > x.size:
        raise BoundaryError(
            f"extraction window [{start}, {stop}) outside signal of {x.size} samples"
        )
    return ExtractedEvent(x[start:stop], seg.poi + cfg.bias, start, seg)


def extract_events(sig: Signal, segs: Sequence[DetectedSegment], cfg: DetectorConfig) -> List[ExtractedEvent]:
    """Extract every segment, skipping (with a warning) those that hit the signal edges."""
    out = []
    for seg in segs:
        try:
            out.append(extract_event(sig, seg, cfg))
        except BoundaryError as exc:
            log.warning("skipping segment %s: %s", seg, exc)
    return out


def detect(sig: Signal, cfg: DetectorConfig, gate: bool = True) -> List[DetectedSegment]:
    segs = threshold_segments(ratio_series(sig, cfg), cfg)
    return gate_by_length(segs, cfg) if gate else segs


# ---------------------------------------------------------------------------
# packed event files
# ---------------------------------------------------------------------------

EVENT_COLUMNS = ("poi", "start", "segment_start", "segment_end", "label")


def write_events_csv(path, events: Sequence[ExtractedEvent], labels: Optional[Sequence[int]] = None) -> None:
    """One row per event: PoI, window start, source segment, label (0 = unknown), then samples."""
    width = max((ev.samples.size for ev in events), default=0)
    labels = [0] * len(events) if labels is None else list(labels)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(EVENT_COLUMNS) + [f"s{i}" for i in range(width)])
        for ev, lab in zip(events, labels):
            seg = ev.source_segment
            w.writerow([ev.poi, ev.start, seg.start_index, seg.end_index, int(lab)]
                       + [repr(float(v)) for v in ev.samples])


def read_events_csv(path) -> Tuple[List[ExtractedEvent], np.ndarray]:
    """Inverse of :func:`write_events_csv`; returns ``(events, labels)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0][: len(EVENT_COLUMNS)]) != EVENT_COLUMNS:
        raise ParseError(f"{path}: not an events file (expected columns {EVENT_COLUMNS})")
    width = len(rows[0]) - len(EVENT_COLUMNS)
    events, labels = [], []
    for row_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(EVENT_COLUMNS) + width:
            raise ParseError(f"{path}: row {row_no}: expected {len(EVENT_COLUMNS) + width} columns, got {len(row)}")
        try:
            poi, start, s0, s1, lab = (int(c) for c in row[: len(EVENT_COLUMNS)])
            samples = np.array([float(c) for c in row[len(EVENT_COLUMNS):]])
        except ValueError:
            raise ParseError(f"{path}: row {row_no}: non-numeric cell") from None
        events.append(ExtractedEvent(samples, poi, start, DetectedSegment(s0, s1)))
        labels.append(lab)
    return events, np.array(labels, dtype=np.int64)


# ---------------------------------------------------------------------------
# benchmarking against ground truth
# ---------------------------------------------------------------------------


def match_matrix(segs: Sequence[DetectedSegment], truth: Sequence[int], tol: int) -> np.ndarray:
    """``M[k, t]`` is True when truth centre ``t`` lies within ``tol`` samples of segment ``k``."""
    t = np.asarray(truth, dtype=np.int64)
    if not segs or t.size == 0:
        return np.zeros((len(segs), t.size), dtype=bool)
    starts = np.array([g.start_index for g in segs])[:, None]
    ends = np.array([g.end_index for g in segs])[:, None]
    return (t[None, :] >= starts - tol) & (t[None, :] <= ends + tol)


def score_segments(segs: Sequence[DetectedSegment], truth: Sequence[int], tol: int) -> dict:
    """Detected / missed / merged counts plus event-level precision, recall and F1.

    A truth centre is detected when exactly one segment matches it, missed
    when none does. A segment matching two or more centres is merged.
    """
    M = match_matrix(segs, truth, tol)
    per_truth = M.sum(axis=0)
    per_seg = M.sum(axis=1)
    detected = int(np.sum(per_truth == 1))
    missed = int(np.sum(per_truth == 0))
    merged = int(np.sum(per_seg >= 2))
    hit_truth = int(np.sum(per_truth >= 1))
    true_segs = int(np.sum(per_seg >= 1))
    precision = true_segs / len(segs) if segs else 0.0
    recall = hit_truth / len(truth) if len(truth) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return dict(
        detected=detected,
        missed=missed,
        merged=merged,
        false_alarms=int(np.sum(per_seg == 0)),
        precision=precision,
        recall=recall,
        f1=f1,
    )


@dataclass
class BenchRow:
    method: str
    detected: int
    missed: int
    merged: int
    exec_time_ms: float


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)

    def by_method(self, method: str) -> BenchRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_json(self) -> str:
        return json.dumps([asdict(r) for r in self.rows], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        return cls([BenchRow(**d) for d in json.loads(text)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Method", "Detected", "Missed", "Merged", "Execution Time (ms)"])
        names = {"sta_lta": "STA/LTA", "mer": "MER", "ccw": "CCW"}
        for r in self.rows:
            w.writerow([names.get(r.method, r.method), r.detected, r.missed, r.merged, f"{r.exec_time_ms:.4f}"])
        return buf.getvalue()


def time_ratio(sig: Signal, cfg: DetectorConfig, repeats: int = 7) -> Tuple[RatioSeries, float]:
    """Median wall-clock milliseconds of the ratio computation (after one warm-up call)."""
    rs = ratio_series(sig, cfg)
    times = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        rs = ratio_series(sig, cfg)
        times.append((time.perf_counter() - t0) * 1e3)
    return rs, float(np.median(times))


def run_detector_benchmark(
    sig: Signal,
    truth: Sequence[int],
    configs: Sequence[DetectorConfig],
    repeats: int = 7,
) -> BenchReport:
    """Score each detector's raw threshold segments against ground-truth centres.

    Segments are not length-gated here: a merged segment is typically too
    long to survive the gate and would otherwise never be counted.
    """
    truth = sorted(int(t) for t in truth)
    report = BenchReport()
    for cfg in configs:
        rs, ms = time_ratio(sig, cfg, repeats)
        segs = threshold_segments(rs, cfg)
        sc = score_segments(segs, truth, cfg.event_len // 2)
        report.rows.append(BenchRow(cfg.method, sc["detected"], sc["missed"], sc["merged"], ms))
    return report
