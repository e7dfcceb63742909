"""Synthetic footfall scenes with ground truth, and labelled feature datasets.

Pulses are envelope-modulated sinusoids. With the Gaussian envelope the
-20 dB extent of the envelope equals ``duration_samples``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .classify.data import Dataset
from .detect import (
    EVENT_LEN_MAX,
    EVENT_LEN_MIN,
    DetectorConfig,
    extract_events,
    gate_by_length,
    match_matrix,
    ratio_series,
    score_segments,
    threshold_segments,
)
from .errors import DegenerateInputError, ShortfallError
from .features import FEATURE_NAMES, ReferencePattern, extract_features
from .signal import DEFAULT_RATE_HZ, PIPELINE_FILTERS, FilterSpec, Signal, apply_filters

log = logging.getLogger(__name__)

ELEPHANT = 1
NON_ELEPHANT = -1


@dataclass(frozen=True)
class PulseSpec:
    dominant_freq_hz: float = 20.0
    duration_samples: int = 190
    envelope: str = "gaussian"
    amplitude: float = 1.0
    front_rear_pair: bool = False
    rear_ratio: float = 0.5
    rear_delay_samples: Optional[int] = None  # defaults to duration_samples
    overtone_hz: Optional[float] = None
    overtone_ratio: float = 0.0

    def validate(self, elephant: bool = False) -> None:
        if self.envelope not in ("gaussian", "hann"):
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if self.duration_samples < 2:
            raise ValueError("duration_samples must be >= 2")
        if self.dominant_freq_hz <= 0:
            raise ValueError("dominant_freq_hz must be > 0")
        if not 0 <= self.rear_ratio < 1:
            raise ValueError("rear_ratio must lie in [0, 1)")
        if elephant and not EVENT_LEN_MIN <= self.duration_samples <= EVENT_LEN_MAX:
            raise ValueError(
                f"elephant pulse duration {self.duration_samples} outside [{EVENT_LEN_MIN}, {EVENT_LEN_MAX}]"
            )

    @property
    def rear_delay(self) -> int:
        return self.duration_samples if self.rear_delay_samples is None else self.rear_delay_samples

    @property
    def extent(self) -> int:
        """Number of samples :func:`gen_pulse` returns."""
        return self.duration_samples + (self.rear_delay if self.front_rear_pair else 0)


def envelope(spec: PulseSpec) -> np.ndarray:
    d = spec.duration_samples
    t = np.arange(d) - (d - 1) / 2.0
    if spec.envelope == "gaussian":
        sigma = (d / 2.0) / np.sqrt(2.0 * np.log(10.0))
        return np.exp(-0.5 * (t / sigma) ** 2)
    return np.hanning(d + 2)[1:-1]


def _single(spec: PulseSpec, amplitude: float, rate: float, rng: np.random.Generator) -> np.ndarray:
    d = spec.duration_samples
    t = (np.arange(d) - (d - 1) / 2.0) / rate
    carrier = np.cos(2 * np.pi * spec.dominant_freq_hz * t + rng.uniform(0, 2 * np.pi))
    if spec.overtone_hz is not None and spec.overtone_ratio > 0:
        carrier = carrier + spec.overtone_ratio * np.cos(
            2 * np.pi * spec.overtone_hz * t + rng.uniform(0, 2 * np.pi)
        )
    return amplitude * envelope(spec) * carrier


def gen_pulse(spec: PulseSpec = PulseSpec(), rate: float = DEFAULT_RATE_HZ, seed: int = 0) -> np.ndarray:
    """Samples of one footfall-like pulse; the main pulse is centred in the first ``duration_samples``."""
    spec.validate()
    rng = np.random.default_rng(seed)
    out = np.zeros(spec.extent)
    out[: spec.duration_samples] = _single(spec, spec.amplitude, rate, rng)
    if spec.front_rear_pair:
        k = spec.rear_delay
        out[k : k + spec.duration_samples] += _single(spec, spec.amplitude * spec.rear_ratio, rate, rng)
    return out


def reference_pattern(spec: PulseSpec = PulseSpec(), rate: float = DEFAULT_RATE_HZ) -> ReferencePattern:
    """Canonical template: the default pulse with zero carrier phase at the centre."""
    d = spec.duration_samples
    t = (np.arange(d) - (d - 1) / 2.0) / rate
    return ReferencePattern(envelope(spec) * np.cos(2 * np.pi * spec.dominant_freq_hz * t))


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Placement:
    center: int
    pulse: PulseSpec = PulseSpec()
    label: int = ELEPHANT
    allow_overlap: bool = False


@dataclass(frozen=True)
class SceneSpec:
    duration_s: float = 5.2
    placements: Tuple[Placement, ...] = ()
    noise_sigma: float = 0.1
    tone_hz: float = 55.0
    tone_amplitude: float = 0.0
    seed: int = 0
    rate: float = DEFAULT_RATE_HZ

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.rate))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["placements"] = [asdict(p) for p in self.placements]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        placements = tuple(
            Placement(
                center=int(p["center"]),
                pulse=PulseSpec(**p.get("pulse", {})),
                label=int(p.get("label", ELEPHANT)),
                allow_overlap=bool(p.get("allow_overlap", False)),
            )
            for p in d.pop("placements", [])
        )
        return cls(placements=placements, **d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GroundTruth:
    centers: np.ndarray
    labels: np.ndarray
    pulses: Tuple[PulseSpec, ...]

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "labels": self.labels.tolist(),
            "pulses": [asdict(p) for p in self.pulses],
        }

    @classmethod
    def from_dict(cls, d) -> "GroundTruth":
        return cls(
            np.asarray(d["centers"], dtype=np.int64),
            np.asarray(d["labels"], dtype=np.int64),
            tuple(PulseSpec(**p) for p in d["pulses"]),
        )


def _span(p: Placement) -> Tuple[int, int]:
    start = p.center - p.pulse.duration_samples // 2
    return start, start + p.pulse.extent


def gen_scene(spec: SceneSpec) -> Tuple[Signal, GroundTruth]:
    """Placed pulses + white noise + optional tone, with the list of placements as ground truth."""
    n = spec.n_samples
    placements = sorted(spec.placements, key=lambda p: p.center)
    for a, b in zip(placements, placements[1:]):
        if a.center == b.center:
            raise ValueError(f"duplicate pulse centre {a.center}")
        if _span(a)[1] > _span(b)[0] and not (a.allow_overlap or b.allow_overlap):
            raise ValueError(f"pulses at {a.center} and {b.center} overlap (set allow_overlap)")
    for p in placements:
        p.pulse.validate(elephant=p.label == ELEPHANT)
        s, e = _span(p)
        if s < 0 or e > n:
            raise ValueError(f"pulse at {p.center} does not fit inside {n} samples")
    rng = np.random.default_rng(spec.seed)
    pulse_seeds = rng.integers(0, 2**63 - 1, size=len(placements))
    x = np.zeros(n)
    for p, ps in zip(placements, pulse_seeds):
        s, e = _span(p)
        x[s:e] += gen_pulse(p.pulse, spec.rate, int(ps))
    if spec.noise_sigma > 0:
        x += rng.normal(0.0, spec.noise_sigma, size=n)
    if spec.tone_amplitude > 0:
        t = np.arange(n) / spec.rate
        x += spec.tone_amplitude * np.sin(2 * np.pi * spec.tone_hz * t + rng.uniform(0, 2 * np.pi))
    truth = GroundTruth(
        np.array([p.center for p in placements], dtype=np.int64),
        np.array([p.label for p in placements], dtype=np.int64),
        tuple(p.pulse for p in placements),
    )
    return Signal(x, spec.rate), truth


def noise_sigma_for_snr(amplitude: float, snr_db: float) -> float:
    """Noise RMS giving ``snr_db`` = 20 log10(peak pulse amplitude / noise RMS)."""
    return amplitude / 10.0 ** (snr_db / 20.0)


def default_scene(
    seed: int = 0,
    n_pulses: int = 10,
    duration_s: float = 5.2,
    snr_db: float = 20.0,
    pulse: PulseSpec = PulseSpec(),
    label: int = ELEPHANT,
    rate: float = DEFAULT_RATE_HZ,
    lead: int = 260,
    tail: int = 460,
    jitter: int = 20,
    tone_amplitude: float = 0.0,
) -> SceneSpec:
    """Evenly spaced pulses (with seeded jitter) leaving detector margins at both ends."""
    n = int(round(duration_s * rate))
    rng = np.random.default_rng(seed)
    if n_pulses == 1:
        centers = np.array([lead])
    else:
        centers = np.linspace(lead, n - tail, n_pulses)
    centers = np.round(centers + rng.integers(-jitter, jitter + 1, size=n_pulses)).astype(int)
    placements = tuple(Placement(int(c), pulse, label) for c in centers)
    return SceneSpec(
        duration_s=duration_s,
        placements=placements,
        noise_sigma=noise_sigma_for_snr(pulse.amplitude, snr_db),
        tone_amplitude=tone_amplitude,
        seed=seed,
        rate=rate,
    )


def merge_scene(seed: int = 0, gap: int = 180, n_pairs: int = 3, snr_db: float = 20.0,
                rate: float = DEFAULT_RATE_HZ) -> SceneSpec:
    """Scene of closely spaced pulse pairs (``gap`` samples between centres) for merge tests."""
    n = int(round(5.2 * rate))
    pulse = PulseSpec()
    starts = np.linspace(300, n - 460 - gap, n_pairs).astype(int)
    placements = []
    for s in starts:
        placements.append(Placement(int(s), pulse, ELEPHANT, allow_overlap=True))
        placements.append(Placement(int(s + gap), replace(pulse, amplitude=0.8), ELEPHANT, allow_overlap=True))
    return SceneSpec(5.2, tuple(placements), noise_sigma_for_snr(1.0, snr_db), seed=seed, rate=rate)


# ---------------------------------------------------------------------------
# threshold / bias calibration
# ---------------------------------------------------------------------------


def default_grid(method: str) -> np.ndarray:
    if method == "mer":
        return np.geomspace(1e-3, 1e3, 121)
    return np.geomspace(0.05, 100.0, 111)


def _pooled_f1(cfg: DetectorConfig, series, scenes, gate: bool) -> float:
    tp = fp = fn = 0
    for rs, (_, truth) in zip(series, scenes):
        segs = threshold_segments(rs, cfg)
        if gate:
            segs = gate_by_length(segs, cfg)
        M = match_matrix(segs, truth.centers, cfg.event_len // 2)
        hit = M.sum(axis=0)
        tp += int(np.sum(hit >= 1))
        fn += int(np.sum(hit == 0))
        fp += int(np.sum(M.sum(axis=1) == 0))
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def threshold_f1_curve(cfg: DetectorConfig, scenes, grid, gate: bool = False) -> np.ndarray:
    series = [ratio_series(sig, cfg) for sig, _ in scenes]
    return np.array([_pooled_f1(cfg.with_(threshold=float(th)), series, scenes, gate) for th in grid])


def calibrate_threshold(cfg: DetectorConfig, scenes, grid=None, gate: bool = False) -> float:
    """Grid threshold with the best pooled event-level F1 over ``scenes``.

    ``scenes`` is a sequence of ``(Signal, GroundTruth)``. When several grid
    values tie, the middle one of the tied set is returned.
    """
    grid = default_grid(cfg.method) if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("threshold grid is empty")
    if not scenes:
        raise ValueError("calibration needs at least one scene")
    f1 = threshold_f1_curve(cfg, scenes, grid, gate)
    best = np.flatnonzero(f1 == f1.max())
    return float(grid[best[best.size // 2]])


def calibrate_bias(cfg: DetectorConfig, scenes, gate: bool = True) -> int:
    """Median offset from segment PoI to the matched truth centre (0 if nothing matches)."""
    offsets = []
    for sig, truth in scenes:
        segs = threshold_segments(ratio_series(sig, cfg), cfg)
        if gate:
            segs = gate_by_length(segs, cfg)
        M = match_matrix(segs, truth.centers, cfg.event_len // 2)
        for k, seg in enumerate(segs):
            hits = np.flatnonzero(M[k])
            if hits.size == 1:
                offsets.append(int(truth.centers[hits[0]]) - seg.poi)
    return int(np.round(np.median(offsets))) if offsets else 0


CALIBRATION_SEED = 1000


def calibration_scenes(seed: int = CALIBRATION_SEED, n_scenes: int = 2, rate: float = DEFAULT_RATE_HZ,
                       filters: Sequence[FilterSpec] = ()) -> List[Tuple[Signal, GroundTruth]]:
    """Seeded default elephant scenes, passed through ``filters``."""
    out = []
    for i in range(n_scenes):
        sig, truth = gen_scene(default_scene(seed=seed + i, rate=rate))
        out.append((apply_filters(sig, filters), truth))
    return out


def calibrated_detector(method: str = "sta_lta", seed: int = CALIBRATION_SEED, n_scenes: int = 2,
                        rate: float = DEFAULT_RATE_HZ, gate: bool = False,
                        filters: Sequence[FilterSpec] = (), **overrides) -> DetectorConfig:
    """Detector with threshold and bias tuned on seeded default elephant scenes.

    ``filters`` are applied to the calibration scenes first, so the tuned
    bias absorbs the group delay of the same causal chain used downstream.
    """
    cfg = DetectorConfig.for_method(method, **overrides)
    scenes = calibration_scenes(seed, n_scenes, rate, filters)
    cfg = cfg.with_(threshold=calibrate_threshold(cfg, scenes, gate=gate))
    return cfg.with_(bias=calibrate_bias(cfg, scenes))


# ---------------------------------------------------------------------------
# labelled datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassSpec:
    """A pulse family with per-event random variation."""

    name: str
    label: int
    pulse: PulseSpec
    freq_jitter_hz: float = 2.0
    duration_jitter: int = 20
    amplitude_range: Tuple[float, float] = (0.7, 1.0)

    def draw(self, rng: np.random.Generator) -> PulseSpec:
        d = int(self.pulse.duration_samples + rng.integers(-self.duration_jitter, self.duration_jitter + 1))
        if self.label == ELEPHANT:
            d = int(np.clip(d, EVENT_LEN_MIN, EVENT_LEN_MAX))
        return replace(
            self.pulse,
            dominant_freq_hz=float(self.pulse.dominant_freq_hz + rng.uniform(-self.freq_jitter_hz, self.freq_jitter_hz)),
            duration_samples=max(d, 2),
            amplitude=float(rng.uniform(*self.amplitude_range)),
        )


ELEPHANT_CLASS = ClassSpec("elephant", ELEPHANT, PulseSpec(20.0, 190))
CONFUSER_CLASS = ClassSpec("confuser", NON_ELEPHANT, PulseSpec(60.0, 80), freq_jitter_hz=4.0, duration_jitter=8)
# dominant band overlaps the elephant band; a strong overtone (kept below the
# mains band-stop) changes the waveform shape
WET_SOIL_CATTLE_CLASS = ClassSpec(
    "wet_soil_cattle",
    NON_ELEPHANT,
    PulseSpec(20.0, 190, overtone_hz=40.0, overtone_ratio=0.8),
)

DEFAULT_CLASSES = (ELEPHANT_CLASS, CONFUSER_CLASS)


def class_scene(cls: ClassSpec, seed: int, n_pulses: int = 10, snr_db: float = 20.0,
                rate: float = DEFAULT_RATE_HZ) -> SceneSpec:
    rng = np.random.default_rng(seed)
    base = default_scene(seed=seed, n_pulses=n_pulses, snr_db=snr_db, rate=rate)
    placements = tuple(replace(p, pulse=cls.draw(rng), label=cls.label) for p in base.placements)
    return replace(base, placements=placements, noise_sigma=noise_sigma_for_snr(1.0, snr_db))


def mixed_scene(classes: Sequence[ClassSpec], seed: int, n_pulses: int = 10, snr_db: float = 20.0,
                rate: float = DEFAULT_RATE_HZ, duration_s: float = 5.2) -> SceneSpec:
    """Default scene layout with each pulse drawn from a randomly chosen class."""
    if not classes:
        raise ValueError("mixed_scene needs at least one class")
    rng = np.random.default_rng(seed)
    base = default_scene(seed=seed, n_pulses=n_pulses, snr_db=snr_db, rate=rate, duration_s=duration_s)
    placements = []
    for p in base.placements:
        cls = classes[int(rng.integers(len(classes)))]
        placements.append(replace(p, pulse=cls.draw(rng), label=cls.label))
    return replace(base, placements=tuple(placements), noise_sigma=noise_sigma_for_snr(1.0, snr_db))


CLASS_PRESETS: Dict[str, ClassSpec] = {
    c.name: c for c in (ELEPHANT_CLASS, CONFUSER_CLASS, WET_SOIL_CATTLE_CLASS)
}


def scene_events(sig: Signal, truth: GroundTruth, cfg: DetectorConfig, ref: ReferencePattern,
                 filters: Sequence[FilterSpec] = ()):
    """Filter, detect, gate, extract and featurise one scene.

    Returns ``(X, labels, centres)``; events that match no truth centre
    (false alarms) are dropped.
    """
    sig = apply_filters(sig, filters)
    segs = gate_by_length(threshold_segments(ratio_series(sig, cfg), cfg), cfg)
    M = match_matrix(segs, truth.centers, cfg.event_len // 2)
    rows, labels, centres = [], [], []
    events = extract_events(sig, segs, cfg)
    by_seg = {ev.source_segment: ev for ev in events}
    for k, seg in enumerate(segs):
        hits = np.flatnonzero(M[k])
        if hits.size != 1 or seg not in by_seg:
            continue
        try:
            fv = extract_features(by_seg[seg].samples, seg, ref, sig.sample_rate_hz)
        except DegenerateInputError:
            continue
        rows.append(fv.to_array())
        labels.append(int(truth.labels[hits[0]]))
        centres.append(int(truth.centers[hits[0]]))
    X = np.array(rows).reshape(-1, len(FEATURE_NAMES))
    return X, np.array(labels, dtype=np.int64), np.array(centres, dtype=np.int64)


def gen_labeled_dataset(
    n_per_class: int,
    classes: Sequence[ClassSpec] = DEFAULT_CLASSES,
    rate: float = DEFAULT_RATE_HZ,
    seed: int = 0,
    detector: Optional[DetectorConfig] = None,
    ref: Optional[ReferencePattern] = None,
    snr_db: float = 20.0,
    max_scenes: int = 200,
    filters: Sequence[FilterSpec] = PIPELINE_FILTERS,
) -> Dataset:
    """Run the filter -> detect -> extract -> featurise pipeline on generated scenes.

    Each class gets its own scenes; rows carry the class name as provenance.
    The default detector is STA/LTA calibrated through the same ``filters``.
    Raises :class:`ShortfallError` if a class yields fewer than
    ``n_per_class`` events within ``max_scenes`` scenes.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    cfg = detector or calibrated_detector("sta_lta", rate=rate, filters=filters)
    ref = ref or reference_pattern(rate=rate)
    Xs, ys, prov = [], [], []
    counts = {}
    for ci, cls in enumerate(classes):
        got = []
        for k in range(max_scenes):
            scene_seed = seed * 100_003 + ci * 10_007 + k
            sig, truth = gen_scene(class_scene(cls, scene_seed, snr_db=snr_db, rate=rate))
            X, _, _ = scene_events(sig, truth, cfg, ref, filters)
            got.extend(X)
            if len(got) >= n_per_class:
                break
        counts[cls.name] = len(got)
        if len(got) < n_per_class:
            raise ShortfallError(
                f"class {cls.name!r}: pipeline produced {len(got)} events, {n_per_class} requested",
                counts,
            )
        Xs.append(np.array(got[:n_per_class]))
        ys.append(np.full(n_per_class, cls.label))
        prov.extend([cls.name] * n_per_class)
    return Dataset(np.vstack(Xs), np.concatenate(ys), tuple(prov))
