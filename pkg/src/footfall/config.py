"""Pipeline configuration: JSON parsing, validation and round-tripping.

Every field has a default, so ``{}`` is a valid document. ``to_dict`` always
writes every field, making the defaults explicit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .classify.svm import KERNELS
from .detect import EVENT_LEN, EVENT_LEN_MAX, EVENT_LEN_MIN, METHODS, DetectorConfig, DEFAULT_WINDOWS
from .errors import ConfigError, FilterDesignError
from .signal import DEFAULT_RATE_HZ, PIPELINE_FILTERS, FilterSpec

CLASSIFIERS = ("svm", "ann")


@dataclass(frozen=True)
class DetectorSection:
    """Detector settings; ``threshold``/``bias`` of None mean "calibrate on synthetic scenes"."""

    method: str = "sta_lta"
    short_len: Optional[int] = None
    long_len: Optional[int] = None
    threshold: Optional[float] = None
    epsilon: float = 1e-12
    bias: Optional[int] = None
    event_len: int = EVENT_LEN
    min_len: int = EVENT_LEN_MIN
    max_len: int = EVENT_LEN_MAX

    def windows(self) -> Tuple[int, int]:
        s, l = DEFAULT_WINDOWS.get(self.method, (None, None))
        return (self.short_len if self.short_len is not None else s,
                self.long_len if self.long_len is not None else l)

    def to_detector(self, threshold: Optional[float] = None, bias: Optional[int] = None) -> DetectorConfig:
        s, l = self.windows()
        th = self.threshold if threshold is None else threshold
        b = self.bias if bias is None else bias
        return DetectorConfig(
            method=self.method,
            short_len=s,
            long_len=l,
            threshold=1.0 if th is None else th,
            epsilon=self.epsilon,
            bias=0 if b is None else b,
            event_len=self.event_len,
            min_len=self.min_len,
            max_len=self.max_len,
        )

    @property
    def needs_calibration(self) -> bool:
        return self.threshold is None or self.bias is None


@dataclass(frozen=True)
class ClassifierSection:
    kind: str = "svm"
    kernel: str = "rbf"
    C: float = 1.0
    gamma: Optional[float] = None
    degree: int = 3
    coef0: float = 0.0
    tol: float = 1e-3
    max_iter: int = 100_000
    epochs: int = 300
    batch_size: int = 32
    learning_rate: float = 5e-4


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate_hz: float = DEFAULT_RATE_HZ
    filters: Tuple[FilterSpec, ...] = PIPELINE_FILTERS
    detector: DetectorSection = DetectorSection()
    reference_pattern: Optional[str] = None
    classifier: ClassifierSection = ClassifierSection()
    k: int = 10
    seed: int = 0
    inputs: Tuple[str, ...] = ()
    out_dir: str = "."

    # --- (de)serialisation ------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["filters"] = [_filter_to_dict(f) for f in self.filters]
        d["inputs"] = list(self.inputs)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        _reject_unknown("<root>", d, cls)
        kw: Dict[str, Any] = {}
        for key in ("sample_rate_hz", "reference_pattern", "k", "seed", "out_dir"):
            if key in d:
                kw[key] = d[key]
        if "inputs" in d:
            if not isinstance(d["inputs"], list):
                raise ConfigError("inputs", "must be a list of paths")
            kw["inputs"] = tuple(str(p) for p in d["inputs"])
        if "filters" in d:
            if not isinstance(d["filters"], list):
                raise ConfigError("filters", "must be a list of filter objects")
            kw["filters"] = tuple(_filter_from_dict(f, i) for i, f in enumerate(d["filters"]))
        if "detector" in d:
            kw["detector"] = _section(DetectorSection, d["detector"], "detector")
        if "classifier" in d:
            kw["classifier"] = _section(ClassifierSection, d["classifier"], "classifier")
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON ({exc})") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)

    # --- validation -------------------------------------------------------

    def validate(self, check_paths: bool = True) -> "PipelineConfig":
        """Raise :class:`ConfigError` naming the first invalid field; return ``self``."""
        _num("sample_rate_hz", self.sample_rate_hz, positive=True)
        for i, spec in enumerate(self.filters):
            try:
                spec.validate(float(self.sample_rate_hz))
            except FilterDesignError as exc:
                raise ConfigError(f"filters[{i}]", str(exc)) from None
        _int("k", self.k)
        if self.k < 2:
            raise ConfigError("k", f"number of folds must be >= 2, got {self.k}")
        _int("seed", self.seed)
        self._validate_detector()
        self._validate_classifier()
        if check_paths:
            if self.reference_pattern is not None and not Path(self.reference_pattern).is_file():
                raise ConfigError("reference_pattern", f"file not found: {self.reference_pattern}")
            for i, p in enumerate(self.inputs):
                if not Path(p).exists():
                    raise ConfigError(f"inputs[{i}]", f"file not found: {p}")
        return self

    def _validate_detector(self):
        det = self.detector
        if det.method not in METHODS:
            raise ConfigError("detector.method", f"must be one of {METHODS}, got {det.method!r}")
        for name in ("short_len", "long_len", "event_len", "min_len", "max_len"):
            v = getattr(det, name)
            if v is not None:
                _int(f"detector.{name}", v)
        for name in ("threshold", "epsilon"):
            v = getattr(det, name)
            if v is not None:
                _num(f"detector.{name}", v)
        if det.bias is not None:
            _int("detector.bias", det.bias)
        if det.threshold is not None and not det.threshold > 0:
            raise ConfigError("detector.threshold", "must be > 0")
        try:
            det.to_detector()
        except ValueError as exc:
            raise ConfigError("detector", str(exc)) from None

    def _validate_classifier(self):
        c = self.classifier
        if c.kind not in CLASSIFIERS:
            raise ConfigError("classifier.kind", f"must be one of {CLASSIFIERS}, got {c.kind!r}")
        if c.kernel not in KERNELS:
            raise ConfigError("classifier.kernel", f"must be one of {KERNELS}, got {c.kernel!r}")
        for name in ("C", "tol", "learning_rate"):
            _num(f"classifier.{name}", getattr(c, name), positive=True)
        if c.gamma is not None:
            _num("classifier.gamma", c.gamma, positive=True)
        _num("classifier.coef0", c.coef0)
        for name in ("degree", "max_iter", "epochs", "batch_size"):
            _int(f"classifier.{name}", getattr(c, name))
            if getattr(c, name) < 1:
                raise ConfigError(f"classifier.{name}", "must be >= 1")


def _filter_to_dict(f: FilterSpec) -> dict:
    d = asdict(f)
    if isinstance(f.cutoff_hz, tuple):
        d["cutoff_hz"] = list(f.cutoff_hz)
    return d


def _filter_from_dict(d, i: int) -> FilterSpec:
    where = f"filters[{i}]"
    if not isinstance(d, dict):
        raise ConfigError(where, "must be an object")
    _reject_unknown(where, d, FilterSpec)
    if "kind" not in d or "cutoff_hz" not in d:
        raise ConfigError(where, "needs 'kind' and 'cutoff_hz'")
    d = dict(d)
    cut = d["cutoff_hz"]
    if isinstance(cut, list):
        if len(cut) != 2:
            raise ConfigError(f"{where}.cutoff_hz", "band edges must be a pair")
        d["cutoff_hz"] = (float(cut[0]), float(cut[1]))
    elif isinstance(cut, (int, float)) and not isinstance(cut, bool):
        d["cutoff_hz"] = float(cut)
    else:
        raise ConfigError(f"{where}.cutoff_hz", "must be a number or a pair of numbers")
    if d.get("kind") == "bandstop" and not isinstance(d["cutoff_hz"], tuple):
        raise ConfigError(f"{where}.cutoff_hz", "band-stop needs a (low, high) pair")
    if d.get("kind") == "lowpass" and isinstance(d["cutoff_hz"], tuple):
        raise ConfigError(f"{where}.cutoff_hz", "low-pass needs a single cutoff")
    return FilterSpec(**d)


def _section(cls, d, where: str):
    if not isinstance(d, dict):
        raise ConfigError(where, "must be an object")
    _reject_unknown(where, d, cls)
    return cls(**d)


def _reject_unknown(where: str, d: dict, cls) -> None:
    known = {f.name for f in fields(cls)}
    extra = sorted(set(d) - known)
    if extra:
        prefix = "" if where == "<root>" else f"{where}."
        raise ConfigError(f"{prefix}{extra[0]}", "unknown field")


def _num(name: str, v, positive: bool = False) -> None:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"must be a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(name, f"must be > 0, got {v!r}")


def _int(name: str, v) -> None:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"must be an integer, got {v!r}")
