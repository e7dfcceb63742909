"""Signal container, file I/O, Butterworth filtering and spectra."""

from __future__ import annotations

import csv
import errno
import math
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal as _sps

from .errors import DegenerateInputError, FilterDesignError, ParseError

DEFAULT_RATE_HZ = 880.0


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled amplitude sequence."""

    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        arr = _frozen(self.samples)
        if arr.size < 1:
            raise ValueError("signal must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.sample_rate_hz)


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth filter description.

    For ``kind="bandstop"`` the ``cutoff_hz`` pair is the band that must be
    attenuated by at least ``stop_attenuation_db``. When ``order`` is None the
    minimal order is found with the Butterworth order formula, using passband
    edges ``transition_hz`` outside the stopband.
    """

    kind: str
    cutoff_hz: Union[float, Tuple[float, float]]
    order: Optional[int] = None
    stop_attenuation_db: float = 60.0
    transition_hz: float = 10.0
    passband_ripple_db: float = 3.0

    def validate(self, sample_rate_hz: float) -> None:
        nyq = sample_rate_hz / 2.0
        if self.kind not in ("lowpass", "bandstop"):
            raise FilterDesignError(f"unknown filter kind {self.kind!r}")
        if self.order is not None and self.order < 1:
            raise FilterDesignError(f"order must be >= 1, got {self.order}")
        if self.kind == "lowpass":
            if self.order is None:
                raise FilterDesignError("lowpass filter needs an explicit order")
            fc = float(self.cutoff_hz)
            if not 0 < fc < nyq:
                raise FilterDesignError(f"cutoff {fc} Hz outside (0, {nyq}) Hz")
        else:
            lo, hi = self.cutoff_hz
            if not 0 < lo < hi < nyq:
                raise FilterDesignError(
                    f"band-stop edges ({lo}, {hi}) Hz must satisfy 0 < low < high < {nyq}"
                )
            if self.order is None:
                if not 0 < lo - self.transition_hz and hi + self.transition_hz < nyq:
                    raise FilterDesignError("transition band does not fit inside (0, Nyquist)")


LOWPASS_80HZ = FilterSpec(kind="lowpass", cutoff_hz=80.0, order=6)
BANDSTOP_50_60HZ = FilterSpec(kind="bandstop", cutoff_hz=(50.0, 60.0), stop_attenuation_db=60.0)
# mains-hum removal, then the anti-noise low-pass
PIPELINE_FILTERS = (BANDSTOP_50_60HZ, LOWPASS_80HZ)


@dataclass(frozen=True)
class PowerSpectrum:
    freqs_hz: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "freqs_hz", _frozen(self.freqs_hz))
        object.__setattr__(self, "power", _frozen(self.power))

    def peak_hz(self, exclude_dc: bool = True) -> float:
        p = self.power
        start = 1 if exclude_dc and p.size > 1 else 0
        return float(self.freqs_hz[start + int(np.argmax(p[start:]))])


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def _parse_float(cell: str, row: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: non-numeric value {cell.strip()!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"row {row}: non-finite value {cell.strip()!r}")
    return v


def _read_csv(path: Path) -> np.ndarray:
    values = []
    ncols = None
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            row = [c for c in row if c.strip() != ""]
            if not row:
                continue
            if ncols is None:
                # a non-numeric first line is a header
                try:
                    [float(c) for c in row]
                except ValueError:
                    ncols = len(row)
                    continue
                ncols = len(row)
            if len(row) not in (1, 2):
                raise ParseError(f"row {row_no}: expected 1 or 2 columns, got {len(row)}")
            # with an index column the amplitude is the last cell
            values.append(_parse_float(row[-1], row_no))
            if len(row) == 2:
                _parse_float(row[0], row_no)
    if not values:
        raise ParseError(f"{path}: no samples")
    return np.asarray(values, dtype=np.float64)


def _read_wav(path: Path) -> np.ndarray:
    try:
        with wave.open(str(path), "rb") as wf:
            nch = wf.getnchannels()
            width = wf.getsampwidth()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ParseError(f"{path}: unreadable WAV ({exc})") from exc
    if nch != 1:
        raise ParseError(f"{path}: expected mono WAV, got {nch} channels")
    if width == 1:
        return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if width == 2:
        return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 2.0**15
    if width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v & 0x800000, v - (1 << 24), v)
        return v.astype(np.float64) / 2.0**23
    if width == 4:
        return np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2.0**31
    raise ParseError(f"{path}: unsupported sample width {width} bytes")


def load_signal(path, format: Optional[str] = None, sample_rate_hz: float = DEFAULT_RATE_HZ) -> Signal:
    """Read a mono recording from CSV or PCM WAV.

    ``format`` defaults to the file extension. WAV integer samples are scaled
    to [-1, 1]; the WAV header rate is ignored in favour of ``sample_rate_hz``
    because the acquisition rate is only approximately known.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(errno.ENOENT, "no such file", str(path))
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        data = _read_csv(path)
    elif fmt == "wav":
        data = _read_wav(path)
    else:
        raise ParseError(f"{path}: unknown format {fmt!r} (expected csv or wav)")
    if data.size == 0:
        raise ParseError(f"{path}: no samples")
    return Signal(data, sample_rate_hz)


def write_csv(sig: Signal, path) -> None:
    np.savetxt(path, sig.samples, fmt="%.17g")


def write_wav(sig: Signal, path, sample_width: int = 2) -> None:
    """Write 16-bit (default) mono PCM; samples are clipped to [-1, 1]."""
    x = np.clip(sig.samples, -1.0, 1.0)
    if sample_width == 2:
        data = np.round(x * (2**15 - 1)).astype("<i2").tobytes()
    elif sample_width == 1:
        data = np.round(x * 127 + 128).astype(np.uint8).tobytes()
    else:
        raise ValueError("sample_width must be 1 or 2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(sample_width)
        wf.setframerate(int(round(sig.sample_rate_hz)))
        wf.writeframes(data)


# ---------------------------------------------------------------------------
# filtering
# ---------------------------------------------------------------------------


def design_sos(spec: FilterSpec, sample_rate_hz: float) -> np.ndarray:
    """Second-order sections of the digital (bilinear) Butterworth design."""
    spec.validate(sample_rate_hz)
    fs = sample_rate_hz
    if spec.kind == "lowpass":
        sos = _sps.butter(spec.order, float(spec.cutoff_hz), "lowpass", output="sos", fs=fs)
    else:
        lo, hi = spec.cutoff_hz
        if spec.order is None:
            wp = [lo - spec.transition_hz, hi + spec.transition_hz]
            order, wn = _sps.buttord(
                wp, [lo, hi], spec.passband_ripple_db, spec.stop_attenuation_db, fs=fs
            )
        else:
            order, wn = spec.order, [lo, hi]
        sos = _sps.butter(order, wn, "bandstop", output="sos", fs=fs)
    if not np.all(np.isfinite(sos)):
        raise FilterDesignError("design produced non-finite coefficients")
    if pole_radius(sos) >= 1.0:
        raise FilterDesignError("design is unstable (pole magnitude >= 1)")
    return sos


def pole_radius(sos: np.ndarray) -> float:
    """Largest pole magnitude of an SOS cascade."""
    _, p, _ = _sps.sos2zpk(sos)
    return float(np.max(np.abs(p))) if p.size else 0.0


def settle_samples(sos: np.ndarray, factor: float = 5.0) -> int:
    """Warm-up length: ``factor`` times the slowest pole's time constant."""
    r = pole_radius(sos)
    return int(math.ceil(factor / max(1.0 - r, 1e-12)))


def butterworth_filter(sig: Signal, spec: FilterSpec) -> Signal:
    """Causal biquad-cascade filtering; output has the input's length."""
    sos = design_sos(spec, sig.sample_rate_hz)
    return sig.with_samples(_sps.sosfilt(sos, sig.samples))


def apply_filters(sig: Signal, specs: Sequence[FilterSpec]) -> Signal:
    """Run ``sig`` through each filter in order."""
    for spec in specs:
        sig = butterworth_filter(sig, spec)
    return sig


def normalize_amplitude(sig):
    """Scale so the largest absolute sample is 1.

    Accepts a :class:`Signal` or a plain array and returns the same kind.
    """
    x = sig.samples if isinstance(sig, Signal) else np.asarray(sig, dtype=np.float64)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero signal")
    y = x / peak
    return sig.with_samples(y) if isinstance(sig, Signal) else y


def _next_pow2(n: int) -> int:
    return 1 << (max(int(n), 1) - 1).bit_length()


def power_spectrum(sig: Signal, pad: bool = True) -> PowerSpectrum:
    """One-sided squared-magnitude spectrum with a rectangular window.

    With ``pad`` the FFT length is the next power of two >= 4N. Power is
    scaled so that ``sum(power)`` equals the time-domain energy ``sum(x**2)``
    for any FFT length (one-sided bins other than DC/Nyquist are doubled).
    """
    x = sig.samples if isinstance(sig, Signal) else np.asarray(sig, dtype=np.float64)
    rate = sig.sample_rate_hz if isinstance(sig, Signal) else DEFAULT_RATE_HZ
    if x.size < 2:
        raise ValueError("power_spectrum needs at least 2 samples")
    nfft = _next_pow2(4 * x.size) if pad else x.size
    X = np.fft.rfft(x, n=nfft)
    p = np.abs(X) ** 2 / nfft
    if nfft % 2 == 0:
        p[1:-1] *= 2.0
    else:
        p[1:] *= 2.0
    freqs = np.fft.rfftfreq(nfft, d=1.0 / rate)
    return PowerSpectrum(freqs, p)
