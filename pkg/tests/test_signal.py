import math
import struct
import wave

import numpy as np
import pytest
from scipy import signal as sps
from scipy.io import wavfile

from footfall import signal as S
from footfall.errors import DegenerateInputError, FilterDesignError, ParseError


def _fit_amplitude(y, freq, rate, start):
    t = np.arange(y.size)[start:] / rate
    A = np.column_stack([np.sin(2 * np.pi * freq * t), np.cos(2 * np.pi * freq * t)])
    coef, *_ = np.linalg.lstsq(A, y[start:], rcond=None)
    return float(np.hypot(*coef))


def _tone_through(spec, freq, rate=880.0, seconds=20):
    sos = S.design_sos(spec, rate)
    warm = S.settle_samples(sos)
    n = warm + int(seconds * rate)
    x = np.sin(2 * np.pi * freq * np.arange(n) / rate)
    y = S.butterworth_filter(S.Signal(x, rate), spec).samples
    return _fit_amplitude(y, freq, rate, warm)


# --- I/O ----------------------------------------------------------------------


def test_csv_duration(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("\n".join(str(v) for v in np.linspace(-1, 1, 880)))
    sig = S.load_signal(p, sample_rate_hz=880.0)
    assert len(sig) == 880
    assert sig.duration_s == 1.0


def test_csv_with_header_and_index(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("n,amp\n0,0.5\n1,-0.25\n2,1.0\n")
    assert S.load_signal(p).samples.tolist() == [0.5, -0.25, 1.0]


def test_csv_bad_cell_cites_row(tmp_path):
    p = tmp_path / "bad.csv"
    rows = ["0.1"] * 6 + ["abc"] + ["0.2"] * 3
    p.write_text("\n".join(rows))
    with pytest.raises(ParseError, match="row 7"):
        S.load_signal(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError) as info:
        S.load_signal(tmp_path / "nope.csv")
    assert info.value.filename.endswith("nope.csv")


def test_unknown_format(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("1\n2\n")
    with pytest.raises(ParseError):
        S.load_signal(p)


def _write_pcm16(path, ints, channels=1, rate=880):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(struct.pack("<%dh" % len(ints), *ints))


def test_wav_16bit_scaling(tmp_path):
    p = tmp_path / "x.wav"
    _write_pcm16(p, [16384, -16384, 0, 32767, -32768])
    sig = S.load_signal(p)
    assert abs(sig.samples[0] - 0.5) <= 1e-4
    # independent reader
    _, raw = wavfile.read(p)
    np.testing.assert_allclose(sig.samples, raw.astype(np.float64) / 2**15, atol=1e-12)


def test_wav_stereo_rejected(tmp_path):
    p = tmp_path / "st.wav"
    _write_pcm16(p, [1, 2, 3, 4], channels=2)
    with pytest.raises(ParseError, match="mono"):
        S.load_signal(p)


def test_wav_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    sig = S.Signal(rng.uniform(-0.9, 0.9, size=500))
    p = tmp_path / "r.wav"
    S.write_wav(sig, p)
    back = S.load_signal(p)
    np.testing.assert_allclose(back.samples, sig.samples, atol=2.0 / 2**15)


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(1)
    sig = S.Signal(rng.normal(size=300))
    p = tmp_path / "r.csv"
    S.write_csv(sig, p)
    assert np.array_equal(S.load_signal(p).samples, sig.samples)


def test_signal_rejects_nan():
    with pytest.raises(ValueError):
        S.Signal([0.0, float("nan")])


# --- filtering ----------------------------------------------------------------


def test_lowpass_dc_gain():
    y = S.butterworth_filter(S.Signal(np.ones(4000)), S.LOWPASS_80HZ).samples
    sos = S.design_sos(S.LOWPASS_80HZ, 880.0)
    assert np.max(np.abs(y[S.settle_samples(sos) * 4 :] - 1.0)) <= 1e-6


def test_lowpass_passband_and_cutoff():
    assert _tone_through(S.LOWPASS_80HZ, 20.0) >= 0.9
    assert _tone_through(S.LOWPASS_80HZ, 80.0) == pytest.approx(1 / math.sqrt(2), rel=0.01)


@pytest.mark.parametrize("freq", [51.0, 53.0, 55.0, 57.0, 59.0])
def test_bandstop_attenuates_whole_band(freq):
    assert _tone_through(S.BANDSTOP_50_60HZ, freq) <= 1e-3


def test_bandstop_frequency_response():
    sos = S.design_sos(S.BANDSTOP_50_60HZ, 880.0)
    f = np.linspace(50.0, 60.0, 201)
    _, h = sps.sosfreqz(sos, worN=f, fs=880.0)
    assert np.max(np.abs(h)) <= 1e-3
    _, h20 = sps.sosfreqz(sos, worN=[20.0], fs=880.0)
    assert abs(h20[0]) >= 0.99


def test_filter_linearity():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 1000))
    f = lambda x: S.butterworth_filter(S.Signal(x), S.LOWPASS_80HZ).samples
    np.testing.assert_allclose(f(2.0 * a - 3.0 * b), 2.0 * f(a) - 3.0 * f(b), atol=1e-10)


def test_filter_preserves_length_and_rate():
    sig = S.Signal(np.zeros(123), 500.0)
    out = S.butterworth_filter(sig, S.FilterSpec("lowpass", 40.0, order=4))
    assert len(out) == 123 and out.sample_rate_hz == 500.0


def test_design_errors():
    with pytest.raises(FilterDesignError):
        S.design_sos(S.FilterSpec("lowpass", 440.0, order=4), 880.0)
    with pytest.raises(FilterDesignError):
        S.design_sos(S.FilterSpec("lowpass", 80.0), 880.0)
    with pytest.raises(FilterDesignError):
        S.design_sos(S.FilterSpec("bandstop", (60.0, 50.0)), 880.0)


def test_designed_poles_inside_unit_circle():
    for spec in S.PIPELINE_FILTERS:
        assert S.pole_radius(S.design_sos(spec, 880.0)) < 1.0


# --- normalisation and spectra --------------------------------------------------


def test_normalize_example():
    out = S.normalize_amplitude(S.Signal([2.0, -4.0, 1.0]))
    assert out.samples.tolist() == [0.5, -1.0, 0.25]


def test_normalize_idempotent():
    rng = np.random.default_rng(3)
    once = S.normalize_amplitude(rng.normal(size=100))
    np.testing.assert_allclose(S.normalize_amplitude(once), once, atol=1e-12)


def test_normalize_all_zero():
    with pytest.raises(DegenerateInputError):
        S.normalize_amplitude(S.Signal(np.zeros(5)))


def test_spectrum_single_tone_peak():
    t = np.arange(880) / 880.0
    ps = S.power_spectrum(S.Signal(np.sin(2 * np.pi * 20 * t)))
    assert ps.peak_hz() == pytest.approx(20.0, abs=ps.freqs_hz[1])


def test_spectrum_two_tone_power_ratio():
    t = np.arange(880) / 880.0
    x = np.sin(2 * np.pi * 20 * t) + 2 * np.sin(2 * np.pi * 55 * t)
    ps = S.power_spectrum(S.Signal(x), pad=False)
    p = dict(zip(ps.freqs_hz.round(6), ps.power))
    assert p[55.0] / p[20.0] == pytest.approx(4.0, rel=1e-9)


def test_spectrum_parseval():
    rng = np.random.default_rng(4)
    x = rng.normal(size=777)
    for pad in (True, False):
        assert S.power_spectrum(S.Signal(x), pad=pad).power.sum() == pytest.approx(np.sum(x**2), rel=1e-10)


def test_spectrum_constant_is_dc():
    ps = S.power_spectrum(S.Signal(np.full(64, 3.0)), pad=False)
    assert ps.power[0] == pytest.approx(ps.power.sum())
    assert np.all(ps.power[1:] < 1e-20 * ps.power[0] + 1e-12)
