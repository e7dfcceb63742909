"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test appends one PASS/FAIL line to ``RESULTS``; the lines are printed
in the pytest terminal summary and when this file is run as a script.
"""

import functools
import io
import json
import math
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest

import oracles
from footfall import detect, explain, features, synth
from footfall import signal as S
from footfall.classify import AnnConfig, AnnModel, Dataset, KernelSpec, kfold_cv, train_ann, train_svm
from footfall.classify.ann import bce_from_logits
from footfall.classify.data import standardize
from footfall.classify.svm import kkt_residuals
from footfall.cli import main as cli_main

RESULTS = []


def criterion(number, title, budget_s):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
                elapsed = time.perf_counter() - t0
                assert elapsed < budget_s, f"took {elapsed:.1f} s, budget {budget_s} s"
            except BaseException as exc:
                line = f"FAIL  criterion {number}: {title} ({time.perf_counter() - t0:.1f} s) -- {exc}"
                RESULTS.append(line)
                print(line)
                raise
            line = f"PASS  criterion {number}: {title} ({elapsed:.1f} s / {budget_s} s)"
            if detail:
                line += f" -- {detail}"
            RESULTS.append(line)
            print(line)

        return wrapper

    return deco


def _rel_close(got, want, rtol):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    same_inf = np.isinf(got) & np.isinf(want) & (np.sign(got) == np.sign(want))
    err = np.abs(got - want)
    ok = same_inf | (err <= rtol * np.abs(want)) | ((got == 0) & (want == 0))
    return bool(np.all(ok)), float(np.max(np.where(same_inf, 0.0, err / np.maximum(np.abs(want), 1e-300))))


# ---------------------------------------------------------------------------


@criterion(1, "detector oracle equivalence (100 signals, 1e-9 relative)", 10)
def test_detector_oracle_equivalence():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(300, 2001))
        x = rng.normal(scale=rng.uniform(0.1, 10.0), size=n)
        if rng.random() < 0.3:
            a = int(rng.integers(0, n // 2))
            x[a : a + int(rng.integers(1, n // 3))] = 0.0
        sig = S.Signal(x)
        for method, naive in (
            ("sta_lta", lambda x, c: oracles.sta_lta_naive(x, c.short_len, c.long_len, c.epsilon)),
            ("mer", lambda x, c: oracles.mer_naive(x, c.long_len, c.epsilon)),
            ("ccw", lambda x, c: oracles.ccw_naive(x, c.short_len, c.long_len, c.epsilon)),
        ):
            cfg = detect.DetectorConfig.for_method(method)
            if n < cfg.min_signal_len():
                continue
            got = detect.ratio_series(sig, cfg).values
            ok, err = _rel_close(got, naive(x, cfg), 1e-9)
            worst = max(worst, err)
            assert ok, f"{method} differs from the naive oracle (rel err {err:.3g}, n={n})"
    return f"max rel err {worst:.2e}"


@criterion(2, "constant-signal fixed points (epsilon = 0)", 5)
def test_constant_signal_fixed_points():
    for c in (1.0, -2.5, 0.3, 7.0):
        sig = S.Signal(np.full(1500, c))
        for method, want in (("sta_lta", 1.0), ("ccw", 0.5), ("mer", abs(c) ** 3)):
            cfg = detect.DetectorConfig.for_method(method, epsilon=0.0)
            rs = detect.ratio_series(sig, cfg)
            lo, hi = rs.valid_range
            v = rs.values[lo : hi + 1]
            tol = 1e-12 * max(1.0, want)
            assert np.all(np.abs(v - want) <= tol), f"{method} at c={c}: max dev {np.max(np.abs(v - want)):.3g}"
    return "sta_lta = 1, ccw = 0.5, mer = |c|^3"


@criterion(3, "synthetic detector benchmark mirror", 30)
def test_synthetic_benchmark():
    cfgs = [synth.calibrated_detector(m) for m in ("sta_lta", "ccw")]
    sig, truth = synth.gen_scene(synth.default_scene(seed=0, snr_db=20.0))
    assert truth.centers.size == 10
    rep = detect.run_detector_benchmark(sig, truth.centers, cfgs, repeats=7)
    sta, ccw = rep.by_method("sta_lta"), rep.by_method("ccw")
    for row in (sta, ccw):
        assert (row.detected, row.missed) == (10, 0), f"{row.method}: {row.detected}/{row.missed}"
    assert ccw.exec_time_ms <= 2.0 * sta.exec_time_ms, f"ccw {ccw.exec_time_ms:.3f} ms vs sta/lta {sta.exec_time_ms:.3f} ms"

    msig, mtruth = synth.gen_scene(synth.merge_scene(seed=0))
    mrep = detect.run_detector_benchmark(msig, mtruth.centers, cfgs, repeats=1)
    m_sta, m_ccw = mrep.by_method("sta_lta").merged, mrep.by_method("ccw").merged
    assert m_ccw <= m_sta, f"merged: ccw {m_ccw} > sta/lta {m_sta}"
    return (
        f"10/0 both; time ccw/sta = {ccw.exec_time_ms / sta.exec_time_ms:.2f}; "
        f"merged sta/lta {m_sta}, ccw {m_ccw}"
    )


def _steady_amplitude(spec, freq, rate=880.0):
    """Amplitude of the tone component after the warm-up, by least-squares sinusoid fit.

    A plain max|y| right after five time constants still carries e^-5 of the
    start-up transient, which swamps a 60 dB stopband.
    """
    sos = S.design_sos(spec, rate)
    warm = S.settle_samples(sos)
    n = warm + int(20 * rate)
    t = np.arange(n) / rate
    y = S.butterworth_filter(S.Signal(np.sin(2 * np.pi * freq * t), rate), spec).samples
    tt = t[warm:]
    A = np.column_stack([np.sin(2 * np.pi * freq * tt), np.cos(2 * np.pi * freq * tt)])
    coef, *_ = np.linalg.lstsq(A, y[warm:], rcond=None)
    return float(np.hypot(*coef))


@criterion(4, "filter attenuation", 5)
def test_filter_attenuation():
    g55 = _steady_amplitude(S.BANDSTOP_50_60HZ, 55.0)
    assert g55 <= 10 ** (-60 / 20), f"55 Hz gain {g55:.3g}"
    g20 = _steady_amplitude(S.LOWPASS_80HZ, 20.0)
    assert g20 >= 0.9, f"20 Hz gain {g20:.4f}"
    g80 = _steady_amplitude(S.LOWPASS_80HZ, 80.0)
    assert abs(g80 - 1 / math.sqrt(2)) <= 0.05 / math.sqrt(2), f"80 Hz gain {g80:.4f}"
    return f"55 Hz {20 * math.log10(g55):.0f} dB; 20 Hz gain {g20:.4f}; 80 Hz gain {g80:.4f}"


def _close(a, b, rtol=1e-9, atol=1e-12):
    return abs(a - b) <= max(atol, rtol * abs(b))


@criterion(5, "feature oracle suite and invariances", 20)
def test_feature_oracles():
    rng = np.random.default_rng(5)
    ref = synth.reference_pattern()
    r = ref.samples.tolist()
    rate = 880.0
    for trial in range(30):
        ev = rng.normal(size=190)
        if trial % 3 == 0:
            ev = synth.gen_pulse(synth.PulseSpec(dominant_freq_hz=float(rng.uniform(10, 60))), seed=trial)
            ev = ev + rng.normal(scale=0.05, size=ev.size)
        seg_len = int(rng.integers(66, 313))
        fv = features.extract_features(ev, seg_len, ref, rate)
        x = (ev / np.max(np.abs(ev))).tolist()
        cc = oracles.cross_correlation_naive(x, r)
        skew, kurt = oracles.moments_naive(x)
        want = {
            "event_length": float(seg_len),
            "zero_crossings": float(oracles.zero_crossings_naive(x)),
            "pred_frequency": oracles.predominant_frequency_naive(x, rate),
            "max_cross_corr": max(cc.values()),
            "cross_corr_0": cc[0],
            "mse": oracles.mse_naive(x, r),
            "dtw": oracles.dtw_dp_naive(x, r) if trial < 6 else None,
            "skewness": skew,
            "kurtosis": kurt,
        }
        for name, w in want.items():
            if w is None:
                continue
            got = getattr(fv, name)
            assert _close(got, w), f"{name}: {got!r} vs oracle {w!r}"

    for _ in range(40):
        n, m = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        a, b = rng.normal(size=n), rng.normal(size=m)
        got = features.dtw_cost(a, b)
        want = oracles.dtw_enumerate(a.tolist(), b.tolist())
        assert _close(got, want), f"dtw {got} vs enumeration {want} (lengths {n}, {m})"

    for _ in range(1000):
        x = rng.normal(size=190) * rng.uniform(0.1, 5) + rng.uniform(-1, 1)
        a, b = rng.uniform(0.2, 5) * rng.choice([-1, 1]), rng.uniform(-3, 3)
        assert features.zero_crossings(-x) == features.zero_crossings(x)
        assert _close(features.skewness(-x), -features.skewness(x), 1e-9, 1e-12)
        assert _close(features.kurtosis(a * x + b), features.kurtosis(x), 1e-9, 1e-12)
    return "9 features vs oracles; dtw vs path enumeration (len <= 8); 1000 invariance events"


@criterion(6, "SVM correctness", 60)
def test_svm_correctness():
    xor = Dataset(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]), np.array([-1, -1, 1, 1]))
    m = train_svm(xor, KernelSpec("rbf", gamma=1.0), C=10.0)
    assert np.all(m.predict(xor.X) == xor.y), "XOR not solved"
    assert np.max(kkt_residuals(m, xor)) <= 1e-3

    ds = synth.gen_labeled_dataset(100, synth.DEFAULT_CLASSES, seed=0)
    assert len(ds) == 200
    trained = standardize(ds)
    model = train_svm(trained, KernelSpec("rbf"))
    worst = float(np.max(kkt_residuals(model, trained)))
    assert worst <= 1e-3, f"KKT residual {worst:.3g}"
    cv, _ = kfold_cv(ds, lambda d: train_svm(d, KernelSpec("rbf")), k=10, seed=0)
    assert cv >= 0.95, f"10-fold CV accuracy {cv:.3f}"
    return f"XOR 100%; max KKT residual {worst:.1e}; 10-fold CV {cv:.3f}"


def _grad_check():
    rng = np.random.default_rng(7)
    cfg = AnnConfig(hidden=(8,), n_batchnorm=1, input_dropout=0.0, hidden_dropout=(0.0,))
    m = AnnModel.init(9, cfg, seed=3)
    m.bn_mean[0] = rng.normal(size=8)
    m.bn_var[0] = rng.uniform(0.5, 2.0, size=8)
    m.bn_gamma[0] = rng.uniform(0.5, 1.5, size=8)
    m.bn_beta[0] = rng.normal(scale=0.1, size=8)
    X = rng.normal(size=(24, 9))
    t = (rng.random(24) > 0.5).astype(float)
    z, cache = m.forward(X, train=False)
    g = m.backward((1 / (1 + np.exp(-z)) - t) / t.size, cache)
    grads = [*g["W"], *g["b"], *g["gamma"], *g["beta"]]
    worst = 0.0
    h = 1e-6
    for p, gp in zip(m.params(), grads):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = bce_from_logits(m.forward(X)[0], t)
            p[idx] = orig - h
            down = bce_from_logits(m.forward(X)[0], t)
            p[idx] = orig
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - gp[idx]) / max(abs(num) + abs(gp[idx]), 1e-7))
    return worst


@criterion(7, "ANN correctness", 60)
def test_ann_correctness():
    worst = _grad_check()
    assert worst < 1e-4, f"gradient relative error {worst:.3g}"
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 1, (60, 2)), rng.normal(2, 1, (60, 2))])
    y = np.r_[-np.ones(60), np.ones(60)]
    model = train_ann(standardize(Dataset(X, y, feature_names=("a", "b"))), epochs=200, seed=0)
    hist = np.array(model.loss_history)
    assert np.all(np.isfinite(hist))
    assert np.all(np.diff(hist[:11]) < 0), f"loss not strictly decreasing: {hist[:11]}"
    acc = float(np.mean(model.predict(X) == y))
    assert acc == 1.0, f"toy training accuracy {acc}"
    return f"grad rel err {worst:.1e}; loss {hist[0]:.3f} -> {hist[-1]:.3f}; accuracy 100%"


@criterion(8, "Shapley axioms", 30)
def test_shapley_axioms():
    rng = np.random.default_rng(8)
    d = 9
    worst = 0.0
    for k in range(50):
        kind = k % 3
        W1, w2 = rng.normal(size=(6, d)), rng.normal(size=6)
        if kind == 0:
            f = lambda X, W1=W1, w2=w2: np.tanh(np.atleast_2d(X) @ W1.T) @ w2
        elif kind == 1:
            c = rng.normal(size=(4, d))
            f = lambda X, c=c: np.exp(-((np.atleast_2d(X)[:, None, :] - c[None]) ** 2).sum(-1)).sum(1)
        else:
            A = rng.normal(size=(d, d))
            f = lambda X, A=A: np.einsum("ni,ij,nj->n", np.atleast_2d(X), A, np.atleast_2d(X))
        bg, x = rng.normal(size=d), rng.normal(size=d)
        e = explain.exact_shapley(f, bg, x)
        err = abs(e.phi.sum() + e.base_value - e.model_output)
        worst = max(worst, err)
        assert err <= 1e-6, f"efficiency error {err:.3g}"

    w = rng.normal(size=d)
    w[4] = 0.0
    lin = lambda X: np.atleast_2d(X) @ w
    bg, x = rng.normal(size=d), rng.normal(size=d)
    e = explain.exact_shapley(lin, bg, x)
    assert abs(e.phi[4]) < 1e-9, "dummy feature received attribution"
    np.testing.assert_allclose(e.phi, w * (x - bg), rtol=0, atol=1e-12)
    return f"max efficiency error {worst:.1e}; dummy |phi| {abs(e.phi[4]):.1e}; linear closed form exact"


def _run_cli(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main([str(a) for a in argv])
    assert code == 0, f"footfall {' '.join(map(str, argv))} exited {code}"
    return json.loads(buf.getvalue())


@criterion(9, "end-to-end pipeline and wet-soil feature impact", 300)
def test_end_to_end(tmp_path):
    feats = []
    for seed in (1, 2, 3, 4):
        d = tmp_path / f"train{seed}"
        _run_cli(["synth", "scene", "--classes", "elephant,confuser", "--pulses", 30, "--duration-s", 16,
                  "--seed", seed, "--out", d])
        _run_cli(["detect", d / "scene.csv", "--truth", d / "scene.truth.json", "--out", d])
        _run_cli(["featurize", d / "scene.events.csv", "--name", "features", "--out", d])
        feats.append(d / "features.csv")
    train = _run_cli(["train", *feats, "--out", tmp_path / "model"])

    test_dir = tmp_path / "test"
    _run_cli(["synth", "scene", "--classes", "elephant,confuser", "--pulses", 30, "--duration-s", 16,
              "--seed", 99, "--out", test_dir])
    _run_cli(["detect", test_dir / "scene.csv", "--truth", test_dir / "scene.truth.json", "--out", test_dir])
    _run_cli(["featurize", test_dir / "scene.events.csv", "--name", "test_case", "--out", test_dir])
    rep = _run_cli(["eval", tmp_path / "model" / "model.json", test_dir / "test_case.csv", "--out", test_dir])
    m = rep["metrics"]["test_case"]
    assert m["accuracy"] >= 0.90 and m["f1"] >= 0.90, f"held-out accuracy {m['accuracy']:.3f}, F1 {m['f1']:.3f}"

    wet = tmp_path / "wet"
    _run_cli(["synth", "dataset", "--classes", "elephant,wet_soil_cattle", "--n-per-class", 100, "--out", wet])
    _run_cli(["train", wet / "features.csv", "--no-cv", "--out", wet])
    ex = _run_cli(["explain", wet / "model.json", wet / "features.csv", "--out", wet])
    ranking = ex["details"]["ranking"]
    pos = {name: i for i, name in enumerate(ranking)}
    assert pos["zero_crossings"] < pos["pred_frequency"], ranking
    assert pos["dtw"] < pos["pred_frequency"], ranking
    cv = train["metrics"]["cross_validation"]["accuracy"]
    return (
        f"held-out accuracy {m['accuracy']:.3f}, F1 {m['f1']:.3f} (train CV {cv:.3f}); "
        f"wet-soil ranking {ranking}"
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
