"""Command-line front end: ``footfall <command> [options]``.

Each stage reads and writes plain files (signal CSV/WAV, packed event CSV,
feature CSV, model JSON) so stages can be re-run independently. Every
command writes ``<command>.report.json`` into the output directory.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
failure, 5 malformed or inconsistent data.
"""

from __future__ import annotations

import argparse
import errno
import json
import logging
import sys
import time
import wave
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, detect, explain, synth
from . import signal as sigmod
from .classify import (
    AnnConfig,
    Dataset,
    KernelSpec,
    evaluate,
    kfold_cv,
    load_model,
    save_model,
    standardize,
    train_ann,
    train_svm,
)
from .config import PipelineConfig
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    DivergenceError,
    FilterDesignError,
    ParseError,
    ShapeError,
    ShortfallError,
    WindowError,
)
from .features import ReferencePattern, extract_features, read_feature_csv, write_feature_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_DATA = 5

log = logging.getLogger("footfall")


@dataclass
class RunReport:
    """Per-stage counts, metrics per test case and stage timings (ms)."""

    command: str
    counts: Dict[str, int] = field(default_factory=dict)
    metrics: Dict[str, dict] = field(default_factory=dict)
    timing_ms: Dict[str, float] = field(default_factory=dict)
    details: Dict[str, object] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)

    @contextmanager
    def timed(self, stage: str):
        t0 = time.perf_counter()
        yield
        self.timing_ms[stage] = self.timing_ms.get(stage, 0.0) + (time.perf_counter() - t0) * 1e3

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "counts": self.counts,
            "metrics": self.metrics,
            "timing_ms": self.timing_ms,
            "details": self.details,
            "outputs": self.outputs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


class _Ctx:
    def __init__(self, cfg: PipelineConfig, out: Path, report: RunReport):
        self.cfg = cfg
        self.out = out
        self.report = report

    def path(self, name: str) -> Path:
        p = self.out / name
        self.report.outputs.append(name)
        return p


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(errno.ENOENT, "no such file", str(p))
    return p


def _load(path, cfg: PipelineConfig) -> sigmod.Signal:
    return sigmod.load_signal(_require(path), sample_rate_hz=cfg.sample_rate_hz)


def _reference(cfg: PipelineConfig) -> ReferencePattern:
    if cfg.reference_pattern is not None:
        return ReferencePattern.load(_require(cfg.reference_pattern))
    return synth.reference_pattern(rate=cfg.sample_rate_hz)


def _filters(cfg: PipelineConfig, args) -> tuple:
    return () if getattr(args, "no_filter", False) else tuple(cfg.filters)


def _detector(cfg: PipelineConfig, filters, method: Optional[str] = None) -> detect.DetectorConfig:
    """Detector from the config, calibrating whichever of threshold/bias is unset."""
    sec = cfg.detector if method is None else _section_for(cfg, method)
    det = sec.to_detector()
    if not sec.needs_calibration:
        return det
    scenes = synth.calibration_scenes(rate=cfg.sample_rate_hz, filters=filters)
    if sec.threshold is None:
        det = det.with_(threshold=synth.calibrate_threshold(det, scenes))
    if sec.bias is None:
        det = det.with_(bias=synth.calibrate_bias(det, scenes))
    return det


def _section_for(cfg: PipelineConfig, method: str):
    if method == cfg.detector.method:
        return cfg.detector
    return replace(cfg.detector, method=method, short_len=None, long_len=None, threshold=None, bias=None)


def _load_truth(path) -> synth.GroundTruth:
    p = _require(path)
    try:
        return synth.GroundTruth.from_dict(json.loads(p.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{p}: not a ground-truth file ({exc})") from None


def _load_features(paths: Sequence[str]) -> Dataset:
    parts = []
    for p in paths:
        X, y = read_feature_csv(_require(p))
        parts.append(Dataset(X, y, (Path(p).stem,) * y.size))
    if not parts:
        raise ConfigError("inputs", "no feature files given")
    return Dataset.concat(parts) if len(parts) > 1 else parts[0]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_filter(ctx: _Ctx, args) -> None:
    sig = _load(args.input, ctx.cfg)
    with ctx.report.timed("filter"):
        out = sigmod.apply_filters(sig, ctx.cfg.filters)
    sigmod.write_csv(out, ctx.path(f"{Path(args.input).stem}.filtered.csv"))
    ctx.report.counts["samples"] = out.samples.size
    ctx.report.details["filters"] = [f.kind for f in ctx.cfg.filters]


def cmd_calibrate(ctx: _Ctx, args) -> None:
    filters = _filters(ctx.cfg, args)
    if len(args.signal) != len(args.truth):
        raise ConfigError("--signal/--truth", "give one --truth file per --signal file")
    if args.signal:
        scenes = []
        for s, t in zip(args.signal, args.truth):
            scenes.append((sigmod.apply_filters(_load(s, ctx.cfg), filters), _load_truth(t)))
    else:
        scenes = synth.calibration_scenes(rate=ctx.cfg.sample_rate_hz, filters=filters)
    det = ctx.cfg.detector.to_detector()
    with ctx.report.timed("calibrate"):
        det = det.with_(threshold=synth.calibrate_threshold(det, scenes))
        det = det.with_(bias=synth.calibrate_bias(det, scenes))
        f1 = synth.threshold_f1_curve(det, scenes, [det.threshold])
    cfg = ctx.cfg.with_(detector=replace(ctx.cfg.detector, threshold=det.threshold, bias=det.bias))
    ctx.path("config.calibrated.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    ctx.report.counts["scenes"] = len(scenes)
    ctx.report.metrics["calibration"] = {"f1": float(f1.max())}
    ctx.report.details["detector"] = asdict(det)


def cmd_detect(ctx: _Ctx, args) -> None:
    sig = _load(args.input, ctx.cfg)
    truth = _load_truth(args.truth) if args.truth else None
    filters = _filters(ctx.cfg, args)
    det = _detector(ctx.cfg, filters)
    with ctx.report.timed("filter"):
        sig = sigmod.apply_filters(sig, filters)
    with ctx.report.timed("detect"):
        raw = detect.threshold_segments(detect.ratio_series(sig, det), det)
    with ctx.report.timed("gate"):
        gated = detect.gate_by_length(raw, det)
    with ctx.report.timed("extract"):
        events = detect.extract_events(sig, gated, det)
    labels = None
    if truth is not None:
        M = detect.match_matrix([ev.source_segment for ev in events], truth.centers, det.event_len // 2)
        labels = [int(truth.labels[np.flatnonzero(row)[0]]) if row.sum() == 1 else 0 for row in M]
        ctx.report.metrics["segments"] = detect.score_segments(raw, truth.centers, det.event_len // 2)
        ctx.report.metrics["gated"] = detect.score_segments(gated, truth.centers, det.event_len // 2)
    detect.write_events_csv(ctx.path(f"{Path(args.input).stem}.events.csv"), events, labels)
    ctx.report.counts.update(detected=len(raw), gated=len(gated), extracted=len(events))
    ctx.report.details["detector"] = asdict(det)


def cmd_featurize(ctx: _Ctx, args) -> None:
    ref = _reference(ctx.cfg)
    rows, labels = [], []
    n_events = dropped = 0
    for path in args.inputs:
        events, labs = detect.read_events_csv(_require(path))
        n_events += len(events)
        with ctx.report.timed("featurize"):
            for ev, lab in zip(events, labs):
                if args.label is not None:
                    lab = args.label
                if lab == 0:
                    dropped += 1
                    continue
                try:
                    fv = extract_features(ev.samples, ev.source_segment, ref, ctx.cfg.sample_rate_hz)
                except DegenerateInputError as exc:
                    log.warning("%s: skipping event at %d: %s", path, ev.poi, exc)
                    dropped += 1
                    continue
                rows.append(fv.to_array())
                labels.append(int(lab))
    if dropped:
        log.warning("dropped %d events without a usable label or features", dropped)
    X = np.array(rows).reshape(-1, 9)
    write_feature_csv(ctx.path(args.name + ".csv"), X, labels)
    ctx.report.counts.update(events=n_events, featurized=len(rows), dropped=dropped)


def _trainer(cfg: PipelineConfig, seed: int):
    c = cfg.classifier
    if c.kind == "svm":
        spec = KernelSpec(c.kernel, c.degree, c.gamma, c.coef0)
        return lambda ds: train_svm(ds, spec, C=c.C, tol=c.tol, max_iter=c.max_iter)
    acfg = AnnConfig(learning_rate=c.learning_rate, epochs=c.epochs, batch_size=c.batch_size)
    return lambda ds: train_ann(ds, seed=seed, config=acfg)


def cmd_train(ctx: _Ctx, args) -> None:
    ds = _load_features(args.inputs)
    if np.unique(ds.y).size < 2:
        raise ShapeError("training data must contain both labels (-1 and +1)")
    trainer = _trainer(ctx.cfg, ctx.cfg.seed)
    if not args.no_cv:
        with ctx.report.timed("cross_validate"):
            mean, folds = kfold_cv(ds, trainer, k=ctx.cfg.k, seed=ctx.cfg.seed)
        ctx.report.metrics["cross_validation"] = {"k": ctx.cfg.k, "accuracy": mean, "fold_accuracy": folds}
    with ctx.report.timed("train"):
        model = trainer(standardize(ds))
    save_model(model, ctx.path(args.name + ".json"))
    ctx.report.metrics["training_set"] = evaluate(model.predict(ds.X), ds.y).to_dict()
    ctx.report.counts.update(rows=len(ds), positives=int(np.sum(ds.y > 0)), negatives=int(np.sum(ds.y < 0)))
    ctx.report.details["classifier"] = ctx.cfg.classifier.kind


def cmd_eval(ctx: _Ctx, args) -> None:
    model = load_model(_require(args.model))
    total = 0
    for path in args.inputs:
        X, y = read_feature_csv(_require(path))
        with ctx.report.timed("predict"):
            pred = model.predict(X)
        ctx.report.metrics[Path(path).stem] = evaluate(pred, y).to_dict()
        total += y.size
    ctx.report.counts["rows"] = total
    ctx.path("metrics.json").write_text(json.dumps(ctx.report.metrics, indent=2, sort_keys=True) + "\n")


def cmd_explain(ctx: _Ctx, args) -> None:
    model = load_model(_require(args.model))
    X, _ = read_feature_csv(_require(args.input))
    n_in = model.sizes[0] if hasattr(model, "sizes") else model.n_features
    if X.shape[1] != n_in:
        raise ShapeError(f"model expects {n_in} features, data has {X.shape[1]}")
    with ctx.report.timed("explain"):
        exps = explain.explain_dataset(model, X)
        summary = explain.impact_summary(exps)
    ctx.path("shap.json").write_text(
        json.dumps([e.to_dict() for e in exps], indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    ctx.path("impact.csv").write_text(summary.to_csv(), encoding="utf-8")
    worst = max(abs(e.phi.sum() + e.base_value - e.model_output) for e in exps)
    ctx.report.counts["instances"] = len(exps)
    ctx.report.details["ranking"] = list(summary.ranking)
    ctx.report.details["max_efficiency_error"] = float(worst)


def cmd_bench(ctx: _Ctx, args) -> None:
    filters = _filters(ctx.cfg, args)
    if args.scene:
        spec = synth.SceneSpec.from_json(_require(args.scene).read_text(encoding="utf-8"))
    else:
        spec = synth.default_scene(seed=ctx.cfg.seed, rate=ctx.cfg.sample_rate_hz)
    sig, truth = synth.gen_scene(spec)
    sig = sigmod.apply_filters(sig, filters)
    dets = [_detector(ctx.cfg, filters, m) for m in detect.METHODS]
    rep = detect.run_detector_benchmark(sig, truth.centers, dets, repeats=args.repeats)
    ctx.path("bench.json").write_text(rep.to_json() + "\n", encoding="utf-8")
    ctx.path("bench.csv").write_text(rep.to_csv(), encoding="utf-8")
    for row in rep.rows:
        ctx.report.metrics[row.method] = {"detected": row.detected, "missed": row.missed, "merged": row.merged}
        ctx.report.timing_ms[row.method] = row.exec_time_ms
    ctx.report.counts["truth_events"] = int(truth.centers.size)


def _write_scene(ctx: _Ctx, spec: synth.SceneSpec, name: str, fmt: str) -> None:
    sig, truth = synth.gen_scene(spec)
    if fmt == "wav":
        sigmod.write_wav(sigmod.normalize_amplitude(sig), ctx.path(f"{name}.wav"))
    else:
        sigmod.write_csv(sig, ctx.path(f"{name}.csv"))
    ctx.path(f"{name}.truth.json").write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")
    ctx.path(f"{name}.spec.json").write_text(spec.to_json() + "\n", encoding="utf-8")
    ctx.report.counts["pulses"] = int(truth.centers.size)
    ctx.report.counts["samples"] = sig.samples.size


def _classes(names: str) -> List[synth.ClassSpec]:
    out = []
    for n in names.split(","):
        n = n.strip()
        if n not in synth.CLASS_PRESETS:
            raise ConfigError("--classes", f"unknown class {n!r}; choose from {sorted(synth.CLASS_PRESETS)}")
        out.append(synth.CLASS_PRESETS[n])
    return out


def cmd_synth(ctx: _Ctx, args) -> None:
    seed = ctx.cfg.seed
    rate = ctx.cfg.sample_rate_hz
    if args.kind == "scene":
        if args.spec:
            spec = synth.SceneSpec.from_json(_require(args.spec).read_text(encoding="utf-8"))
        elif args.classes:
            spec = synth.mixed_scene(_classes(args.classes), seed, args.pulses, args.snr_db, rate,
                                     args.duration_s)
        else:
            spec = synth.default_scene(seed=seed, n_pulses=args.pulses, snr_db=args.snr_db, rate=rate,
                                       duration_s=args.duration_s, tone_amplitude=args.tone_amplitude)
        _write_scene(ctx, spec, args.name, args.format)
    elif args.kind == "merge":
        spec = synth.merge_scene(seed=seed, gap=args.gap, n_pairs=args.pairs, snr_db=args.snr_db, rate=rate)
        _write_scene(ctx, spec, args.name, args.format)
    else:
        classes = _classes(args.classes or "elephant,confuser")
        with ctx.report.timed("generate"):
            ds = synth.gen_labeled_dataset(args.n_per_class, classes, rate=rate, seed=seed,
                                           filters=tuple(ctx.cfg.filters))
        ds.to_csv(ctx.path(args.name + ".csv"))
        ctx.report.counts["rows"] = len(ds)
        for c in classes:
            ctx.report.counts[c.name] = int(sum(p == c.name for p in ds.provenance))


COMMANDS = {
    "filter": cmd_filter,
    "calibrate": cmd_calibrate,
    "detect": cmd_detect,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "eval": cmd_eval,
    "explain": cmd_explain,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


# ---------------------------------------------------------------------------
# argument parsing and entry point
# ---------------------------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=d, help="override the config seed")
    p.add_argument("--out", default=d, help="output directory (default: config out_dir)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="footfall", description="Seismic footfall detection and classification.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    _global_flags(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = add("filter", help="apply the configured filter chain to a signal")
    p.add_argument("input")

    p = add("calibrate", help="tune detector threshold and bias against ground truth")
    p.add_argument("--signal", action="append", default=[], help="scene signal (repeatable)")
    p.add_argument("--truth", action="append", default=[], help="matching ground-truth JSON (repeatable)")
    p.add_argument("--no-filter", action="store_true")

    p = add("detect", help="detect, gate and extract events from a signal")
    p.add_argument("input")
    p.add_argument("--truth", help="ground-truth JSON used to label and score events")
    p.add_argument("--no-filter", action="store_true")

    p = add("featurize", help="compute feature rows from packed event files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--label", type=int, choices=(-1, 1), help="label every event (overrides file labels)")
    p.add_argument("--name", default="features")

    p = add("train", help="train the configured classifier on feature CSVs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--no-cv", action="store_true", help="skip k-fold cross-validation")
    p.add_argument("--name", default="model")

    p = add("eval", help="evaluate a model on one or more test-case CSVs")
    p.add_argument("model")
    p.add_argument("inputs", nargs="+")

    p = add("explain", help="exact Shapley attributions for every row of a feature CSV")
    p.add_argument("model")
    p.add_argument("input")

    p = add("bench", help="run all three detectors on one scene")
    p.add_argument("--scene", help="SceneSpec JSON (default: the seeded 10-pulse scene)")
    p.add_argument("--repeats", type=int, default=7)
    p.add_argument("--no-filter", action="store_true")

    p = add("synth", help="generate synthetic scenes or labelled datasets")
    p.add_argument("kind", choices=("scene", "merge", "dataset"))
    p.add_argument("--spec", help="SceneSpec JSON (scene only)")
    p.add_argument("--classes", help="comma-separated class presets, e.g. elephant,confuser")
    p.add_argument("--pulses", type=int, default=10)
    p.add_argument("--duration-s", type=float, default=5.2)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--tone-amplitude", type=float, default=0.0)
    p.add_argument("--gap", type=int, default=180, help="centre spacing within merge pairs")
    p.add_argument("--pairs", type=int, default=3)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--format", choices=("csv", "wav"), default="csv")
    p.add_argument("--name", default=None)
    return ap


def _config(args) -> PipelineConfig:
    if args.config:
        cfg = PipelineConfig.load(_require(args.config))
    else:
        cfg = PipelineConfig()
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    if args.out is not None:
        cfg = cfg.with_(out_dir=args.out)
    return cfg.validate()


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="footfall: %(levelname)s: %(message)s")
    if args.command == "synth" and args.name is None:
        args.name = {"scene": "scene", "merge": "merge", "dataset": "features"}[args.kind]
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(args.command)
    COMMANDS[args.command](_Ctx(cfg, out, report), args)
    report.details["seed"] = cfg.seed
    report.details["config"] = cfg.to_dict()
    text = report.to_json()
    (out / f"{args.command}.report.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def _fail(code: int, msg: str) -> int:
    print(f"footfall: {msg}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        where = exc.filename if exc.filename is not None else ""
        return _fail(EXIT_IO, f"{where}: {exc.strerror or exc}")
    except (ConvergenceError, DivergenceError, explain.NonFiniteOutputError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, f"numerical failure: {exc}")
    except (ParseError, ShapeError, ShortfallError, WindowError, DegenerateInputError,
            FilterDesignError, wave.Error) as exc:
        return _fail(EXIT_DATA, f"data error: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
