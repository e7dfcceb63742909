"""Versioned JSON documents for trained models."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .ann import AnnModel
from .data import Scaler
from .svm import SvmModel

FORMAT = "footfall-model"
VERSION = 1


def _scaler(d):
    return Scaler.from_dict(d) if d else None


def model_to_dict(model) -> dict:
    scaler = model.scaler.to_dict() if model.scaler is not None else None
    if isinstance(model, SvmModel):
        return {
            "format": FORMAT,
            "version": VERSION,
            "type": "svm",
            "kernel": {"name": model.kernel, "gamma": model.gamma, "degree": model.degree, "coef0": model.coef0},
            "C": model.C,
            "n_features": model.n_features,
            "support_vectors": model.support_vectors.ravel().tolist(),
            "dual_coef": model.dual_coef.tolist(),
            "support_indices": model.support_indices.tolist(),
            "bias": model.bias,
            "scaler": scaler,
            "diagnostics": {"n_iter": model.n_iter, "gap": model.gap},
        }
    if isinstance(model, AnnModel):
        return {
            "format": FORMAT,
            "version": VERSION,
            "type": "ann",
            "sizes": list(model.sizes),
            "weights": [w.ravel().tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "bn_gamma": [g.tolist() for g in model.bn_gamma],
            "bn_beta": [g.tolist() for g in model.bn_beta],
            "bn_mean": [g.tolist() for g in model.bn_mean],
            "bn_var": [g.tolist() for g in model.bn_var],
            "input_dropout": model.input_dropout,
            "hidden_dropout": list(model.hidden_dropout),
            "bn_momentum": model.bn_momentum,
            "scaler": scaler,
        }
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ParseError("not a footfall model document")
    if d.get("version") != VERSION:
        raise ParseError(f"unsupported model version {d.get('version')}")
    kind = d.get("type")
    if kind == "svm":
        k = d["kernel"]
        nf = int(d["n_features"])
        return SvmModel(
            kernel=k["name"],
            gamma=float(k["gamma"]),
            degree=int(k["degree"]),
            coef0=float(k["coef0"]),
            C=float(d["C"]),
            support_vectors=np.asarray(d["support_vectors"], dtype=np.float64).reshape(-1, nf),
            dual_coef=np.asarray(d["dual_coef"], dtype=np.float64),
            bias=float(d["bias"]),
            support_indices=np.asarray(d["support_indices"], dtype=np.int64),
            scaler=_scaler(d.get("scaler")),
            n_iter=int(d.get("diagnostics", {}).get("n_iter", 0)),
            gap=float(d.get("diagnostics", {}).get("gap", 0.0)),
        )
    if kind == "ann":
        sizes = [int(s) for s in d["sizes"]]
        W = [np.asarray(w, dtype=np.float64).reshape(o, i) for w, i, o in zip(d["weights"], sizes[:-1], sizes[1:])]
        arr = lambda key: [np.asarray(v, dtype=np.float64) for v in d[key]]
        return AnnModel(
            sizes=sizes,
            weights=W,
            biases=arr("biases"),
            bn_gamma=arr("bn_gamma"),
            bn_beta=arr("bn_beta"),
            bn_mean=arr("bn_mean"),
            bn_var=arr("bn_var"),
            input_dropout=float(d["input_dropout"]),
            hidden_dropout=[float(p) for p in d["hidden_dropout"]],
            bn_momentum=float(d["bn_momentum"]),
            scaler=_scaler(d.get("scaler")),
        )
    raise ParseError(f"unknown model type {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_dict(d)
