"""Feed-forward binary classifier trained with backpropagation and Adam.

Default architecture: ``d -> 128 -> 64 -> 32 -> 16 -> 1`` with ReLU hidden
units, batch normalisation (affine -> BN -> ReLU) on the first two hidden
layers, dropout 0.3 on the inputs and first hidden layer, 0.2 on the second
hidden layer, and a sigmoid output trained on binary cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import DivergenceError, ShapeError
from .data import Dataset, Scaler

HIDDEN = (128, 64, 32, 16)
BN_EPS = 1e-5


@dataclass
class AnnConfig:
    hidden: Sequence[int] = HIDDEN
    n_batchnorm: int = 2
    input_dropout: float = 0.3
    hidden_dropout: Sequence[float] = (0.3, 0.2, 0.0, 0.0)
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_momentum: float = 0.9
    epochs: int = 300
    batch_size: int = 32


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_from_logits(z, t) -> float:
    """Mean binary cross-entropy of sigmoid(z) against 0/1 targets, computed stably."""
    z = np.ravel(z)
    t = np.ravel(t)
    return float(np.mean(np.logaddexp(0.0, z) - t * z))


@dataclass
class AnnModel:
    sizes: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    bn_gamma: List[np.ndarray]
    bn_beta: List[np.ndarray]
    bn_mean: List[np.ndarray]
    bn_var: List[np.ndarray]
    input_dropout: float = 0.3
    hidden_dropout: List[float] = field(default_factory=lambda: [0.3, 0.2, 0.0, 0.0])
    bn_momentum: float = 0.9
    scaler: Optional[Scaler] = None
    loss_history: List[float] = field(default_factory=list)

    @classmethod
    def init(cls, n_in: int, cfg: AnnConfig = AnnConfig(), seed: int = 0) -> "AnnModel":
        rng = np.random.default_rng(seed)
        sizes = [n_in, *cfg.hidden, 1]
        W, b = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            W.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
            b.append(np.zeros(fan_out))
        nbn = min(cfg.n_batchnorm, len(cfg.hidden))
        drops = list(cfg.hidden_dropout)[: len(cfg.hidden)]
        drops += [0.0] * (len(cfg.hidden) - len(drops))
        return cls(
            sizes=sizes,
            weights=W,
            biases=b,
            bn_gamma=[np.ones(sizes[i + 1]) for i in range(nbn)],
            bn_beta=[np.zeros(sizes[i + 1]) for i in range(nbn)],
            bn_mean=[np.zeros(sizes[i + 1]) for i in range(nbn)],
            bn_var=[np.ones(sizes[i + 1]) for i in range(nbn)],
            input_dropout=cfg.input_dropout,
            hidden_dropout=drops,
            bn_momentum=cfg.bn_momentum,
        )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    # --- parameters as a flat list, in a fixed order -----------------------

    def params(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases, *self.bn_gamma, *self.bn_beta]

    # --- forward / backward -------------------------------------------------

    def forward(self, X, train: bool = False, rng: Optional[np.random.Generator] = None,
                update_stats: bool = True, dropout: Optional[bool] = None):
        """Return ``(logits, cache)``.

        ``train=True`` uses batch statistics and, unless ``dropout=False``,
        dropout (which needs ``rng``); ``train=False`` uses running
        statistics and no dropout.
        """
        dropout = train if dropout is None else dropout
        a = np.asarray(X, dtype=np.float64)
        if a.shape[1] != self.sizes[0]:
            raise ShapeError(f"model expects {self.sizes[0]} features, got {a.shape[1]}")
        cache = {"layers": []}
        if dropout and self.input_dropout > 0:
            mask = (rng.random(a.shape) >= self.input_dropout) / (1.0 - self.input_dropout)
            a = a * mask
        else:
            mask = None
        cache["input"] = a
        cache["input_mask"] = mask
        nbn = len(self.bn_gamma)
        for l in range(self.n_layers):
            z = a @ self.weights[l].T + self.biases[l]
            ent = {"a_in": a, "z": z}
            if l == self.n_layers - 1:
                cache["layers"].append(ent)
                return z[:, 0], cache
            h = z
            if l < nbn:
                if train:
                    mu = z.mean(axis=0)
                    var = z.var(axis=0)
                    if update_stats:
                        m = self.bn_momentum
                        self.bn_mean[l] = m * self.bn_mean[l] + (1 - m) * mu
                        self.bn_var[l] = m * self.bn_var[l] + (1 - m) * var
                else:
                    mu, var = self.bn_mean[l], self.bn_var[l]
                inv = 1.0 / np.sqrt(var + BN_EPS)
                xhat = (z - mu) * inv
                h = self.bn_gamma[l] * xhat + self.bn_beta[l]
                ent.update(xhat=xhat, inv=inv, bn_train=train)
            a = np.maximum(h, 0.0)
            ent["h"] = h
            p = self.hidden_dropout[l]
            if dropout and p > 0:
                dm = (rng.random(a.shape) >= p) / (1.0 - p)
                a = a * dm
                ent["drop"] = dm
            cache["layers"].append(ent)
        raise AssertionError("unreachable")

    def backward(self, dlogits, cache) -> Dict[str, List[np.ndarray]]:
        """Gradients of a loss given ``dL/dlogits`` (shape ``(n,)``)."""
        L = self.n_layers
        nbn = len(self.bn_gamma)
        gW = [None] * L
        gb = [None] * L
        gg = [None] * nbn
        gbeta = [None] * nbn
        delta = np.asarray(dlogits, dtype=np.float64)[:, None]
        for l in range(L - 1, -1, -1):
            ent = cache["layers"][l]
            if l < L - 1:
                # delta currently holds dL/da for this layer's output activations
                if "drop" in ent:
                    delta = delta * ent["drop"]
                delta = delta * (ent["h"] > 0)
                if l < nbn:
                    xhat, inv = ent["xhat"], ent["inv"]
                    gg[l] = np.sum(delta * xhat, axis=0)
                    gbeta[l] = np.sum(delta, axis=0)
                    dxhat = delta * self.bn_gamma[l]
                    if ent["bn_train"]:
                        n = dxhat.shape[0]
                        delta = (inv / n) * (
                            n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0)
                        )
                    else:
                        delta = dxhat * inv
            gW[l] = delta.T @ ent["a_in"]
            gb[l] = delta.sum(axis=0)
            delta = delta @ self.weights[l]
        return {"W": gW, "b": gb, "gamma": gg, "beta": gbeta}

    # --- inference ----------------------------------------------------------

    def _scale(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.scaler.transform(X) if self.scaler is not None else X

    def logits(self, X) -> np.ndarray:
        return self.forward(self._scale(X), train=False)[0]

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.logits(X))

    def predict(self, X) -> np.ndarray:
        return np.where(self.predict_proba(X) >= 0.5, 1, -1)


def ann_predict(model: AnnModel, x) -> float:
    """Probability of the positive (elephant) class for one raw feature vector."""
    arr = x.to_array() if hasattr(x, "to_array") else np.asarray(x, dtype=np.float64)
    return float(model.predict_proba(arr[None, :])[0])


class _Adam:
    def __init__(self, params, lr, b1, b2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_ann(
    ds: Dataset,
    epochs: Optional[int] = None,
    batch_size: Optional[int] = None,
    seed: int = 0,
    config: Optional[AnnConfig] = None,
) -> AnnModel:
    """Mini-batch training; returns the model in inference mode.

    ``model.loss_history[e]`` is the training objective on the full set
    after epoch ``e`` (index 0 is before training): batch-norm uses the
    statistics of the whole set and dropout is off, so the curve is free of
    mini-batch and dropout noise.
    """
    cfg = config or AnnConfig()
    epochs = cfg.epochs if epochs is None else epochs
    batch_size = cfg.batch_size if batch_size is None else batch_size
    rng = np.random.default_rng(seed)
    model = AnnModel.init(ds.n_features, cfg, seed=int(rng.integers(2**32)))
    model.scaler = ds.scaler
    X = ds.X
    t = (ds.y > 0).astype(np.float64)
    n = X.shape[0]
    params = model.params()
    opt = _Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    def objective():
        z = model.forward(X, train=True, update_stats=False, dropout=False)[0]
        return bce_from_logits(z, t)

    history = [objective()]
    for epoch in range(epochs):
        order = rng.permutation(n)
        for bi, start in enumerate(range(0, n, batch_size)):
            idx = order[start : start + batch_size]
            if idx.size < 2 and n >= 2:
                # batch statistics need at least two rows
                continue
            z, cache = model.forward(X[idx], train=True, rng=rng)
            loss = bce_from_logits(z, t[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {bi}", epoch, bi)
            dz = (_sigmoid(z) - t[idx]) / idx.size
            g = model.backward(dz, cache)
            opt.step(params, [*g["W"], *g["b"], *g["gamma"], *g["beta"]])
        full = objective()
        if not np.isfinite(full):
            raise DivergenceError(f"non-finite loss after epoch {epoch}", epoch, None)
        history.append(full)
    model.loss_history = history
    return model
