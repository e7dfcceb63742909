"""Soft-margin kernel SVM trained with SMO."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .. import kernels as _k
from ..errors import ConvergenceError, ShapeError
from .data import Dataset, Scaler

KERNELS = ("linear", "poly", "rbf", "sigmoid")


@dataclass(frozen=True)
class KernelSpec:
    name: str = "rbf"
    degree: int = 3
    gamma: Optional[float] = None  # None -> 1 / (n_features * X.var())
    coef0: float = 0.0

    def __post_init__(self):
        if self.name not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.name!r}")
        if self.name == "poly" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    def resolve_gamma(self, X) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        var = float(np.var(X))
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def kernel_matrix(A, B, name: str, gamma: float, degree: int = 3, coef0: float = 0.0) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if name == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    dot = A @ B.T
    if name == "linear":
        return dot
    if name == "poly":
        return (gamma * dot + coef0) ** degree
    if name == "sigmoid":
        return np.tanh(gamma * dot + coef0)
    raise ValueError(f"unknown kernel {name!r}")


@dataclass(frozen=True)
class SvmModel:
    kernel: str
    gamma: float
    degree: int
    coef0: float
    C: float
    support_vectors: np.ndarray  # scaled feature space
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    bias: float
    support_indices: np.ndarray
    scaler: Optional[Scaler] = None
    n_iter: int = 0
    gap: float = 0.0

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def _scale(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ShapeError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self.scaler.transform(X) if self.scaler is not None else X

    def decision_scaled(self, Z) -> np.ndarray:
        Z = np.atleast_2d(Z)
        if self.support_vectors.shape[0] == 0:
            return np.full(Z.shape[0], self.bias)
        Kx = kernel_matrix(Z, self.support_vectors, self.kernel, self.gamma, self.degree, self.coef0)
        return Kx @ self.dual_coef + self.bias

    def decision_function(self, X) -> np.ndarray:
        """Scores for raw (unscaled) feature rows."""
        return self.decision_scaled(self._scale(X))

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def alphas(self, n_train: int) -> np.ndarray:
        a = np.zeros(n_train)
        a[self.support_indices] = np.abs(self.dual_coef)
        return a


def train_svm(
    ds: Dataset,
    kernel: KernelSpec = KernelSpec(),
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int = 100_000,
) -> SvmModel:
    """Solve the soft-margin dual on ``ds.X`` (expected standardized).

    Raises :class:`ConvergenceError` when the maximal KKT violation is still
    above ``tol`` after ``max_iter`` SMO steps.
    """
    if not C > 0:
        raise ValueError("C must be > 0")
    y = ds.y.astype(np.float64)
    if np.unique(y).size < 2:
        raise ValueError("training data must contain both classes")
    X = ds.X
    gamma = kernel.resolve_gamma(X)
    K = kernel_matrix(X, X, kernel.name, gamma, kernel.degree, kernel.coef0)
    alpha, G, n_iter, gap = _k.smo(K, y, C, tol, max_iter)
    if gap >= tol:
        raise ConvergenceError(
            f"SMO did not converge in {n_iter} iterations (KKT gap {gap:.3g} > {tol})",
            iterations=n_iter,
            gap=gap,
            n_support=int(np.sum(alpha > 0)),
        )
    bias = _bias(alpha, G, y, C)
    sv = np.flatnonzero(alpha > 0)
    return SvmModel(
        kernel=kernel.name,
        gamma=gamma,
        degree=kernel.degree,
        coef0=kernel.coef0,
        C=float(C),
        support_vectors=X[sv].copy(),
        dual_coef=(alpha[sv] * y[sv]),
        bias=bias,
        support_indices=sv,
        scaler=ds.scaler,
        n_iter=n_iter,
        gap=gap,
    )


def _bias(alpha, G, y, C) -> float:
    # b = -rho; rho averages y_i * G_i over free vectors, else the midpoint of its feasible interval
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return -float(np.mean(yG[free]))
    at_upper = alpha >= C
    at_lower = ~at_upper
    # rho in [lb, ub] from KKT of bounded multipliers
    ub_cand = yG[(at_upper & (y < 0)) | (at_lower & (y > 0))]
    lb_cand = yG[(at_upper & (y > 0)) | (at_lower & (y < 0))]
    ub = ub_cand.min() if ub_cand.size else np.inf
    lb = lb_cand.max() if lb_cand.size else -np.inf
    if np.isfinite(ub) and np.isfinite(lb):
        return -float((ub + lb) / 2)
    return -float(ub if np.isfinite(ub) else lb)


def svm_predict(model: SvmModel, x) -> Tuple[int, float]:
    """Label (ties to +1) and score for a single raw feature vector."""
    arr = x.to_array() if hasattr(x, "to_array") else np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError("svm_predict takes a single feature vector")
    score = float(model.decision_function(arr[None, :])[0])
    return (1 if score >= 0 else -1), score


def kkt_residuals(model: SvmModel, ds: Dataset) -> np.ndarray:
    """Per-point KKT violation of a model trained on ``ds``.

    Zero means the point satisfies its condition exactly: y f >= 1 for
    alpha = 0, y f = 1 for 0 < alpha < C, y f <= 1 for alpha = C.
    """
    a = model.alphas(len(ds))
    yf = ds.y * model.decision_scaled(ds.X)
    r = np.zeros(len(ds))
    lower = a <= 0
    upper = a >= model.C
    free = ~lower & ~upper
    r[lower] = np.maximum(0.0, 1.0 - yf[lower])
    r[upper] = np.maximum(0.0, yf[upper] - 1.0)
    r[free] = np.abs(yf[free] - 1.0)
    return r


def slack(model: SvmModel, ds: Dataset) -> np.ndarray:
    """Slack variables xi_i = max(0, 1 - y_i f(x_i)) at the solution."""
    return np.maximum(0.0, 1.0 - ds.y * model.decision_scaled(ds.X))
