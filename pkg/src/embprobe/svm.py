"""RBF-kernel SVM trained by pairwise dual coordinate ascent, with Platt
sigmoid calibration so the classifier emits probabilities.

Features are z-scored inside the model (std floor 1e-8); the fitted
scaler travels with the model so out-of-domain corpora are never
re-scaled to their own statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import smo_solve

MODEL_FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray    # floored at 1e-8

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        mean = X.mean(axis=0)
        std = np.maximum(X.std(axis=0), 1e-8)
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray   # (m, d), already scaled
    dual_coefs: np.ndarray        # (m,), alpha_i * y_i
    bias: float
    gamma: float
    C: float
    platt_a: float
    platt_b: float
    scaler: Scaler
    n_iter: int = 0

    @property
    def kind(self) -> str:
        return "svm"


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input to rbf_kernel")
    d = x - y
    return math.exp(-gamma * float(d @ d))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Pairwise RBF kernel matrix between row sets A and B."""
    sq_a = np.sum(A * A, axis=1)
    sq_b = np.sum(B * B, axis=1)
    D = np.maximum(sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * D)


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """0.5 a'Qa - e'a with Q = yy' * K (the quantity the solver minimizes)."""
    Q = K * np.outer(y, y)
    return float(0.5 * alpha @ Q @ alpha - alpha.sum())


def fit_platt(decision_values, labels, max_iter: int = 100) -> tuple[float, float]:
    """Fit p(f) = 1 / (1 + exp(A f + B)) by regularized maximum likelihood.

    Newton's method with backtracking on the smoothed targets
    t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2).
    """
    f = np.asarray(decision_values, dtype=np.float64)
    lab = np.asarray(labels)
    if np.ptp(f) == 0:
        raise TrainingError("degenerate: all decision values identical")
    pos = lab == 1
    n_pos = int(pos.sum())
    n_neg = len(lab) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("single-class input to fit_platt")

    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(pos, hi, lo)

    def nll(a, b):
        z = a * f + b
        # stable log(1 + exp(z)) formulation of t*z + log(1 + exp(-z))
        return float(np.sum(t * z + np.logaddexp(0.0, -z)))

    A = 0.0
    B = math.log((n_neg + 1.0) / (n_pos + 1.0))
    err = nll(A, B)
    sigma = 1e-12
    for _ in range(max_iter):
        z = A * f + B
        p = 1.0 / (1.0 + np.exp(np.clip(z, -500, 500)))
        d1 = t - p                     # dNLL/dz per sample
        d2 = p * (1.0 - p)
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-10 and abs(g2) < 1e-10:
            break
        h11 = float(np.sum(f * f * d2)) + sigma
        h22 = float(np.sum(d2)) + sigma
        h12 = float(np.sum(f * d2))
        det = h11 * h22 - h12 * h12
        dA = -(h22 * g1 - h12 * g2) / det
        dB = -(h11 * g2 - h12 * g1) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            newA = A + step * dA
            newB = B + step * dB
            new_err = nll(newA, newB)
            if new_err < err + 1e-4 * step * gd:
                A, B, err = newA, newB, new_err
                break
            step /= 2.0
        else:
            break
    return A, B


def train_svm(features, C: float, gamma: float, tol: float = 1e-3,
              seed: int = 0) -> SvmModel:
    """Train a calibrated RBF SVM on a FeatureMatrix (or (X, y) pair)."""
    if hasattr(features, "X"):
        X, y01 = features.X, features.y
    else:
        X, y01 = features
    X = np.asarray(X, dtype=np.float64)
    y01 = np.asarray(y01)
    classes = np.unique(y01)
    if len(classes) < 2:
        raise TrainingError("single-class training input")
    n = len(y01)

    scaler = Scaler.fit(X)
    Xs = scaler.transform(X)
    y = np.where(y01 == 1, 1.0, -1.0)

    K = rbf_matrix(Xs, Xs, gamma)
    max_updates = min(10 * n * n, 100_000)
    alpha, b, n_iter, converged = smo_solve(K, y, float(C), float(tol), max_updates)
    if not converged:
        raise TrainingError(
            f"solver did not converge within {n_iter} pair updates"
        )

    f_train = (alpha * y) @ K + b
    platt_a, platt_b = fit_platt(f_train, y01)

    sv = alpha > 1e-10
    return SvmModel(
        support_vectors=Xs[sv].copy(),
        dual_coefs=(alpha * y)[sv].copy(),
        bias=float(b),
        gamma=float(gamma),
        C=float(C),
        platt_a=float(platt_a),
        platt_b=float(platt_b),
        scaler=scaler,
        n_iter=int(n_iter),
    )


def decision_values(model: SvmModel, X) -> np.ndarray:
    """f(x) = sum_i coef_i k(sv_i, scale(x)) + bias, vectorized over rows."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(
            f"dimension mismatch: model expects {model.support_vectors.shape[1]}, "
            f"got {X.shape[1]}"
        )
    Xs = model.scaler.transform(X)
    if len(model.dual_coefs) == 0:
        return np.full(len(Xs), model.bias)
    K = rbf_matrix(Xs, model.support_vectors, model.gamma)
    return K @ model.dual_coefs + model.bias


def decision_value(model: SvmModel, x) -> float:
    return float(decision_values(model, np.atleast_2d(x))[0])


def predict_proba(model: SvmModel, X) -> np.ndarray:
    f = decision_values(model, X)
    z = np.clip(model.platt_a * f + model.platt_b, -500, 500)
    return 1.0 / (1.0 + np.exp(z))


def predict(model: SvmModel, X) -> np.ndarray:
    """p >= 0.5 maps to the pathologic class (ties go to class 1)."""
    return (predict_proba(model, X) >= 0.5).astype(np.int64)


def save_svm(model: SvmModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "svm",
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefs": model.dual_coefs.tolist(),
        "bias": model.bias,
        "gamma": model.gamma,
        "C": model.C,
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "scaler_mean": model.scaler.mean.tolist(),
        "scaler_std": model.scaler.std.tolist(),
        "n_iter": model.n_iter,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_svm(path) -> SvmModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") != "svm":
        raise ValueError(f"{path} is not an svm model file")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    return SvmModel(
        support_vectors=np.array(doc["support_vectors"], dtype=np.float64).reshape(
            len(doc["dual_coefs"]), -1),
        dual_coefs=np.array(doc["dual_coefs"], dtype=np.float64),
        bias=doc["bias"],
        gamma=doc["gamma"],
        C=doc["C"],
        platt_a=doc["platt_a"],
        platt_b=doc["platt_b"],
        scaler=Scaler(
            mean=np.array(doc["scaler_mean"], dtype=np.float64),
            std=np.array(doc["scaler_std"], dtype=np.float64),
        ),
        n_iter=doc["n_iter"],
    )
