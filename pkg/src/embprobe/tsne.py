"""Exact (dense) t-SNE for 2-D projection.

Per-point bandwidths are found by bisection so every conditional
distribution has entropy log2(perplexity); the embedding minimizes
KL(P || Q) with a Student-t kernel (one degree of freedom) by gradient
descent with early exaggeration and a momentum switch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .backend import tsne_step


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    n_iter: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.perplexity <= 1:
            raise ValueError("perplexity must exceed 1")


def squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def perplexity_calibration(sq_dists: np.ndarray, perplexity: float,
                           tol: float = 1e-4, max_steps: int = 64) -> np.ndarray:
    """Row-conditional probabilities P(j|i) at the requested perplexity.

    Bisects each row's precision beta = 1/(2 sigma^2) until the Shannon
    entropy of the row hits log2(perplexity) within tol bits.
    """
    D = np.asarray(sq_dists, dtype=np.float64)
    n = D.shape[0]
    if n - 1 < perplexity:
        raise ValueError(f"need more than perplexity+1 points, got {n}")
    target = math.log2(perplexity)
    P = np.zeros((n, n))
    off = ~np.eye(n, dtype=bool)
    for i in range(n):
        d = D[i][off[i]]
        if np.all(d == 0.0):
            # exact duplicates: deterministic jitter keeps the row usable
            warnings.warn(f"row {i} has all-zero distances; adding jitter")
            d = d + 1e-10 * (1.0 + np.arange(len(d)))
        # normalizing by the row mean makes P exactly invariant to a
        # global rescaling of the input distances
        beta, p = _calibrate_row(d / d.mean(), target, tol, max_steps)
        P[i][off[i]] = p
    return P


def _calibrate_row(d: np.ndarray, target_bits: float, tol: float,
                   max_steps: int):
    beta = 1.0
    lo, hi = 0.0, math.inf
    for _ in range(max_steps):
        w = np.exp(-beta * (d - d.min()))
        sum_w = w.sum()
        p = w / sum_w
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.sum(np.where(p > 0, p * np.log2(p), 0.0))
        if abs(h - target_bits) <= tol:
            break
        if h > target_bits:       # too flat: sharpen
            lo = beta
            beta = beta * 2.0 if hi == math.inf else (beta + hi) / 2.0
        else:
            hi = beta
            beta = (lo + beta) / 2.0
    return beta, p


def joint_probabilities(X: np.ndarray, perplexity: float) -> np.ndarray:
    cond = perplexity_calibration(squared_distances(X), perplexity)
    P = (cond + cond.T) / (2.0 * len(X))
    return P


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    """sum p log(p/q) with 0 log 0 = 0; raises if q vanishes under p > 0."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    mask = P > 0
    if np.any(Q[mask] == 0):
        raise ValueError("Q has zero mass where P is positive")
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne_embed(X: np.ndarray, config: TsneConfig):
    """Returns (Y, kl_trace): n x 2 coordinates and the per-iteration KL.

    The KL recorded during the first `exaggeration_iters` iterations is
    measured against the exaggerated P and is not comparable to later
    values.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n < 3 * config.perplexity:
        raise ValueError(
            f"need at least 3*perplexity = {3 * config.perplexity:.0f} points, "
            f"got {n}"
        )
    P = joint_probabilities(X, config.perplexity)

    rng = np.random.default_rng(config.seed)
    Y = 1e-4 * rng.standard_normal((n, 2))
    velocity = np.zeros_like(Y)
    kl_trace = []
    for it in range(1, config.n_iter + 1):
        P_eff = P * config.early_exaggeration if it <= config.exaggeration_iters else P
        grad, kl = tsne_step(Y, P_eff)
        if not math.isfinite(kl):
            raise FloatingPointError(f"non-finite KL at iteration {it}")
        momentum = (config.momentum_early if it < config.momentum_switch
                    else config.momentum_late)
        velocity = momentum * velocity - config.learning_rate * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
        kl_trace.append(kl)
    return Y, kl_trace


def save_projection(ids, Y, tags, path) -> None:
    """Delimited export: id, x, y, tag."""
    with open(path, "w") as fh:
        fh.write("id,x,y,tag\n")
        for uid, (x, y), tag in zip(ids, Y, tags):
            fh.write(f"{uid},{float(x)!r},{float(y)!r},{tag}\n")
