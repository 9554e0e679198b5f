"""Pure-numpy implementations of the hot numeric kernels.

These are the fallback used when the compiled extension (_kernels_c) is
not built.  Both backends implement the same pair-selection and update
rules, so they follow the same optimization path.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_TAU = 1e-12


def smo_solve(K, y, C, tol, max_iter):
    """Dual SVM solve by pairwise coordinate ascent on the box-constrained dual.

    Minimizes 0.5 a'Qa - e'a subject to 0 <= a <= C, y'a = 0, with
    Q_ij = y_i y_j K_ij.  The working pair is the maximal-violation pair;
    iteration stops when the KKT gap falls below tol.

    Returns (alpha, bias, n_iter, converged).
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)
    Q = K * np.outer(y, y)
    alpha = np.zeros(n)
    G = -np.ones(n)          # gradient of the dual objective at alpha = 0
    neg_inf = -np.inf

    it = 0
    converged = False
    while it < max_iter:
        viol = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        vi = np.where(up, viol, neg_inf)
        vj = np.where(low, viol, np.inf)
        i = int(np.argmax(vi))
        j = int(np.argmin(vj))
        if vi[i] - vj[j] <= tol:
            converged = True
            break

        ai_old, aj_old = alpha[i], alpha[j]
        Qi, Qj = Q[i], Q[j]
        if y[i] != y[j]:
            quad = Qi[i] + Qj[j] + 2.0 * Qi[j]
            if quad <= 0.0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai = ai_old + delta
            aj = aj_old + delta
            if diff > 0.0:
                if aj < 0.0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = -diff
            if diff > 0.0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = Qi[i] + Qj[j] - 2.0 * Qi[j]
            if quad <= 0.0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai = ai_old - delta
            aj = aj_old + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            else:
                if aj < 0.0:
                    aj = 0.0
                    ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = total

        dai = ai - ai_old
        daj = aj - aj_old
        alpha[i] = ai
        alpha[j] = aj
        G = (G + Qi * dai) + Qj * daj
        it += 1

    # bias from the KKT conditions: free points pin it exactly
    free = (alpha > 0.0) & (alpha < C)
    if np.any(free):
        # sequential accumulation keeps the bias bit-identical to the
        # compiled backend (np.mean would sum pairwise)
        acc = 0.0
        for t in np.flatnonzero(free):
            acc += float(-y[t] * G[t])
        b = acc / int(free.sum())
    else:
        viol = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        hi = np.max(np.where(up, viol, -np.inf))
        lo = np.min(np.where(low, viol, np.inf))
        b = float((hi + lo) / 2.0)
    return alpha, b, it, converged


def tsne_step(Y, P):
    """One exact t-SNE gradient evaluation.

    Returns (grad, kl) for the Student-t low-dimensional kernel with one
    degree of freedom.
    """
    Y = np.asarray(Y, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    sq = np.sum(Y * Y, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
    W = 1.0 / (1.0 + D)
    np.fill_diagonal(W, 0.0)
    Z = W.sum()
    Q = np.maximum(W / Z, 1e-300)
    M = (P - Q) * W
    grad = 4.0 * (Y * M.sum(axis=1)[:, None] - M @ Y)
    mask = P > 0.0
    kl = float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))
    return grad, kl
