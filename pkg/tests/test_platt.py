import numpy as np
import pytest

from embprobe.svm import TrainingError, fit_platt


def nll_oracle(f, labels, A, B):
    """Direct evaluation of the regularized-target negative log likelihood."""
    f = np.asarray(f, dtype=float)
    lab = np.asarray(labels)
    n_pos = int(np.sum(lab == 1))
    n_neg = len(lab) - n_pos
    t = np.where(lab == 1, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))
    z = A * f + B
    return float(np.sum(t * z + np.logaddexp(0.0, -z)))


def test_symmetric_scores_give_half_at_zero():
    f = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
    labels = np.array([0, 0, 0, 1, 1, 1])
    A, B = fit_platt(f, labels)
    assert abs(B) < 1e-6
    p0 = 1.0 / (1.0 + np.exp(A * 0.0 + B))
    assert abs(p0 - 0.5) < 1e-6


def test_separated_scores_have_negative_slope():
    f = np.array([-1.0] * 10 + [1.0] * 10)
    labels = np.array([0] * 10 + [1] * 10)
    A, B = fit_platt(f, labels)
    assert A < 0


def test_fit_beats_grid_oracle():
    rng = np.random.default_rng(0)
    f = np.concatenate([rng.normal(-1, 0.7, 40), rng.normal(1.2, 0.7, 40)])
    labels = np.array([0] * 40 + [1] * 40)
    A, B = fit_platt(f, labels)
    fitted = nll_oracle(f, labels, A, B)
    grid = min(nll_oracle(f, labels, a, b)
               for a in np.linspace(-6, 0, 121)
               for b in np.linspace(-2, 2, 81))
    assert fitted <= grid + 1e-6


def test_degenerate_rejected():
    with pytest.raises(TrainingError, match="degenerate"):
        fit_platt(np.ones(10), np.array([0] * 5 + [1] * 5))


def test_single_class_rejected():
    with pytest.raises(TrainingError, match="single-class"):
        fit_platt(np.arange(6, dtype=float), np.ones(6, dtype=int))


def test_asymmetric_counts_shift_intercept():
    # more negatives than positives pushes p(0) below 0.5
    f = np.array([-1.0] * 30 + [1.0] * 5)
    labels = np.array([0] * 30 + [1] * 5)
    A, B = fit_platt(f, labels)
    p0 = 1.0 / (1.0 + np.exp(B))
    assert p0 < 0.5
