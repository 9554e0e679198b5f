"""Training protocol: stratified 80/20 split, 5-fold grid-search
cross-validation, accuracy evaluation and the exact binomial
significance test against the 50% chance level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import ffn as ffn_mod
from . import svm as svm_mod
from .aggregate import FeatureMatrix
from .ffn import FfnConfig
from .svm import TrainingError

SVM_GAMMA_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
SVM_C_GRID = (5.0, 10.0, 20.0, 50.0)


@dataclass(frozen=True)
class GridSpec:
    estimator: str   # "svm" or "ffn"

    def configs(self) -> list[dict]:
        if self.estimator == "svm":
            # gamma varies fastest so the (C, gamma) tie-break is just
            # first-in-order
            return [{"C": C, "gamma": g}
                    for C, g in product(SVM_C_GRID, SVM_GAMMA_GRID)]
        if self.estimator == "ffn":
            out = []
            # order implements the tie rule: fewest parameters first,
            # then smallest learning rate
            for layers in ffn_mod.HIDDEN_LAYER_GRID:
                for units in ffn_mod.HIDDEN_UNIT_GRID:
                    for lr in sorted(ffn_mod.LR_GRID):
                        for act in ffn_mod.ACTIVATIONS:
                            out.append({"hidden_layers": layers,
                                        "hidden_units": units,
                                        "learning_rate": lr,
                                        "activation": act})
            def n_params(c, d=768):
                u, h = c["hidden_units"], c["hidden_layers"]
                return d * u + (h - 1) * u * u + h * u + u + 1

            out.sort(key=lambda c: (n_params(c), c["learning_rate"]))
            return out
        raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass
class CvResult:
    estimator: str
    configs: list[dict]
    fold_accuracies: np.ndarray          # (n_configs, k)
    fold_assignment: np.ndarray          # (n,) fold index per training row
    fold_ids: list[list[str]]            # row ids per fold (audit log)
    best_index: int

    @property
    def best_config(self) -> dict:
        return self.configs[self.best_index]

    @property
    def mean_accuracy(self) -> np.ndarray:
        return self.fold_accuracies.mean(axis=1)

    @property
    def std_accuracy(self) -> np.ndarray:
        return self.fold_accuracies.std(axis=1)


def split_train_test(fm: FeatureMatrix, ratio: float = 0.8, seed: int = 0):
    """Stratified split into (train, test); deterministic per seed."""
    y = fm.y
    for cls in (0, 1):
        if np.sum(y == cls) < 5:
            raise ValueError(
                f"need at least 5 rows per class, class {cls} has "
                f"{int(np.sum(y == cls))}"
            )
    rng = np.random.default_rng(seed)
    test_idx = []
    for cls in np.unique(y):
        cls_idx = np.flatnonzero(y == cls)
        n_test = int(round((1.0 - ratio) * len(cls_idx)))
        test_idx.extend(rng.permutation(cls_idx)[:n_test])
    test_mask = np.zeros(len(y), dtype=bool)
    test_mask[test_idx] = True
    return fm.subset(np.flatnonzero(~test_mask)), fm.subset(np.flatnonzero(test_mask))


def stratified_folds(y: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold index per row; a true partition, stratified by label."""
    y = np.asarray(y)
    for cls in np.unique(y):
        if np.sum(y == cls) < k:
            raise ValueError(
                f"class {cls} has fewer than {k} rows; folds would degenerate"
            )
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        cls_idx = rng.permutation(np.flatnonzero(y == cls))
        for pos, row in enumerate(cls_idx):
            folds[row] = pos % k
    return folds


def _fit(estimator: str, X, y, config: dict, seed: int,
         max_epochs: int | None = None):
    if estimator == "svm":
        return svm_mod.train_svm((X, y), C=config["C"], gamma=config["gamma"],
                                 seed=seed)
    extra = {} if max_epochs is None else {"max_epochs": max_epochs}
    cfg = FfnConfig(seed=seed, **config, **extra)
    model, _ = ffn_mod.train_ffn((X, y), cfg)
    return model


def _predict(estimator: str, model, X) -> np.ndarray:
    mod = svm_mod if estimator == "svm" else ffn_mod
    return mod.predict(model, X)


def _config_seed(seed: int, config: dict, fold: int) -> int:
    # stable per-cell seed so parallel and sequential runs agree
    key = repr(sorted(config.items())) + f"|{fold}"
    h = 2166136261
    for ch in key.encode():
        h = ((h ^ ch) * 16777619) % (2 ** 32)
    return (seed * 1000003 + h) % (2 ** 31)


def grid_search_cv(train: FeatureMatrix, spec: GridSpec, k: int = 5,
                   seed: int = 0, cv_max_epochs: int = 60) -> CvResult:
    """Evaluate every grid cell on identical stratified folds.

    Best config = max mean fold accuracy; ties resolve to the earliest
    config in grid order (smallest C then gamma for SVM, fewest
    parameters then smallest learning rate for FFN).  A cell whose
    training fails scores 0 on that fold.  FFN cells train under a
    reduced epoch budget (cv_max_epochs, identical for every cell); the
    final refit uses the full budget.
    """
    configs = spec.configs()
    folds = stratified_folds(train.y, k, seed)
    fold_ids = [[train.ids[i] for i in np.flatnonzero(folds == f)]
                for f in range(k)]
    acc = np.zeros((len(configs), k))
    for ci, config in enumerate(configs):
        for f in range(k):
            val = folds == f
            Xt, yt = train.X[~val], train.y[~val]
            Xv, yv = train.X[val], train.y[val]
            try:
                model = _fit(spec.estimator, Xt, yt, config,
                             _config_seed(seed, config, f),
                             max_epochs=cv_max_epochs)
                acc[ci, f] = float(np.mean(_predict(spec.estimator, model, Xv) == yv))
            except TrainingError:
                acc[ci, f] = 0.0
    best = int(np.argmax(acc.mean(axis=1)))   # first max wins the tie
    return CvResult(estimator=spec.estimator, configs=configs,
                    fold_accuracies=acc, fold_assignment=folds,
                    fold_ids=fold_ids, best_index=best)


def fit_best(train: FeatureMatrix, cv: CvResult, seed: int = 0):
    """Refit the winning config on the full training split."""
    return _fit(cv.estimator, train.X, train.y, cv.best_config, seed)


def evaluate(estimator: str, model, test: FeatureMatrix) -> float:
    if len(test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(_predict(estimator, model, test.X) == test.y))


def significance_test(correct: int, n: int, chance: float = 0.5) -> float:
    """One-sided exact binomial p-value of `correct` or more successes."""
    if not (0 <= correct <= n) or n < 1:
        raise ValueError(f"invalid counts correct={correct}, n={n}")
    if chance == 0.5:
        # exact integer arithmetic, then one float division
        total = sum(math.comb(n, i) for i in range(correct, n + 1))
        return total / 2 ** n
    return float(sum(math.comb(n, i) * chance ** i * (1 - chance) ** (n - i)
                     for i in range(correct, n + 1)))
