"""Out-of-domain evaluation: apply per-layer-group models to other
corpora and report the percentage classified as pathologic.

Out-of-domain features always pass through the model's stored training
scaler; refitting the scaler per corpus would mask exactly the covariate
shifts this measures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ffn as ffn_mod
from . import svm as svm_mod
from .aggregate import FeatureMatrix, LayerGroup


@dataclass
class CrossEvalMatrix:
    corpus_ids: list[str]
    groups: list[LayerGroup]
    cells: np.ndarray       # (n_corpora, n_groups), percent in [0, 100]

    def as_rows(self):
        """Table rows mirroring the corpus x layer-group report layout."""
        header = ["corpus"] + [g.label for g in self.groups]
        rows = [header]
        for cid, row in zip(self.corpus_ids, self.cells):
            rows.append([cid] + [f"{v:.1f}" for v in row])
        return rows


def _predict(model, X) -> np.ndarray:
    mod = svm_mod if model.kind == "svm" else ffn_mod
    return mod.predict(model, X)


def cross_apply(model, group: LayerGroup, corpus: FeatureMatrix) -> float:
    """Percent of the corpus predicted pathologic, rounded to one decimal."""
    if len(corpus) == 0:
        raise ValueError(f"empty corpus {corpus.source_corpus!r}")
    if corpus.group is not group:
        raise ValueError(
            f"layer-group mismatch: model is {group.label}, features are "
            f"{corpus.group.label} ({corpus.source_corpus!r})"
        )
    preds = _predict(model, corpus.X)
    return round(100.0 * float(np.mean(preds == 1)), 1)


def eval_matrix(models: dict[LayerGroup, object],
                corpora: dict[str, dict[LayerGroup, FeatureMatrix]]) -> CrossEvalMatrix:
    """cells[c][g] = cross_apply(model_g, corpus_c at group g)."""
    groups = list(models)
    corpus_ids = list(corpora)
    cells = np.zeros((len(corpus_ids), len(groups)))
    for ci, cid in enumerate(corpus_ids):
        for gi, g in enumerate(groups):
            if g not in corpora[cid]:
                raise ValueError(f"corpus {cid!r} has no features for group "
                                 f"{g.label}")
            try:
                cells[ci, gi] = cross_apply(models[g], g, corpora[cid][g])
            except ValueError as exc:
                raise ValueError(f"cell [{cid}][{g.label}]: {exc}") from exc
    return CrossEvalMatrix(corpus_ids=corpus_ids, groups=groups, cells=cells)


def save_matrix(matrix: CrossEvalMatrix, path) -> None:
    with open(path, "w") as fh:
        for row in matrix.as_rows():
            fh.write(",".join(row) + "\n")
