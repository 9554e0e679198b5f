"""Aggregation of raw embedding tensors into classifier-ready features.

Three mean-pooling axes: frames -> utterance, three consecutive layers ->
layer group, utterances -> speaker.  All pooling is the arithmetic mean,
so the axes commute.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .corpus import (DIM, CorpusManifest, CorpusError, read_embedding,
                     read_tensor, validate_corpus, write_tensor)


class LayerGroup(Enum):
    L1_3 = (1, 2, 3)
    L4_6 = (4, 5, 6)
    L7_9 = (7, 8, 9)
    L10_12 = (10, 11, 12)

    @property
    def members(self) -> tuple[int, int, int]:
        return self.value

    @property
    def label(self) -> str:
        lo, _, hi = self.value
        return f"{lo}-{hi}"

    @classmethod
    def from_label(cls, label: str) -> "LayerGroup":
        for g in cls:
            if g.label == label:
                return g
        raise ValueError(f"unknown layer group {label!r}; expected one of "
                         f"{[g.label for g in cls]}")


@dataclass(frozen=True)
class FeatureMatrix:
    ids: tuple[str, ...]
    X: np.ndarray           # (n, 768) float64
    y: np.ndarray           # (n,) int, 0/1
    level: str              # "speaker" or "utterance"
    group: LayerGroup
    source_corpus: str

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != len(self.ids):
            raise ValueError("X shape does not match ids")
        if len(self.y) != len(self.ids):
            raise ValueError("y length does not match ids")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("non-finite feature value")

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(
            ids=tuple(self.ids[i] for i in idx),
            X=self.X[idx],
            y=self.y[idx],
            level=self.level,
            group=self.group,
            source_corpus=self.source_corpus,
        )


def time_pool(tensor: np.ndarray) -> np.ndarray:
    """Mean over frames: (12, F, 768) -> (12, 768)."""
    if tensor.ndim != 3 or tensor.shape[1] < 1:
        raise ValueError("need a (layers, frames>=1, dim) tensor")
    return np.asarray(tensor, dtype=np.float64).mean(axis=1)


def layer_group_pool(per_layer: np.ndarray, group: LayerGroup) -> np.ndarray:
    """Mean of the group's three layer vectors: (12, 768) -> (768,)."""
    idx = [l - 1 for l in group.members]   # layers are named 1..12
    return np.asarray(per_layer, dtype=np.float64)[idx].mean(axis=0)


def speaker_pool(utterance_vectors) -> np.ndarray:
    """Mean of a speaker's utterance vectors; permutation invariant."""
    vecs = np.asarray(list(utterance_vectors), dtype=np.float64)
    if vecs.size == 0:
        raise ValueError("speaker has no utterance vectors")
    return vecs.mean(axis=0)


def build_dataset(manifest: CorpusManifest, group: LayerGroup,
                  level: str = "speaker") -> FeatureMatrix:
    """One 768-dim feature row per speaker or utterance, rows sorted by id."""
    if level not in ("speaker", "utterance"):
        raise ValueError(f"level must be 'speaker' or 'utterance', got {level!r}")
    if not manifest.utterances:
        raise CorpusError(f"corpus {manifest.corpus_id!r} is empty")
    report = validate_corpus(manifest)
    if not report.ok:
        raise CorpusError(
            f"corpus {manifest.corpus_id!r} failed validation: "
            f"{report.n_failed} bad utterance(s), first: "
            f"{next(iter(report.failures.items()))}"
        )

    utt_vec: dict[str, np.ndarray] = {}
    for u in manifest.utterances:
        tensor = read_embedding(manifest.resolve(u))
        utt_vec[u.utterance_id] = layer_group_pool(time_pool(tensor), group)

    if level == "utterance":
        ids = sorted(utt_vec)
        label_of = {u.utterance_id: u.label for u in manifest.utterances}
        X = np.stack([utt_vec[i] for i in ids])
        y = np.array([label_of[i] for i in ids], dtype=np.int64)
    else:
        by_speaker: dict[str, list[np.ndarray]] = {}
        for u in manifest.utterances:
            by_speaker.setdefault(u.speaker_id, []).append(utt_vec[u.utterance_id])
        labels = manifest.speaker_labels
        ids = sorted(by_speaker)
        X = np.stack([speaker_pool(by_speaker[s]) for s in ids])
        y = np.array([labels[s] for s in ids], dtype=np.int64)

    return FeatureMatrix(ids=tuple(ids), X=X, y=y, level=level,
                         group=group, source_corpus=manifest.corpus_id)


def save_features(fm: FeatureMatrix, path) -> None:
    """Delimited text export: unit_id, label, 768 feature values per row."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"# corpus={fm.source_corpus} group={fm.group.label} "
                 f"level={fm.level} dim={fm.X.shape[1]}\n")
        for uid, label, row in zip(fm.ids, fm.y, fm.X):
            vals = ",".join(repr(float(v)) for v in row)
            fh.write(f"{uid},{int(label)},{vals}\n")


def export_feature_vectors(fm: FeatureMatrix, out_dir) -> list[Path]:
    """Binary per-unit export reusing the embedding wire format (1 x 1 x 768)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for uid, row in zip(fm.ids, fm.X):
        p = out_dir / f"{uid}.vec"
        write_tensor(row.astype("<f4").reshape(1, 1, DIM), p, expect_layers=1)
        paths.append(p)
    return paths


def read_feature_vector(path) -> np.ndarray:
    return read_tensor(path, expect_layers=1).reshape(DIM)


def load_features(path) -> FeatureMatrix:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing feature header line")
        meta = dict(kv.split("=", 1) for kv in header[1:].split())
        ids, labels, rows = [], [], []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            ids.append(parts[0])
            labels.append(int(parts[1]))
            rows.append(np.array([float(v) for v in parts[2:]]))
    return FeatureMatrix(
        ids=tuple(ids),
        X=np.stack(rows),
        y=np.array(labels, dtype=np.int64),
        level=meta["level"],
        group=LayerGroup.from_label(meta["group"]),
        source_corpus=meta["corpus"],
    )
