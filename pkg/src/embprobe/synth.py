"""Synthetic embedding corpora with controlled covariates.

A Gaussian cluster model stands in for the private clinical recordings:
class separation, recording-condition offset, an age gradient and
spoken-content clusters each express with a per-layer-group weight, so
the known layer-wise confound directions can be reproduced and tested.
No acoustic realism is claimed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregate import LayerGroup
from .corpus import (DIM, N_LAYERS, CorpusManifest, UtteranceRecord,
                     save_manifest, write_embedding)

GROUP_ORDER = tuple(LayerGroup)   # L1_3, L4_6, L7_9, L10_12

# how strongly each signal expresses per layer group (1-3, 4-6, 7-9, 10-12):
# class signal everywhere (weaker at the top), condition and age in the
# low/middle groups, spoken content in the middle groups
DEFAULT_PROFILE = {
    "label": (1.0, 1.0, 0.9, 0.7),
    "condition": (1.0, 0.5, 0.0, 0.0),
    "age": (1.0, 0.8, 0.2, 0.0),
    "content": (0.0, 1.0, 1.0, 0.3),
}

SHIFT_KINDS = ("condition", "age", "content")


@dataclass(frozen=True)
class SynthSpec:
    n_speakers_per_class: int = 100
    utterances_per_speaker: int = 3
    label_separation: float = 6.0        # class-mean distance / noise_std
    condition_magnitude: float = 0.0     # additive offset, feature units
    age_scale: float = 0.0               # feature units per year
    n_content_centers: int = 3
    content_scale: float = 2.0           # center spread / noise_std
    layer_profile: dict = field(default_factory=lambda: dict(DEFAULT_PROFILE))
    noise_std: float = 1.0
    n_frames: int = 4
    age_range: tuple[float, float] = (4.0, 12.0)
    seed: int = 0

    def __post_init__(self):
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        if self.n_content_centers < 1:
            raise ValueError("need at least one content center")
        if self.label_separation < 0:
            raise ValueError("label_separation must be >= 0")
        for key in DEFAULT_PROFILE:
            w = self.layer_profile.get(key)
            if w is None or len(w) != 4 or any(v < 0 for v in w):
                raise ValueError(f"layer_profile[{key!r}] needs 4 weights >= 0")


@dataclass(frozen=True)
class SynthAxes:
    """Fixed unit directions shared by a corpus and its shifted variants."""
    label: np.ndarray
    condition: np.ndarray
    age: np.ndarray
    content_centers: np.ndarray   # (k, 768)


def corpus_axes(spec: SynthSpec) -> SynthAxes:
    rng = np.random.default_rng(spec.seed)

    def unit():
        v = rng.standard_normal(DIM)
        return v / np.linalg.norm(v)

    label = unit()
    centers = rng.standard_normal((spec.n_content_centers, DIM))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return SynthAxes(label=label, condition=unit(), age=unit(),
                     content_centers=centers * spec.content_scale * spec.noise_std)


def _group_weight(spec: SynthSpec, key: str, group_index: int) -> float:
    return float(spec.layer_profile[key][group_index])


def _utterance_mean(spec: SynthSpec, axes: SynthAxes, group_index: int,
                    label: int, age: float, content_idx: int,
                    shift_kind: str | None, shift_vec: np.ndarray | None) -> np.ndarray:
    sign = 1.0 if label == 1 else -1.0
    mean = (_group_weight(spec, "label", group_index)
            * sign * 0.5 * spec.label_separation * spec.noise_std * axes.label)
    mean = mean + (_group_weight(spec, "condition", group_index)
                   * spec.condition_magnitude * axes.condition)
    mean = mean + (_group_weight(spec, "age", group_index)
                   * spec.age_scale * age * axes.age)
    mean = mean + (_group_weight(spec, "content", group_index)
                   * axes.content_centers[content_idx])
    if shift_kind is not None:
        mean = mean + _group_weight(spec, shift_kind, group_index) * shift_vec
    return mean


def _generate(spec: SynthSpec, out_dir, corpus_id: str, labels: list[int],
              sample_seed: int, shift_kind: str | None = None,
              shift_vec: np.ndarray | None = None) -> CorpusManifest:
    out_dir = Path(out_dir)
    emb_dir = out_dir / corpus_id
    emb_dir.mkdir(parents=True, exist_ok=True)
    axes = corpus_axes(spec)
    rng = np.random.default_rng(sample_seed)

    records = []
    for si, label in enumerate(labels):
        speaker_id = f"{corpus_id}-s{si:04d}"
        age = float(rng.uniform(*spec.age_range))
        for ui in range(spec.utterances_per_speaker):
            utt_id = f"{speaker_id}-u{ui:02d}"
            content_idx = int(rng.integers(spec.n_content_centers))
            tensor = np.empty((N_LAYERS, spec.n_frames, DIM), dtype=np.float32)
            for gi, group in enumerate(GROUP_ORDER):
                mean = _utterance_mean(spec, axes, gi, label, age,
                                       content_idx, shift_kind, shift_vec)
                for layer in group.members:
                    layer_mean = mean + spec.noise_std * rng.standard_normal(DIM)
                    frames = layer_mean + spec.noise_std * rng.standard_normal(
                        (spec.n_frames, DIM))
                    tensor[layer - 1] = frames.astype(np.float32)
            rel_path = f"{corpus_id}/{utt_id}.emb"
            write_embedding(tensor, out_dir / rel_path)
            records.append(UtteranceRecord(
                utterance_id=utt_id,
                speaker_id=speaker_id,
                label=label,
                embedding_path=rel_path,
                age_years=age,
                content_tag=f"C{content_idx}",
                condition_tag=shift_kind or "base",
            ))
    manifest = CorpusManifest(corpus_id=corpus_id, utterances=tuple(records),
                              base_dir=out_dir)
    save_manifest(manifest, out_dir / f"{corpus_id}.json")
    return manifest


def gen_corpus(spec: SynthSpec, out_dir, corpus_id: str = "synth") -> CorpusManifest:
    """Two-class corpus: n_speakers_per_class pathologic + control."""
    labels = [1] * spec.n_speakers_per_class + [0] * spec.n_speakers_per_class
    return _generate(spec, out_dir, corpus_id, labels, sample_seed=spec.seed + 1)


def gen_shifted_variant(spec: SynthSpec, out_dir, shift: str, magnitude: float,
                        corpus_id: str | None = None) -> CorpusManifest:
    """Healthy-only corpus from the control distribution plus one shift.

    The shift is applied along the class axis so a covariate mismatch
    masquerades as pathology wherever that covariate expresses; per
    layer group it is scaled by the covariate's profile weight.
    """
    if shift not in SHIFT_KINDS:
        raise ValueError(f"shift must be one of {SHIFT_KINDS}, got {shift!r}")
    axes = corpus_axes(spec)
    shift_vec = magnitude * axes.label
    if corpus_id is None:
        corpus_id = f"synth-{shift}-shift"
    labels = [0] * spec.n_speakers_per_class
    # different sample seed than the base corpus: an unseen population
    return _generate(spec, out_dir, corpus_id, labels,
                     sample_seed=spec.seed + 1000 + SHIFT_KINDS.index(shift),
                     shift_kind=shift, shift_vec=shift_vec)
