import numpy as np
import pytest

from embprobe.aggregate import LayerGroup, build_dataset
from embprobe.corpus import validate_corpus
from embprobe.synth import (DEFAULT_PROFILE, SynthSpec, corpus_axes,
                            gen_corpus, gen_shifted_variant)

SMALL = SynthSpec(n_speakers_per_class=4, utterances_per_speaker=2,
                  n_frames=2, seed=7)


def label_axis_gap(fm, axes):
    """Mean projection gap between classes along the label direction."""
    proj = fm.X @ axes.label
    return float(proj[fm.y == 1].mean() - proj[fm.y == 0].mean())


class TestSpecValidation:
    def test_bad_noise(self):
        with pytest.raises(ValueError):
            SynthSpec(noise_std=0.0)

    def test_bad_profile(self):
        with pytest.raises(ValueError, match="layer_profile"):
            SynthSpec(layer_profile={"label": (1, 1, 1)})

    def test_negative_separation(self):
        with pytest.raises(ValueError):
            SynthSpec(label_separation=-1.0)


class TestAxes:
    def test_unit_norms(self):
        axes = corpus_axes(SMALL)
        for v in (axes.label, axes.condition, axes.age):
            assert abs(np.linalg.norm(v) - 1.0) < 1e-12
        assert axes.content_centers.shape == (SMALL.n_content_centers, 768)

    def test_deterministic_per_seed(self):
        a = corpus_axes(SMALL)
        b = corpus_axes(SMALL)
        assert np.array_equal(a.label, b.label)
        c = corpus_axes(SynthSpec(seed=8))
        assert not np.array_equal(a.label, c.label)


class TestGenCorpus:
    def test_counts_and_validation(self, tmp_path):
        manifest = gen_corpus(SMALL, tmp_path, "c1")
        assert len(manifest.utterances) == 2 * 4 * 2
        assert validate_corpus(manifest).ok
        labels = [u.label for u in manifest.utterances]
        assert labels.count(1) == labels.count(0)

    def test_ages_in_range(self, tmp_path):
        manifest = gen_corpus(SMALL, tmp_path, "c2")
        for u in manifest.utterances:
            assert SMALL.age_range[0] <= u.age_years <= SMALL.age_range[1]

    def test_byte_identical_regeneration(self, tmp_path):
        m1 = gen_corpus(SMALL, tmp_path / "a", "c")
        m2 = gen_corpus(SMALL, tmp_path / "b", "c")
        assert ((tmp_path / "a" / "c.json").read_bytes()
                == (tmp_path / "b" / "c.json").read_bytes())
        first = m1.utterances[0].embedding_path
        assert ((tmp_path / "a" / first).read_bytes()
                == (tmp_path / "b" / first).read_bytes())

    def test_class_gap_follows_layer_profile(self, tmp_path):
        spec = SynthSpec(n_speakers_per_class=12, utterances_per_speaker=2,
                         n_frames=2, label_separation=6.0, seed=3)
        gen_corpus(spec, tmp_path, "gap")
        axes = corpus_axes(spec)
        from embprobe.corpus import load_manifest
        manifest = load_manifest(tmp_path / "gap.json")
        for group, w in zip(LayerGroup, DEFAULT_PROFILE["label"]):
            fm = build_dataset(manifest, group)
            gap = label_axis_gap(fm, axes)
            assert abs(gap - w * 6.0) < 1.0


class TestShiftedVariant:
    def test_all_healthy(self, tmp_path):
        m = gen_shifted_variant(SMALL, tmp_path, "condition", 4.0)
        assert all(u.label == 0 for u in m.utterances)
        assert m.corpus_id == "synth-condition-shift"

    def test_invalid_shift_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="shift must be one of"):
            gen_shifted_variant(SMALL, tmp_path, "gender", 1.0)

    def test_condition_shift_expresses_by_group(self, tmp_path):
        spec = SynthSpec(n_speakers_per_class=12, utterances_per_speaker=2,
                         n_frames=2, seed=5)
        axes = corpus_axes(spec)
        mag = 8.0
        m = gen_shifted_variant(spec, tmp_path, "condition", mag)
        base = gen_corpus(spec, tmp_path, "base")
        for group, w in zip(LayerGroup, DEFAULT_PROFILE["condition"]):
            fm_shift = build_dataset(m, group)
            fm_base = build_dataset(base, group)
            healthy_ref = fm_base.X[fm_base.y == 0] @ axes.label
            moved = float((fm_shift.X @ axes.label).mean() - healthy_ref.mean())
            assert abs(moved - w * mag) < 1.0

    def test_content_shift_absent_in_lowest_group(self, tmp_path):
        spec = SynthSpec(n_speakers_per_class=12, utterances_per_speaker=2,
                         n_frames=2, seed=6)
        axes = corpus_axes(spec)
        m = gen_shifted_variant(spec, tmp_path, "content", 8.0)
        base = gen_corpus(spec, tmp_path, "base")
        fm_shift = build_dataset(m, LayerGroup.L1_3)
        fm_base = build_dataset(base, LayerGroup.L1_3)
        healthy_ref = fm_base.X[fm_base.y == 0] @ axes.label
        moved = float((fm_shift.X @ axes.label).mean() - healthy_ref.mean())
        assert abs(moved) < 1.0
