import json
import wave
from pathlib import Path

import numpy as np
import pytest

from embprobe.corpus import read_embedding, validate_corpus
from embprobe_extractor.extract import (RANDOM_INIT_ID, ExtractionError,
                                        ExtractionJob, expected_frames,
                                        extract, extract_corpus,
                                        load_extractor, read_audio)


def write_wav(path, samples, rate=16000, channels=1, width=2):
    samples = np.asarray(samples)
    if channels > 1 and samples.ndim == 1:
        samples = np.stack([samples] * channels, axis=1)
    pcm = np.clip(samples * 32767.0, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())
    return path


def tone(duration_s, rate=16000, freq=220.0):
    t = np.arange(int(duration_s * rate)) / rate
    return 0.5 * np.sin(2 * np.pi * freq * t)


@pytest.fixture(scope="session")
def extractor():
    ex = load_extractor("random-init-base", seed=0)
    assert ex.model_id == RANDOM_INIT_ID
    return ex


class TestReadAudio:
    def test_16k_mono_passthrough(self, tmp_path):
        wav = write_wav(tmp_path / "a.wav", tone(0.5))
        samples = read_audio(wav)
        assert len(samples) == 8000
        assert np.max(np.abs(samples)) <= 1.0

    def test_resamples_to_16k(self, tmp_path):
        wav = write_wav(tmp_path / "b.wav", tone(1.0, rate=8000), rate=8000)
        assert len(read_audio(wav)) == 16000

    def test_stereo_downmix(self, tmp_path):
        wav = write_wav(tmp_path / "c.wav", tone(0.25), channels=2)
        assert read_audio(wav).ndim == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ExtractionError, match="unreadable"):
            read_audio(tmp_path / "nope.wav")

    def test_garbage_file(self, tmp_path):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"not a wav at all")
        with pytest.raises(ExtractionError, match="unreadable"):
            read_audio(bad)


class TestFrameArithmetic:
    def test_one_second_is_49(self):
        assert expected_frames(16000) == 49

    def test_minimum_is_one(self):
        assert expected_frames(400) == 1


class TestExtract:
    def test_one_second_shape(self, tmp_path, extractor):
        wav = write_wav(tmp_path / "a.wav", tone(1.0))
        out = tmp_path / "a.emb"
        tensor = extract(ExtractionJob(str(wav), str(out)), extractor)
        assert tensor.shape[0] == 12 and tensor.shape[2] == 768
        assert abs(tensor.shape[1] - 49) <= 1
        stored = read_embedding(out)
        assert stored.shape == tensor.shape

    def test_frame_count_tracks_duration(self, tmp_path, extractor):
        for dur in (0.1, 0.37, 2.0):
            wav = write_wav(tmp_path / f"d{int(dur*100)}.wav", tone(dur))
            out = tmp_path / f"d{int(dur*100)}.emb"
            tensor = extract(ExtractionJob(str(wav), str(out)), extractor)
            assert abs(tensor.shape[1] - expected_frames(int(dur * 16000))) <= 1

    def test_silence_is_finite(self, tmp_path, extractor):
        wav = write_wav(tmp_path / "z.wav", np.zeros(16000))
        out = tmp_path / "z.emb"
        tensor = extract(ExtractionJob(str(wav), str(out)), extractor)
        assert np.all(np.isfinite(tensor))

    def test_repeat_is_byte_identical(self, tmp_path, extractor):
        wav = write_wav(tmp_path / "r.wav", tone(0.6))
        out1, out2 = tmp_path / "r1.emb", tmp_path / "r2.emb"
        extract(ExtractionJob(str(wav), str(out1)), extractor)
        extract(ExtractionJob(str(wav), str(out2)), extractor)
        assert out1.read_bytes() == out2.read_bytes()

    def test_sidecar_records_model_id(self, tmp_path, extractor):
        wav = write_wav(tmp_path / "m.wav", tone(0.5))
        out = tmp_path / "m.emb"
        extract(ExtractionJob(str(wav), str(out)), extractor)
        meta = json.loads(Path(str(out) + ".meta.json").read_text())
        assert meta["model_id"] == RANDOM_INIT_ID

    def test_too_short_rejected(self, tmp_path, extractor):
        wav = write_wav(tmp_path / "s.wav", np.zeros(300))
        with pytest.raises(ExtractionError, match="too short"):
            extract(ExtractionJob(str(wav), str(tmp_path / "s.emb")), extractor)


class TestExtractCorpus:
    def audio_manifest(self, tmp_path, n=3, break_one=False):
        utts = []
        for i in range(n):
            wav = tmp_path / f"u{i}.wav"
            if break_one and i == 1:
                wav.write_bytes(b"broken")
            else:
                write_wav(wav, tone(0.5, freq=200.0 + 50 * i))
            utts.append({"utterance_id": f"u{i}", "speaker_id": f"s{i}",
                         "label": i % 2, "audio_path": wav.name,
                         "age_years": 6.0 + i})
        mpath = tmp_path / "audio.json"
        mpath.write_text(json.dumps({"corpus_id": "rec", "utterances": utts}))
        return mpath

    def test_three_files_validate(self, tmp_path, extractor):
        mpath = self.audio_manifest(tmp_path)
        manifest, report = extract_corpus(mpath, tmp_path / "out", extractor)
        assert report.ok and report.n_done == 3
        assert len(manifest.utterances) == 3
        assert validate_corpus(manifest).ok
        assert (tmp_path / "out" / "rec.json").exists()

    def test_partial_on_one_unreadable(self, tmp_path, extractor):
        mpath = self.audio_manifest(tmp_path, break_one=True)
        manifest, report = extract_corpus(mpath, tmp_path / "out", extractor)
        assert not report.ok
        assert list(report.failures) == ["u1"]
        assert len(manifest.utterances) == 2
        assert validate_corpus(manifest).ok
        flagged = json.loads(
            (tmp_path / "out" / "rec.json.failures.json").read_text())
        assert flagged["partial"] and len(flagged["failures"]) == 1

    def test_reextraction_idempotent(self, tmp_path, extractor):
        mpath = self.audio_manifest(tmp_path)
        extract_corpus(mpath, tmp_path / "out", extractor)
        first = (tmp_path / "out" / "rec" / "u0.emb").read_bytes()
        extract_corpus(mpath, tmp_path / "out", extractor)
        assert (tmp_path / "out" / "rec" / "u0.emb").read_bytes() == first

    def test_missing_fields_rejected(self, tmp_path, extractor):
        mpath = tmp_path / "bad.json"
        mpath.write_text(json.dumps({"corpus_id": "x",
                                     "utterances": [{"utterance_id": "u"}]}))
        with pytest.raises(ExtractionError, match="missing"):
            extract_corpus(mpath, tmp_path / "out", extractor)


class TestAcceptance:
    def test_criterion_12_extractor_contract(self, tmp_path, extractor):
        wav = write_wav(tmp_path / "one.wav", tone(1.0))
        out1 = tmp_path / "one.emb"
        tensor = extract(ExtractionJob(str(wav), str(out1)), extractor)
        shape_ok = (tensor.shape[0] == 12 and tensor.shape[2] == 768
                    and abs(tensor.shape[1] - 49) <= 1)
        out2 = tmp_path / "one-again.emb"
        extract(ExtractionJob(str(wav), str(out2)), extractor)
        repeat_ok = out1.read_bytes() == out2.read_bytes()
        mpath = TestExtractCorpus().audio_manifest(tmp_path)
        manifest, report = extract_corpus(mpath, tmp_path / "out", extractor)
        corpus_ok = report.ok and validate_corpus(manifest).ok
        ok = shape_ok and repeat_ok and corpus_ok
        print(f"criterion 12: {'PASS' if ok else 'FAIL'} - 1 s at 16 kHz -> "
              f"{tensor.shape[0]}x{tensor.shape[1]}x{tensor.shape[2]}, "
              f"repeat byte-identical, 3-file corpus validates")
        assert ok


class TestCli:
    def test_extract_command(self, tmp_path):
        from embprobe_extractor.cli import main
        mpath = TestExtractCorpus().audio_manifest(tmp_path)
        code = main(["extract", "--manifest", str(mpath),
                     "--model-id", "random-init-base",
                     "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "rec.json").exists()

    def test_missing_manifest_exit_2(self, tmp_path):
        from embprobe_extractor.cli import main
        assert main(["extract", "--manifest", str(tmp_path / "no.json"),
                     "--out", str(tmp_path / "out")]) == 2

    def test_partial_extraction_exit_4(self, tmp_path):
        from embprobe_extractor.cli import main
        mpath = TestExtractCorpus().audio_manifest(tmp_path, break_one=True)
        assert main(["extract", "--manifest", str(mpath),
                     "--model-id", "random-init-base",
                     "--out", str(tmp_path / "out")]) == 4
