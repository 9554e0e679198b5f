"""wav2vec 2.0 layer-wise extraction into the embprobe corpus format.

Audio is resampled to 16 kHz mono and forwarded through a 12-block,
768-dim base model; the output of every transformer block (not the
convolutional front end) is written as one (12, n_frames, 768) tensor.
Inference runs without dropout, so extraction is deterministic and
repeated runs produce identical bytes.
"""

from __future__ import annotations

import json
import os
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from embprobe.corpus import (CorpusManifest, UtteranceRecord, save_manifest,
                             write_embedding)

TARGET_SAMPLE_RATE = 16000
MIN_SAMPLES = 400               # one 25 ms receptive field at 16 kHz
FRAME_STRIDE = 320              # 20 ms
DEFAULT_MODEL_ID = "facebook/wav2vec2-base-960h"
RANDOM_INIT_ID = "random-init-base"


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class ExtractionJob:
    audio_path: str
    embedding_path: str
    model_id: str = DEFAULT_MODEL_ID
    target_sample_rate: int = TARGET_SAMPLE_RATE


@dataclass
class Extractor:
    """A loaded model plus the identifier recorded in output sidecars."""
    model: object
    model_id: str


@dataclass
class ExtractionReport:
    n_done: int = 0
    failures: dict[str, str] = field(default_factory=dict)  # utterance_id -> error

    @property
    def ok(self) -> bool:
        return not self.failures


def expected_frames(n_samples: int) -> int:
    """Frame count implied by the 25 ms / 20 ms front-end arithmetic."""
    return (n_samples - MIN_SAMPLES) // FRAME_STRIDE + 1


def load_extractor(model_id: str = DEFAULT_MODEL_ID, seed: int = 0) -> Extractor:
    """Load a pre-trained checkpoint, or fall back to a seeded random
    initialization of the base architecture when the checkpoint cannot
    be fetched.  The fallback keeps every shape and determinism contract;
    only the learned weights differ, and the sidecar records which
    variant produced each file.
    """
    import torch
    from transformers import Wav2Vec2Config, Wav2Vec2Model

    if model_id != RANDOM_INIT_ID:
        try:
            model = Wav2Vec2Model.from_pretrained(model_id)
            model.eval()
            return Extractor(model=model, model_id=model_id)
        except Exception:
            pass
    torch.manual_seed(seed)
    config = Wav2Vec2Config()   # base: 12 blocks, 768-dim hidden states
    model = Wav2Vec2Model(config)
    model.eval()
    return Extractor(model=model, model_id=RANDOM_INIT_ID)


def read_audio(path, target_rate: int = TARGET_SAMPLE_RATE) -> np.ndarray:
    """PCM WAV to float64 mono at the target rate, values in [-1, 1]."""
    path = Path(path)
    if not path.is_file():
        raise ExtractionError(f"unreadable audio: {path}")
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ExtractionError(f"unreadable audio: {path}: {exc}") from exc
    if width == 2:
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 1:
        samples = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 4:
        samples = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    else:
        raise ExtractionError(f"unsupported sample width {width} in {path}")
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    if rate != target_rate:
        g = np.gcd(rate, target_rate)
        samples = resample_poly(samples, target_rate // g, rate // g)
    return samples


def extract(job: ExtractionJob, extractor: Extractor) -> np.ndarray:
    """Run one file through the model and write its embedding tensor."""
    import torch

    samples = read_audio(job.audio_path, job.target_sample_rate)
    if len(samples) < MIN_SAMPLES:
        raise ExtractionError(
            f"{job.audio_path}: too short, need >= {MIN_SAMPLES} samples "
            f"(25 ms), got {len(samples)}"
        )
    wav = torch.from_numpy(samples.astype(np.float32)).unsqueeze(0)
    with torch.no_grad():
        out = extractor.model(wav, output_hidden_states=True)
    # hidden_states[0] is the convolutional front end; blocks follow
    layers = out.hidden_states[1:]
    tensor = np.stack([h.squeeze(0).numpy() for h in layers]).astype("<f4")
    if not np.all(np.isfinite(tensor)):
        raise ExtractionError(f"{job.audio_path}: non-finite model output")
    n_frames = tensor.shape[1]
    if abs(n_frames - expected_frames(len(samples))) > 1:
        raise ExtractionError(
            f"{job.audio_path}: frame count {n_frames} deviates from the "
            f"stride arithmetic ({expected_frames(len(samples))})"
        )
    out_path = Path(job.embedding_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_name(out_path.name + ".tmp")
    write_embedding(tensor, tmp)
    os.replace(tmp, out_path)
    Path(str(out_path) + ".meta.json").write_text(json.dumps(
        {"model_id": extractor.model_id, "audio_path": str(job.audio_path),
         "n_frames": n_frames}, sort_keys=True) + "\n")
    return tensor


def load_audio_manifest(path) -> tuple[str, list[dict]]:
    """Input listing: corpus_id plus per-utterance audio paths and labels."""
    doc = json.loads(Path(path).read_text())
    if "corpus_id" not in doc or "utterances" not in doc:
        raise ExtractionError(f"{path}: need corpus_id and utterances")
    for u in doc["utterances"]:
        for key in ("utterance_id", "speaker_id", "label", "audio_path"):
            if key not in u:
                raise ExtractionError(f"{path}: utterance missing {key!r}")
    return doc["corpus_id"], doc["utterances"]


def extract_corpus(manifest_path, out_dir, extractor: Extractor,
                   base_dir=None) -> tuple[CorpusManifest, ExtractionReport]:
    """Extract every utterance; per-file failures are collected, not raised.

    Returns the emitted manifest (partial if anything failed) and a
    report listing the failures.
    """
    corpus_id, utterances = load_audio_manifest(manifest_path)
    out_dir = Path(out_dir)
    base_dir = Path(base_dir) if base_dir else Path(manifest_path).parent
    report = ExtractionReport()
    records = []
    for u in utterances:
        audio = Path(u["audio_path"])
        if not audio.is_absolute():
            audio = base_dir / audio
        rel_path = f"{corpus_id}/{u['utterance_id']}.emb"
        job = ExtractionJob(audio_path=str(audio),
                            embedding_path=str(out_dir / rel_path),
                            model_id=extractor.model_id)
        try:
            extract(job, extractor)
        except ExtractionError as exc:
            report.failures[u["utterance_id"]] = str(exc)
            continue
        report.n_done += 1
        records.append(UtteranceRecord(
            utterance_id=u["utterance_id"],
            speaker_id=u["speaker_id"],
            label=int(u["label"]),
            embedding_path=rel_path,
            age_years=u.get("age_years"),
            content_tag=u.get("content_tag", ""),
            condition_tag=u.get("condition_tag", ""),
        ))
    manifest = CorpusManifest(corpus_id=corpus_id, utterances=tuple(records),
                              base_dir=out_dir)
    out_manifest = out_dir / f"{corpus_id}.json"
    out_manifest.parent.mkdir(parents=True, exist_ok=True)
    save_manifest(manifest, out_manifest)
    if not report.ok:
        Path(str(out_manifest) + ".failures.json").write_text(
            json.dumps({"partial": True, "failures": report.failures},
                       sort_keys=True, indent=1) + "\n")
    return manifest, report
