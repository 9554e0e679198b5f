"""Corpus manifests and the binary embedding file format.

A corpus is a JSON manifest (``manifest_version: 1``) listing utterances,
each pointing at one embedding file.  Embedding files hold the raw
12 x frames x 768 hidden-state tensor of an utterance in a little-endian
binary layout:

    magic "EMB1" | u32 n_layers | u32 n_frames | u32 dim | f32 payload

The payload is layer-major, frame-major, dim-minor.  Layers are named
1..12 in all APIs (matching the 1-3 / 4-6 / 7-9 / 10-12 group names) but
stored 0-based on disk.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
N_LAYERS = 12
DIM = 768
HEADER_SIZE = 16
MANIFEST_VERSION = 1


class CorpusError(ValueError):
    """Raised on malformed manifests or embedding files."""


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    label: int
    embedding_path: str
    age_years: float | None = None
    content_tag: str = ""
    condition_tag: str = ""

    def __post_init__(self):
        if self.label not in (0, 1):
            raise CorpusError(f"label must be 0 or 1, got {self.label!r}")
        if self.age_years is not None and not (0.0 <= self.age_years <= 120.0):
            raise CorpusError(f"age out of range: {self.age_years}")


@dataclass(frozen=True)
class CorpusManifest:
    corpus_id: str
    utterances: tuple[UtteranceRecord, ...]
    label_scheme: str = "pathologic/control"
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if not self.corpus_id:
            raise CorpusError("corpus_id must be non-empty")
        labels: dict[str, int] = {}
        for u in self.utterances:
            prev = labels.setdefault(u.speaker_id, u.label)
            if prev != u.label:
                raise CorpusError(
                    f"conflicting label for speaker {u.speaker_id!r}"
                )

    @property
    def speaker_labels(self) -> dict[str, int]:
        return {u.speaker_id: u.label for u in self.utterances}

    def resolve(self, record: UtteranceRecord) -> Path:
        p = Path(record.embedding_path)
        return p if p.is_absolute() else self.base_dir / p


@dataclass
class ValidationReport:
    corpus_id: str
    n_checked: int = 0
    n_failed: int = 0
    failures: dict[str, str] = field(default_factory=dict)  # utterance_id -> first error

    @property
    def ok(self) -> bool:
        return self.n_failed == 0


def load_manifest(path) -> CorpusManifest:
    """Parse a manifest file and enforce all manifest invariants."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot parse manifest {path}: {exc}") from exc
    if doc.get("manifest_version") != MANIFEST_VERSION:
        raise CorpusError(
            f"unsupported manifest_version {doc.get('manifest_version')!r}"
        )
    for key in ("corpus_id", "utterances"):
        if key not in doc:
            raise CorpusError(f"manifest missing required field {key!r}")
    records = []
    for i, u in enumerate(doc["utterances"]):
        for key in ("utterance_id", "speaker_id", "label", "embedding_path"):
            if key not in u:
                raise CorpusError(f"utterance #{i} missing required field {key!r}")
        records.append(
            UtteranceRecord(
                utterance_id=u["utterance_id"],
                speaker_id=u["speaker_id"],
                label=int(u["label"]),
                embedding_path=u["embedding_path"],
                age_years=u.get("age_years"),
                content_tag=u.get("content_tag", ""),
                condition_tag=u.get("condition_tag", ""),
            )
        )
    return CorpusManifest(
        corpus_id=doc["corpus_id"],
        utterances=tuple(records),
        label_scheme=doc.get("label_scheme", "pathologic/control"),
        base_dir=path.parent,
    )


def save_manifest(manifest: CorpusManifest, path) -> None:
    path = Path(path)
    doc = {
        "manifest_version": MANIFEST_VERSION,
        "corpus_id": manifest.corpus_id,
        "label_scheme": manifest.label_scheme,
        "utterances": [
            {
                "utterance_id": u.utterance_id,
                "speaker_id": u.speaker_id,
                "label": u.label,
                "embedding_path": u.embedding_path,
                **({"age_years": u.age_years} if u.age_years is not None else {}),
                "content_tag": u.content_tag,
                "condition_tag": u.condition_tag,
            }
            for u in manifest.utterances
        ],
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def write_tensor(tensor: np.ndarray, path, expect_layers: int | None = None) -> None:
    """Write a 3-D float tensor in the EMB1 wire format."""
    tensor = np.ascontiguousarray(tensor, dtype="<f4")
    if tensor.ndim != 3:
        raise CorpusError(f"tensor must be 3-D, got shape {tensor.shape}")
    n_layers, n_frames, dim = tensor.shape
    if expect_layers is not None and n_layers != expect_layers:
        raise CorpusError(f"layer count must be {expect_layers}, got {n_layers}")
    if dim != DIM:
        raise CorpusError(f"dim must be {DIM}, got {dim}")
    if n_frames < 1:
        raise CorpusError("n_frames must be >= 1")
    if not np.all(np.isfinite(tensor)):
        raise CorpusError("tensor contains non-finite values")
    header = MAGIC + struct.pack("<III", n_layers, n_frames, dim)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(tensor.tobytes(order="C"))


def read_tensor(path, expect_layers: int | None = None) -> np.ndarray:
    """Read an EMB1 file; bit-exact inverse of write_tensor."""
    with open(path, "rb") as fh:
        header = fh.read(HEADER_SIZE)
        if len(header) < HEADER_SIZE or header[:4] != MAGIC:
            raise CorpusError(f"bad magic in {path}")
        n_layers, n_frames, dim = struct.unpack("<III", header[4:])
        if expect_layers is not None and n_layers != expect_layers:
            raise CorpusError(f"layer count must be {expect_layers}, got {n_layers}")
        if dim != DIM:
            raise CorpusError(f"dim must be {DIM}, got {dim}")
        if n_frames < 1:
            raise CorpusError("n_frames must be >= 1")
        payload = fh.read(4 * n_layers * n_frames * dim)
    expected = 4 * n_layers * n_frames * dim
    if len(payload) != expected:
        raise CorpusError(
            f"truncated payload in {path}: {len(payload)} of {expected} bytes"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_layers, n_frames, dim)
    if not np.all(np.isfinite(data)):
        raise CorpusError(f"non-finite value in {path}")
    return data.copy()


def write_embedding(tensor: np.ndarray, path) -> None:
    """Write a (12, n_frames, 768) float tensor; byte output is deterministic."""
    write_tensor(tensor, path, expect_layers=N_LAYERS)


def read_embedding(path) -> np.ndarray:
    """Read a 12-layer embedding file; bit-exact inverse of write_embedding."""
    return read_tensor(path, expect_layers=N_LAYERS)


def validate_corpus(manifest: CorpusManifest) -> ValidationReport:
    """Check every referenced embedding file; failures reported, never raised."""
    report = ValidationReport(corpus_id=manifest.corpus_id)
    for u in manifest.utterances:
        report.n_checked += 1
        fpath = manifest.resolve(u)
        if not fpath.is_file():
            report.failures[u.utterance_id] = "missing"
            report.n_failed += 1
            continue
        try:
            read_embedding(fpath)
        except CorpusError as exc:
            msg = str(exc)
            if "dim must be" in msg:
                msg = "dim mismatch"
            elif "layer count" in msg:
                msg = "layer count mismatch"
            report.failures[u.utterance_id] = msg
            report.n_failed += 1
    return report
