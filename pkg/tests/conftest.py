import json

import numpy as np
import pytest

from embprobe.corpus import DIM, N_LAYERS, write_embedding


def make_tensor(rng=None, n_frames=2, fill=None):
    if fill is not None:
        return np.full((N_LAYERS, n_frames, DIM), fill, dtype=np.float32)
    rng = rng or np.random.default_rng(0)
    return rng.standard_normal((N_LAYERS, n_frames, DIM)).astype(np.float32)


def write_corpus(tmp_path, corpus_id, speakers, utterances_per_speaker=2,
                 seed=0, n_frames=2):
    """Write a small corpus; speakers is {speaker_id: label}."""
    rng = np.random.default_rng(seed)
    (tmp_path / corpus_id).mkdir(exist_ok=True)
    utts = []
    for spk, label in speakers.items():
        for ui in range(utterances_per_speaker):
            uid = f"{spk}-u{ui}"
            rel = f"{corpus_id}/{uid}.emb"
            write_embedding(make_tensor(rng, n_frames=n_frames), tmp_path / rel)
            utts.append({
                "utterance_id": uid,
                "speaker_id": spk,
                "label": label,
                "embedding_path": rel,
            })
    mpath = tmp_path / f"{corpus_id}.json"
    mpath.write_text(json.dumps({
        "manifest_version": 1,
        "corpus_id": corpus_id,
        "utterances": utts,
    }))
    return mpath


@pytest.fixture
def small_manifest_path(tmp_path):
    return write_corpus(tmp_path, "mini", {"s1": 1, "s2": 0})
