"""High-dimensional decision-boundary approximation.

Keypoints sit where the calibrated classifier probability crosses 0.5 on
segments between opposite-class samples; the cloud is then enlarged
along keypoint-connecting lines and on hyperspheres around each keypoint
(radius = distance to the nearest other keypoint).  Everything accepted
satisfies |p - 0.5| <= tol and can be re-checked by re-evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ffn as ffn_mod
from . import svm as svm_mod
from .aggregate import FeatureMatrix
from .svm import SvmModel
from .tsne import TsneConfig, tsne_embed

SEGMENT_PROBES = 32
BISECT_CAP = 60

DEFAULT_TOL = 0.01
DEFAULT_N_PAIRS = 200
DEFAULT_N_LINES = 100
DEFAULT_N_SPHERE = 20


def _proba_fn(model):
    if hasattr(model, "predict_proba") and callable(model.predict_proba):
        return lambda X: np.atleast_1d(model.predict_proba(np.atleast_2d(X)))
    mod = svm_mod if model.kind == "svm" else ffn_mod
    return lambda X: mod.predict_proba(model, np.atleast_2d(X))


@dataclass
class BoundaryCloud:
    points: np.ndarray                 # (n, d)
    p_values: np.ndarray               # (n,)
    generations: list[str]             # "segment" | "keypoint_line" | "hypersphere"
    tol: float
    sv_pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    sv_neg: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __len__(self) -> int:
        return len(self.points)


def find_crossing(model, a, b, tol: float = DEFAULT_TOL):
    """Bisect the segment [a, b] for a point with |p - 0.5| <= tol.

    Returns (point, p) or None when the endpoints sit on the same side.
    """
    proba = _proba_fn(model)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pa = float(proba(a)[0])
    pb = float(proba(b)[0])
    if not (np.isfinite(pa) and np.isfinite(pb)):
        raise FloatingPointError("non-finite probability at segment endpoint")
    if abs(pa - 0.5) <= tol:
        return a, pa
    if abs(pb - 0.5) <= tol:
        return b, pb
    if (pa - 0.5) * (pb - 0.5) > 0:
        return None
    lo, p_lo = a, pa
    hi = b
    for _ in range(BISECT_CAP):
        mid = (lo + hi) / 2.0
        pm = float(proba(mid)[0])
        if abs(pm - 0.5) <= tol:
            return mid, pm
        if (p_lo - 0.5) * (pm - 0.5) > 0:
            lo, p_lo = mid, pm
        else:
            hi = mid
    return None


def generate_keypoints(model, X_pos, X_neg, n_pairs: int = DEFAULT_N_PAIRS,
                       tol: float = DEFAULT_TOL, seed: int = 0) -> BoundaryCloud:
    """Boundary points from sampled (positive, negative) sample pairs."""
    X_pos = np.atleast_2d(np.asarray(X_pos, dtype=np.float64))
    X_neg = np.atleast_2d(np.asarray(X_neg, dtype=np.float64))
    if len(X_pos) == 0 or len(X_neg) == 0:
        raise ValueError("both sample sets must be nonempty")
    total = len(X_pos) * len(X_neg)
    rng = np.random.default_rng(seed)
    chosen = (np.arange(total) if n_pairs >= total
              else rng.choice(total, size=n_pairs, replace=False))
    points, ps = [], []
    for flat in chosen:
        i, j = divmod(int(flat), len(X_neg))
        hit = find_crossing(model, X_pos[i], X_neg[j], tol)
        if hit is not None:
            points.append(hit[0])
            ps.append(hit[1])
    pts = np.stack(points) if points else np.zeros((0, X_pos.shape[1]))
    return BoundaryCloud(points=pts, p_values=np.array(ps),
                         generations=["segment"] * len(pts), tol=tol)


def refine_keypoints(model, cloud: BoundaryCloud, n_lines: int = DEFAULT_N_LINES,
                     n_sphere_samples: int = DEFAULT_N_SPHERE,
                     tol: float = DEFAULT_TOL, seed: int = 0) -> BoundaryCloud:
    """Enlarge a keypoint cloud along connecting lines and hyperspheres."""
    K = cloud.points
    if len(K) < 2:
        raise ValueError("refinement needs at least 2 keypoints")
    proba = _proba_fn(model)
    rng = np.random.default_rng(seed)
    new_points, new_ps, new_gen = [], [], []

    # (i) scan segments between sampled keypoint pairs for extra crossings
    total = len(K) * (len(K) - 1) // 2
    pair_idx = np.stack(np.triu_indices(len(K), k=1), axis=1)
    if n_lines < total:
        pair_idx = pair_idx[rng.choice(total, size=n_lines, replace=False)]
    ts = np.linspace(0.0, 1.0, SEGMENT_PROBES)
    for i, j in pair_idx:
        seg = K[i][None, :] + ts[:, None] * (K[j] - K[i])[None, :]
        p = proba(seg)
        side = p - 0.5
        for a in range(SEGMENT_PROBES - 1):
            if side[a] * side[a + 1] < 0:
                hit = find_crossing(model, seg[a], seg[a + 1], tol)
                if hit is not None:
                    new_points.append(hit[0])
                    new_ps.append(hit[1])
                    new_gen.append("keypoint_line")

    # (ii) hypersphere probing around every keypoint; radius = nearest
    # other keypoint (a superset of any concavity heuristic)
    diffs = K[:, None, :] - K[None, :, :]
    dist = np.sqrt(np.sum(diffs * diffs, axis=2))
    np.fill_diagonal(dist, np.inf)
    radii = dist.min(axis=1)
    for ki in range(len(K)):
        dirs = rng.standard_normal((n_sphere_samples, K.shape[1]))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        surface = K[ki][None, :] + radii[ki] * dirs
        p_surf = proba(surface)
        for si in range(n_sphere_samples):
            if abs(p_surf[si] - 0.5) <= tol:
                new_points.append(surface[si])
                new_ps.append(float(p_surf[si]))
                new_gen.append("hypersphere")
                continue
            # march inward from the surface looking for a sign change
            ts_in = np.linspace(1.0, 0.0, SEGMENT_PROBES)
            ray = K[ki][None, :] + ts_in[:, None] * (surface[si] - K[ki])[None, :]
            p_ray = proba(ray)
            side = p_ray - 0.5
            for a in range(SEGMENT_PROBES - 1):
                if side[a] * side[a + 1] < 0:
                    hit = find_crossing(model, ray[a], ray[a + 1], tol)
                    if hit is not None:
                        new_points.append(hit[0])
                        new_ps.append(hit[1])
                        new_gen.append("hypersphere")
                    break

    all_points = np.concatenate([K] + ([np.stack(new_points)] if new_points else []))
    all_ps = np.concatenate([cloud.p_values, np.array(new_ps)])
    all_gen = list(cloud.generations) + new_gen
    return BoundaryCloud(points=all_points, p_values=all_ps,
                         generations=all_gen, tol=tol,
                         sv_pos=cloud.sv_pos, sv_neg=cloud.sv_neg)


def export_support_vectors(model):
    """Support vectors in original feature space, split by class.

    Non-SVM models have no support vectors; they yield two empty sets.
    """
    if not isinstance(model, SvmModel):
        return np.zeros((0, 0)), np.zeros((0, 0))
    # stored vectors are scaled; map back to the input feature space
    sv = model.support_vectors * model.scaler.std + model.scaler.mean
    pos = model.dual_coefs > 0
    return sv[pos], sv[~pos]


def attach_support_vectors(cloud: BoundaryCloud, model) -> BoundaryCloud:
    sv_pos, sv_neg = export_support_vectors(model)
    cloud.sv_pos = sv_pos
    cloud.sv_neg = sv_neg
    return cloud


def project_boundary(data: FeatureMatrix, cloud: BoundaryCloud,
                     perplexity: float = 30.0, seed: int = 0):
    """Joint 2-D t-SNE of data, boundary cloud and support vectors.

    Returns (Y, tags, ids); row order is data, boundary, sv-pos, sv-neg.
    """
    blocks = [data.X, cloud.points]
    tags = (["data-pos" if lbl == 1 else "data-neg" for lbl in data.y]
            + ["boundary"] * len(cloud))
    ids = list(data.ids) + [f"boundary-{i}" for i in range(len(cloud))]
    if cloud.sv_pos.size:
        blocks.append(cloud.sv_pos)
        tags += ["sv-pos"] * len(cloud.sv_pos)
        ids += [f"sv-pos-{i}" for i in range(len(cloud.sv_pos))]
    if cloud.sv_neg.size:
        blocks.append(cloud.sv_neg)
        tags += ["sv-neg"] * len(cloud.sv_neg)
        ids += [f"sv-neg-{i}" for i in range(len(cloud.sv_neg))]
    X = np.concatenate(blocks)
    Y, _ = tsne_embed(X, TsneConfig(perplexity=perplexity, seed=seed))
    return Y, tags, ids


def save_cloud(cloud: BoundaryCloud, path) -> None:
    """Delimited export: one row = 768 coordinates, p, generation."""
    with open(path, "w") as fh:
        dim = cloud.points.shape[1] if len(cloud) else 0
        fh.write(f"# tol={float(cloud.tol)!r} dim={dim}\n")
        for pt, p, gen in zip(cloud.points, cloud.p_values, cloud.generations):
            fh.write(",".join(repr(float(v)) for v in pt)
                     + f",{float(p)!r},{gen}\n")


def load_cloud(path) -> BoundaryCloud:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        meta = dict(kv.split("=", 1) for kv in header[1:].split())
        points, ps, gens = [], [], []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            points.append([float(v) for v in parts[:-2]])
            ps.append(float(parts[-2]))
            gens.append(parts[-1])
    dim = int(meta["dim"])
    pts = np.array(points) if points else np.zeros((0, dim))
    return BoundaryCloud(points=pts, p_values=np.array(ps),
                         generations=gens, tol=float(meta["tol"]))
