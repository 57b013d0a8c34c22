"""Dataset directories: planted-partition generator, ogbn-arxiv ingest, loading.

A dataset directory holds::

    edges.txt      "u<TAB>v" per line
    features.bin   intrinsic FeatureMatrix
    labels.txt     one class id per line
    train.txt, valid.txt, test.txt   node ids, one per line
"""
from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, load_edge_list, save_edge_list
from .io import FeatureMatrix, FormatError, read_features, read_ints, write_features, write_ints

EDGES, FEATURES, LABELS = "edges.txt", "features.bin", "labels.txt"
SPLITS = ("train", "valid", "test")


@dataclass
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    splits: dict[str, np.ndarray]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


def load_dataset(root) -> Dataset:
    root = Path(root)
    fm = read_features(root / FEATURES)
    labels = read_ints(root / LABELS)
    n = fm.rows
    if labels.size != n:
        raise FormatError(f"{root / LABELS}: {labels.size} labels for {n} nodes")
    graph = load_edge_list(root / EDGES, num_nodes=n)
    splits = {}
    for name in SPLITS:
        idx = read_ints(root / f"{name}.txt")
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise FormatError(f"{root / name}.txt: node id out of range")
        splits[name] = idx
    allidx = np.concatenate(list(splits.values()))
    if np.unique(allidx).size != allidx.size:
        raise FormatError("train/valid/test splits overlap")
    return Dataset(graph, fm.data, labels, splits)


@dataclass
class SynthParams:
    nodes: int = 1000
    classes: int = 4
    p_in: float = 0.05
    p_out: float = 0.005
    feature_dim: int = 16
    feature_signal: float = 0.35
    feature_noise: float = 1.0
    train_frac: float = 0.5
    valid_frac: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.nodes < self.classes:
            raise ValueError("need at least one node per class")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")
        if self.feature_dim < 1 or self.feature_noise < 0:
            raise ValueError("feature_dim must be >= 1 and feature_noise >= 0")
        if self.train_frac <= 0 or self.valid_frac < 0 or self.train_frac + self.valid_frac >= 1:
            raise ValueError("split fractions must satisfy 0 < train, 0 <= valid, train + valid < 1")


def planted_partition(params: SynthParams):
    """Sample (src, dst, features, labels, splits) for a planted-partition graph.

    Every unordered pair is linked with ``p_in`` inside a class and ``p_out``
    across classes; each edge gets a random direction.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    n, c = params.nodes, params.classes
    labels = rng.permutation(np.arange(n) % c)
    src_parts, dst_parts = [], []
    rows_per_chunk = max(1, 2_000_000 // n)
    for lo in range(0, n, rows_per_chunk):
        hi = min(n, lo + rows_per_chunk)
        same = labels[lo:hi, None] == labels[None, :]
        prob = np.where(same, params.p_in, params.p_out)
        hit = rng.random((hi - lo, n)) < prob
        u, v = np.nonzero(hit)
        u += lo
        keep = u < v
        src_parts.append(u[keep])
        dst_parts.append(v[keep])
    u = np.concatenate(src_parts)
    v = np.concatenate(dst_parts)
    flip = rng.random(u.size) < 0.5
    src = np.where(flip, v, u)
    dst = np.where(flip, u, v)

    means = rng.normal(0.0, params.feature_signal, size=(c, params.feature_dim))
    feats = means[labels] + rng.normal(0.0, params.feature_noise, size=(n, params.feature_dim))

    splits = {name: [] for name in SPLITS}
    for cls in range(c):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_tr = max(1, int(round(params.train_frac * members.size)))
        n_va = int(round(params.valid_frac * members.size))
        splits["train"].append(members[:n_tr])
        splits["valid"].append(members[n_tr:n_tr + n_va])
        splits["test"].append(members[n_tr + n_va:])
    splits = {k: np.sort(np.concatenate(v)) for k, v in splits.items()}
    return src, dst, feats, labels, splits


def write_dataset(root, src, dst, features, labels, splits) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    save_edge_list(root / EDGES, src, dst)
    write_features(root / FEATURES, FeatureMatrix(np.asarray(features), [("intrinsic", 0, features.shape[1])]))
    write_ints(root / LABELS, labels)
    for name in SPLITS:
        write_ints(root / f"{name}.txt", splits[name])
    return root


def synth(root, params: SynthParams) -> Path:
    return write_dataset(root, *planted_partition(params))


def _read_csv(path: Path, dtype) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt") as fh:
        return np.loadtxt(fh, delimiter=",", dtype=dtype, ndmin=2)


def _find(root: Path, *names: str) -> Path:
    for name in names:
        for cand in (root / name, root / (name + ".gz")):
            if cand.exists():
                return cand
    raise FileNotFoundError(f"none of {names} found under {root}")


def ingest_ogbn_arxiv(raw_root, out_root) -> Path:
    """Convert an extracted ogbn-arxiv download into a dataset directory.

    Expects the OGB layout: ``raw/edge.csv``, ``raw/node-feat.csv``,
    ``raw/node-label.csv`` and ``split/time/{train,valid,test}.csv``
    (optionally gzipped).  Edge direction is kept as given.
    """
    raw_root = Path(raw_root)
    edges = _read_csv(_find(raw_root, "raw/edge.csv"), np.int64)
    feats = _read_csv(_find(raw_root, "raw/node-feat.csv"), np.float32)
    labels = _read_csv(_find(raw_root, "raw/node-label.csv"), np.int64).ravel()
    splits = {name: _read_csv(_find(raw_root, f"split/time/{name}.csv"), np.int64).ravel() for name in SPLITS}
    if labels.size != feats.shape[0]:
        raise FormatError("node-label and node-feat row counts differ")
    return write_dataset(out_root, edges[:, 0], edges[:, 1], feats, labels, splits)
