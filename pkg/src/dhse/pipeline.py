"""End-to-end runs: feature extraction with caching, training, Correct and Smooth, reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import torch

from . import cs
from .datasets import Dataset, load_dataset
from .distance import STAT_NAMES
from .features import extract_all, set_threads
from .io import FeatureMatrix, FormatError, read_checkpoint, read_features, write_checkpoint, write_features
from .models import AttentionGraph, DhseModel, ModelConfig, TrainConfig, accuracy, model_forward, to_blocks, train
from .structure import GRAPH_LEVEL, NODE_LEVEL, hop_columns, structure_width

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 1)."""


@dataclass
class RunConfig:
    data_dir: str = "data"
    cache_dir: str | None = None
    out_dir: str = "runs"
    k: int = 2
    model: str = "agdn"
    hidden: int = 64
    heads: int = 3
    layers: int = 2
    diffusion_k: int = 3
    transition: str = "gat"
    activation: str = "elu"
    dropout: float = 0.0
    embed_dropout: float = 0.0
    epochs: int = 100
    lr: float = 0.01
    weight_decay: float = 0.0
    keep_best: bool = True
    alpha_correct: float = 0.9
    alpha_smooth: float = 0.8
    cs_scale: float = 1.0
    cs_max_iters: int = 1000
    cs_tol: float = 1e-9
    drop_degree: bool = False
    drop_node: bool = False
    drop_graph: bool = False
    drop_distance: bool = False
    no_encoding: bool = False
    seed: int = 0
    num_seeds: int = 1
    threads: int | None = None

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.model not in ("gat", "agdn"):
            raise ConfigError(f"model must be gat or agdn, got {self.model!r}")
        if self.num_seeds < 1 or self.epochs < 1:
            raise ConfigError("num_seeds and epochs must be >= 1")
        try:
            self.cs_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else Path(self.data_dir) / "cache"

    def cs_config(self) -> cs.CsConfig:
        return cs.CsConfig(self.alpha_correct, self.alpha_smooth, self.cs_scale, self.cs_max_iters, self.cs_tol)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.lr, self.weight_decay, self.keep_best)

    def model_name(self) -> str:
        base = "DHSE" + self.model.upper()
        if self.no_encoding:
            return f"{self.model.upper()}+raw features"
        for flag, tag in (("drop_degree", "degree"), ("drop_node", "node"),
                          ("drop_graph", "graph"), ("drop_distance", "distance")):
            if getattr(self, flag):
                base += f"-{tag}"
        return base


def _cache_files(cfg: RunConfig) -> tuple[Path, Path]:
    return cfg.cache_path / f"structure_k{cfg.k}.bin", cfg.cache_path / f"distance_k{cfg.k}.bin"


def cmd_extract(cfg: RunConfig, dataset: Dataset | None = None) -> tuple[Path, Path]:
    """Compute and write the structure and distance caches."""
    set_threads(cfg.threads)
    ds = dataset or load_dataset(cfg.data_dir)
    t0 = time.perf_counter()
    structure, distance = extract_all(ds.graph, cfg.k)
    s_blocks = [("degree", 0, 2)] + [(f"hop{r}", 2 + 6 * (r - 1), 2 + 6 * r) for r in range(1, cfg.k + 1)]
    s_path, d_path = _cache_files(cfg)
    s_path.parent.mkdir(parents=True, exist_ok=True)
    write_features(s_path, FeatureMatrix(structure, s_blocks))
    write_features(d_path, FeatureMatrix(distance, [("distance", 0, len(STAT_NAMES))]))
    log.info("extracted %d nodes in %.2fs -> %s", ds.graph.num_nodes, time.perf_counter() - t0, cfg.cache_path)
    return s_path, d_path


def load_raw_blocks(cfg: RunConfig, ds: Dataset) -> dict[str, np.ndarray]:
    s_path, d_path = _cache_files(cfg)
    if not (s_path.exists() and d_path.exists()):
        cmd_extract(cfg, ds)
    structure = read_features(s_path).data
    distance = read_features(d_path).data
    n = ds.graph.num_nodes
    if structure.shape != (n, structure_width(cfg.k)) or distance.shape != (n, len(STAT_NAMES)):
        raise FormatError(f"cached features in {cfg.cache_path} do not match the dataset; re-run extract")
    return {"intrinsic": ds.features, "structure": structure, "distance": distance}


def apply_ablation(cfg: RunConfig, raw: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Drop the feature columns switched off by the ablation flags."""
    structure = raw["structure"]
    keep = list(range(structure.shape[1]))
    drop = set()
    if cfg.drop_degree:
        drop |= {0, 1}
    if cfg.drop_node:
        drop |= set(hop_columns(cfg.k, NODE_LEVEL))
    if cfg.drop_graph:
        drop |= set(hop_columns(cfg.k, GRAPH_LEVEL))
    keep = [c for c in keep if c not in drop]
    out = {"intrinsic": raw["intrinsic"]}
    if keep:
        out["structure"] = structure[:, keep]
    if not cfg.drop_distance:
        out["distance"] = raw["distance"]
    return out


def build_model(cfg: RunConfig, blocks: dict[str, np.ndarray], num_classes: int, seed: int) -> DhseModel:
    mcfg = ModelConfig(
        kind=cfg.model,
        in_widths={b: int(x.shape[1]) for b, x in blocks.items()},
        hidden=cfg.hidden,
        num_classes=num_classes,
        layers=cfg.layers,
        heads=cfg.heads,
        diffusion_k=cfg.diffusion_k,
        transition=cfg.transition,
        activation=cfg.activation,
        dropout=cfg.dropout,
        embed_dropout=cfg.embed_dropout,
        encoding=not cfg.no_encoding,
    )
    gen = torch.Generator().manual_seed(seed)
    return DhseModel(mcfg, generator=gen)


@dataclass
class SeedResult:
    seed: int
    history: list
    train_acc: float
    valid_acc: float
    test_acc: float
    cs_valid_acc: float | None = None
    cs_test_acc: float | None = None


def _checkpoint_path(cfg: RunConfig, seed: int) -> Path:
    return Path(cfg.out_dir) / f"model_seed{seed}.dhsm"


def cmd_train(cfg: RunConfig, seed: int | None = None, ds: Dataset | None = None) -> SeedResult:
    """Train one seed, write checkpoint and per-epoch metrics CSV."""
    seed = cfg.seed if seed is None else seed
    set_threads(cfg.threads)
    ds = ds or load_dataset(cfg.data_dir)
    blocks = apply_ablation(cfg, load_raw_blocks(cfg, ds))
    model = build_model(cfg, blocks, ds.num_classes, seed)
    tb = to_blocks(blocks)
    ag = AttentionGraph(ds.graph)
    history = train(model, tb, ag, ds.labels, ds.splits["train"], ds.splits["valid"], cfg.train_config(), seed)
    out = model_forward(model, tb, ag)
    pred = out.probs.argmax(axis=1)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {"model": model.cfg.to_dict(), "run": asdict(cfg), "seed": seed}
    write_checkpoint(_checkpoint_path(cfg, seed), meta,
                     {k: v.detach().numpy() for k, v in model.state_dict().items()})
    with open(out_dir / f"metrics_seed{seed}.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(history[0]))
        w.writeheader()
        w.writerows(history)
    return SeedResult(
        seed=seed,
        history=history,
        train_acc=accuracy(pred, ds.labels, ds.splits["train"]),
        valid_acc=accuracy(pred, ds.labels, ds.splits["valid"]),
        test_acc=accuracy(pred, ds.labels, ds.splits["test"]),
    )


def load_model(path) -> tuple[DhseModel, dict]:
    meta, tensors = read_checkpoint(path)
    model = DhseModel(ModelConfig(**meta["model"]))
    state = {k: torch.from_numpy(v.copy()) for k, v in tensors.items()}
    missing = set(model.state_dict()) ^ set(state)
    if missing:
        raise FormatError(f"{path}: checkpoint tensors do not match the model ({sorted(missing)[:3]}...)")
    model.load_state_dict(state)
    return model, meta


def run_cs(cfg: RunConfig, ds: Dataset, probs: np.ndarray) -> dict[str, float]:
    """Base vs +C&S accuracies on the valid and test splits."""
    tr, va, te = ds.splits["train"], ds.splits["valid"], ds.splits["test"]
    if probs.shape[0] != ds.graph.num_nodes:
        raise ConfigError("prediction rows do not match the dataset")
    if ds.labels.max() >= probs.shape[1]:
        raise ConfigError("dataset has more classes than the model predicts")
    state = cs.LabelState.from_labels(probs, ds.labels, tr, va)
    S = cs.normalized_adjacency(ds.graph)
    G = cs.correct_and_smooth(state, S, cfg.cs_config())
    base, post = probs.argmax(axis=1), cs.predict(G)
    return {
        "base_valid": accuracy(base, ds.labels, va),
        "base_test": accuracy(base, ds.labels, te),
        "cs_valid": accuracy(post, ds.labels, va),
        "cs_test": accuracy(post, ds.labels, te),
    }


def cmd_cs(cfg: RunConfig, checkpoint=None, ds: Dataset | None = None) -> dict[str, float]:
    checkpoint = checkpoint or _checkpoint_path(cfg, cfg.seed)
    ds = ds or load_dataset(cfg.data_dir)
    model, meta = load_model(checkpoint)
    run = RunConfig.from_dict(meta["run"])
    blocks = to_blocks(apply_ablation(run, load_raw_blocks(replace(cfg, k=run.k), ds)))
    probs = model_forward(model, blocks, AttentionGraph(ds.graph)).probs
    return run_cs(cfg, ds, probs)


def cmd_eval(cfg: RunConfig, ds: Dataset | None = None) -> list[SeedResult]:
    """Train and post-process ``num_seeds`` consecutive seeds."""
    ds = ds or load_dataset(cfg.data_dir)
    results = []
    for seed in range(cfg.seed, cfg.seed + cfg.num_seeds):
        t0 = time.perf_counter()
        res = cmd_train(cfg, seed, ds)
        post = cmd_cs(cfg, _checkpoint_path(cfg, seed), ds)
        res.cs_valid_acc, res.cs_test_acc = post["cs_valid"], post["cs_test"]
        log.info("seed %d: test %.4f -> %.4f with C&S (%.1fs)", seed, res.test_acc, res.cs_test_acc,
                 time.perf_counter() - t0)
        results.append(res)
    return results


def _mean_std(xs) -> tuple[float, float]:
    xs = np.asarray(xs, dtype=np.float64)
    return float(xs.mean()), float(xs.std(ddof=1)) if xs.size > 1 else 0.0


def summary_rows(name: str, results: list[SeedResult]) -> list[dict]:
    rows = [{"model": name, "valid": _mean_std([r.valid_acc for r in results]),
             "test": _mean_std([r.test_acc for r in results])}]
    if all(r.cs_test_acc is not None for r in results):
        rows.append({"model": f"{name}+C&S", "valid": _mean_std([r.cs_valid_acc for r in results]),
                     "test": _mean_std([r.cs_test_acc for r in results])})
    return rows


def format_table(rows: list[dict]) -> str:
    cells = [("model", "Valid Accuracy", "Test Accuracy")]
    for r in rows:
        cells.append((r["model"], "%.4f ± %.4f" % r["valid"], "%.4f ± %.4f" % r["test"]))
    widths = [max(len(c[i]) for c in cells) for i in range(3)]
    return "\n".join("  ".join(c[i].ljust(widths[i]) for i in range(3)).rstrip() for c in cells)


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "valid_mean", "valid_std", "test_mean", "test_std"])
    for r in rows:
        w.writerow([r["model"], *("%.6f" % v for v in (*r["valid"], *r["test"]))])
    return buf.getvalue()
