"""Correct and Smooth post-processing of soft predictions.

Correct spreads the training residuals over the graph and adds them back
with a fixed scale; Smooth then propagates predictions anchored on the
training labels.  Both steps use the label-spreading iteration

    X <- (1 - alpha) * B + alpha * S @ X,    X(0) = B

whose fixed point solves (I - alpha S) X = (1 - alpha) B.  This is the
minimizer of trace(X^T (I - S) X) + mu ||X - B||^2 with alpha = 1 / (1 + mu).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph


@dataclass
class CsConfig:
    alpha_correct: float = 0.9
    alpha_smooth: float = 0.8
    scale: float = 1.0
    max_iters: int = 1000
    tol: float = 1e-9

    def __post_init__(self):
        for name in ("alpha_correct", "alpha_smooth"):
            a = getattr(self, name)
            if not 0.0 <= a < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {a}")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValueError("max_iters must be >= 1 and tol > 0")


@dataclass
class LabelState:
    """Soft predictions Z, one-hot truth Y and the train/valid/unlabeled split."""

    Z: np.ndarray
    Y: np.ndarray
    train_idx: np.ndarray
    valid_idx: np.ndarray
    unlabeled_idx: np.ndarray

    def __post_init__(self):
        n = self.Z.shape[0]
        if self.Y.shape != self.Z.shape:
            raise ValueError(f"Y shape {self.Y.shape} != Z shape {self.Z.shape}")
        parts = [np.asarray(p, dtype=np.int64) for p in (self.train_idx, self.valid_idx, self.unlabeled_idx)]
        self.train_idx, self.valid_idx, self.unlabeled_idx = parts
        allidx = np.concatenate(parts)
        if allidx.size != n or not np.array_equal(np.sort(allidx), np.arange(n)):
            raise ValueError("train/valid/unlabeled sets must partition the nodes")

    @classmethod
    def from_labels(cls, Z, labels, train_idx, valid_idx, unlabeled_idx=None) -> "LabelState":
        """Build Y from integer labels; labels on unlabeled rows are ignored."""
        Z = np.asarray(Z, dtype=np.float64)
        n, c = Z.shape
        labels = np.asarray(labels, dtype=np.int64)
        train_idx = np.asarray(train_idx, dtype=np.int64)
        valid_idx = np.asarray(valid_idx, dtype=np.int64)
        if unlabeled_idx is None:
            mask = np.ones(n, dtype=bool)
            mask[train_idx] = False
            mask[valid_idx] = False
            unlabeled_idx = np.flatnonzero(mask)
        Y = np.zeros((n, c))
        known = np.concatenate([train_idx, valid_idx])
        if known.size and (labels[known].min() < 0 or labels[known].max() >= c):
            raise ValueError("label outside [0, num_classes)")
        Y[known, labels[known]] = 1.0
        return cls(Z, Y, train_idx, valid_idx, unlabeled_idx)


def normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """S = D^-1/2 A D^-1/2 over the undirected view; isolated nodes get zero rows."""
    n = g.num_nodes
    A = sp.csr_matrix(
        (np.ones(g.undirected_targets.size), g.undirected_targets, g.undirected_offsets), shape=(n, n)
    )
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv = np.zeros(n)
    nz = deg > 0
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    D = sp.diags(inv)
    return (D @ A @ D).tocsr()


def label_spread(B: np.ndarray, S, alpha: float, max_iters: int, tol: float) -> tuple[np.ndarray, int, float]:
    """Iterate X <- (1-alpha) B + alpha S X from X = B.

    Returns (X, iterations, last max-abs change).
    """
    base = (1.0 - alpha) * B
    X = np.array(B, dtype=np.float64, copy=True)
    change = np.inf
    it = 0
    while it < max_iters:
        nxt = base + alpha * (S @ X)
        change = float(np.max(np.abs(nxt - X))) if X.size else 0.0
        X = nxt
        it += 1
        if change < tol:
            break
    return X, it, change


def compute_error(state: LabelState) -> np.ndarray:
    E = np.zeros_like(state.Z)
    t = state.train_idx
    E[t] = state.Z[t] - state.Y[t]
    return E


def spread(E, S, alpha: float, max_iters: int = 1000, tol: float = 1e-9) -> np.ndarray:
    return label_spread(E, S, alpha, max_iters, tol)[0]


def correct(Z: np.ndarray, E_hat: np.ndarray, s: float) -> np.ndarray:
    """Fixed-scale correction Z + s * E_hat; rows are not renormalized."""
    if Z.shape != E_hat.shape:
        raise ValueError("Z and E_hat shapes differ")
    return Z + s * E_hat


def anchor(Z_r: np.ndarray, state: LabelState) -> np.ndarray:
    G = np.array(Z_r, dtype=np.float64, copy=True)
    G[state.train_idx] = state.Y[state.train_idx]
    return G


def smooth(Z_r, state: LabelState, S, alpha: float, max_iters: int = 1000, tol: float = 1e-9) -> np.ndarray:
    return label_spread(anchor(Z_r, state), S, alpha, max_iters, tol)[0]


def predict(G: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest class index."""
    return np.argmax(G, axis=1)


def correct_and_smooth(state: LabelState, S, cfg: CsConfig | None = None) -> np.ndarray:
    """Run both stages and return the smoothed soft labels.

    ``compute_error`` yields Z - Y, so the spread residual is negated before
    the correction; otherwise the correction would push Z away from Y.
    """
    cfg = cfg or CsConfig()
    E_hat = -spread(compute_error(state), S, cfg.alpha_correct, cfg.max_iters, cfg.tol)
    Z_r = correct(state.Z, E_hat, cfg.scale)
    return smooth(Z_r, state, S, cfg.alpha_smooth, cfg.max_iters, cfg.tol)
