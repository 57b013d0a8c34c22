"""Distributional statistics of hop distances inside a k-hop ego-net.

Seven statistics in fixed order: maximum, minimum, median, mean, standard
deviation, excess kurtosis, skewness.  Moments are population moments.
Empty sequences give all zeros; zero variance gives zero skew/kurtosis.
"""
from __future__ import annotations

import numpy as np

from .graph import EgoNet

STAT_NAMES = ("maximum", "minimum", "median", "mean", "std_dev", "kurtosis", "skewness")


def distance_sequence(net: EgoNet) -> np.ndarray:
    """Hop distance of every ego-net node except the center."""
    mask = np.ones(net.num_nodes, dtype=bool)
    mask[net.center_local] = False
    return net.dist_from_center[mask].copy()


def histogram_stats(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Statistics for many sequences given as counts over shared sorted ``values``.

    ``values`` has shape (m,) strictly increasing; ``counts`` has shape
    (rows, m).  Returns (rows, 7).
    """
    values = np.asarray(values, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    rows = counts.shape[0]
    out = np.zeros((rows, len(STAT_NAMES)))
    total = counts.sum(axis=1)
    ok = total > 0
    if not ok.any():
        return out
    c = counts[ok]
    n = total[ok]
    present = c > 0
    out[ok, 0] = values[present.shape[1] - 1 - np.argmax(present[:, ::-1], axis=1)]
    out[ok, 1] = values[np.argmax(present, axis=1)]

    cum = np.cumsum(c, axis=1)
    lo_rank = np.floor((n - 1) / 2)
    hi_rank = np.floor(n / 2)
    lo = values[np.argmax(cum > lo_rank[:, None], axis=1)]
    hi = values[np.argmax(cum > hi_rank[:, None], axis=1)]
    out[ok, 2] = (lo + hi) / 2

    mean = (c * values).sum(axis=1) / n
    dev = values[None, :] - mean[:, None]
    m2 = (c * dev**2).sum(axis=1) / n
    m3 = (c * dev**3).sum(axis=1) / n
    m4 = (c * dev**4).sum(axis=1) / n
    out[ok, 3] = mean
    out[ok, 4] = np.sqrt(m2)
    nz = m2 > 0
    safe = np.where(nz, m2, 1.0)
    out[ok, 5] = np.where(nz, m4 / safe**2 - 3.0, 0.0)
    out[ok, 6] = np.where(nz, m3 / safe**1.5, 0.0)
    return out


def distribution_stats(seq) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.float64).ravel()
    if seq.size == 0:
        return np.zeros(len(STAT_NAMES))
    values, counts = np.unique(seq, return_counts=True)
    return histogram_stats(values, counts[None, :])[0]
